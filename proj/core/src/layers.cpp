#include "sll/layers.hpp"

#include <cmath>

#include "sll/error.hpp"

namespace sll {

DenseLayer make_dense_layer(std::size_t in_dim, std::size_t out_dim, Activation activation,
                            SeededRng& rng) {
    if (in_dim == 0 || out_dim == 0)
        throw InvalidInputError("make_dense_layer: dimensions must be positive");
    DenseLayer layer;
    layer.activation = activation;
    layer.w = Matrix(out_dim, in_dim);
    const double std_dev = activation == Activation::relu
                               ? std::sqrt(2.0 / static_cast<double>(in_dim))
                               : std::sqrt(1.0 / static_cast<double>(in_dim));
    for (double& x : layer.w.data) x = std_dev * rng.normal();
    layer.b.assign(out_dim, 0.0);
    return layer;
}

namespace {

void check_input(const DenseLayer& layer, const Matrix& input, const char* op) {
    if (input.cols != layer.w.cols)
        throw ShapeError(std::string(op) + ": input " + shape_string(input) + " vs weights " +
                         shape_string(layer.w));
    if (input.rows == 0) throw InvalidInputError(std::string(op) + ": empty batch");
}

void check_cache(const DenseLayer& layer, const ForwardCache& cache, const Matrix& grad_output,
                 const char* op) {
    if (!cache.valid())
        throw ContractViolationError(std::string(op) + ": cache already released");
    if (cache.owner != static_cast<const void*>(&layer))
        throw ContractViolationError(std::string(op) + ": cache belongs to a different layer");
    if (cache.serial != layer.forward_serial)
        throw ContractViolationError(std::string(op) +
                                     ": cache is stale (a newer forward ran on this layer)");
    if (grad_output.rows != cache.pre_activation.rows ||
        grad_output.cols != cache.pre_activation.cols)
        throw ShapeError(std::string(op) + ": grad " + shape_string(grad_output) +
                         " vs pre-activation " + shape_string(cache.pre_activation));
}

// dL/d(pre) from dL/d(output) under the layer's activation.
Matrix pre_grad(const DenseLayer& layer, const ForwardCache& cache, const Matrix& grad_output) {
    if (layer.activation == Activation::identity) return grad_output;
    return hadamard(grad_output, relu_mask(cache.pre_activation));
}

}  // namespace

ForwardCache dense_forward(DenseLayer& layer, const Matrix& input, bool detach_input) {
    check_input(layer, input, "dense_forward");
    ForwardCache cache;
    cache.input_snapshot = input;  // private copy; upstream buffers stay untouched
    cache.pre_activation = matmul(input, layer.w, false, true);
    add_row_vector_inplace(cache.pre_activation, layer.b);
    cache.output = layer.activation == Activation::relu ? relu(cache.pre_activation)
                                                        : cache.pre_activation;
    cache.detached_input = detach_input;
    cache.owner = &layer;
    cache.serial = ++layer.forward_serial;
    return cache;
}

Matrix dense_infer(const DenseLayer& layer, const Matrix& input) {
    check_input(layer, input, "dense_infer");
    Matrix pre = matmul(input, layer.w, false, true);
    add_row_vector_inplace(pre, layer.b);
    if (layer.activation == Activation::relu)
        for (double& x : pre.data) x = x > 0.0 ? x : 0.0;
    return pre;
}

ParamGrads dense_backward_local(const DenseLayer& layer, const ForwardCache& cache,
                                const Matrix& grad_output) {
    check_cache(layer, cache, grad_output, "dense_backward_local");
    const Matrix dpre = pre_grad(layer, cache, grad_output);
    ParamGrads grads;
    grads.dw = matmul(dpre, cache.input_snapshot, true, false);  // (out x B)(B x in)
    grads.db = column_sums(dpre);
    return grads;
}

FullGrads dense_backward_full(const DenseLayer& layer, const ForwardCache& cache,
                              const Matrix& grad_output) {
    check_cache(layer, cache, grad_output, "dense_backward_full");
    const Matrix dpre = pre_grad(layer, cache, grad_output);
    FullGrads grads;
    grads.params.dw = matmul(dpre, cache.input_snapshot, true, false);
    grads.params.db = column_sums(dpre);
    grads.grad_input = matmul(dpre, layer.w);  // (B x out)(out x in)
    return grads;
}

BatchNorm1d make_batchnorm1d(std::size_t dim) {
    if (dim == 0) throw InvalidInputError("make_batchnorm1d: dim must be positive");
    BatchNorm1d bn;
    bn.gamma.assign(dim, 1.0);
    bn.beta.assign(dim, 0.0);
    bn.running_mean.assign(dim, 0.0);
    bn.running_var.assign(dim, 1.0);
    return bn;
}

BnForward batchnorm_forward(BatchNorm1d& bn, const Matrix& x, bool training) {
    const std::size_t c = bn.gamma.size();
    if (x.cols != c)
        throw ShapeError("batchnorm_forward: input " + shape_string(x) + " vs " +
                         std::to_string(c) + " features");
    BnForward out;
    out.y = Matrix(x.rows, x.cols);
    if (!training) {
        for (std::size_t j = 0; j < c; ++j) {
            const double invstd = 1.0 / std::sqrt(bn.running_var[j] + bn.eps);
            for (std::size_t i = 0; i < x.rows; ++i)
                out.y(i, j) = bn.gamma[j] * (x(i, j) - bn.running_mean[j]) * invstd + bn.beta[j];
        }
        return out;
    }
    if (x.rows < 2)
        throw InvalidInputError("batchnorm_forward: training mode needs batch >= 2, got " +
                                std::to_string(x.rows));
    const double inv_b = 1.0 / static_cast<double>(x.rows);
    out.cache.xhat = Matrix(x.rows, x.cols);
    out.cache.invstd.resize(c);
    for (std::size_t j = 0; j < c; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < x.rows; ++i) mean += x(i, j);
        mean *= inv_b;
        double var = 0.0;
        for (std::size_t i = 0; i < x.rows; ++i) {
            const double d = x(i, j) - mean;
            var += d * d;
        }
        var *= inv_b;  // biased, used for normalization and running stats alike
        const double invstd = 1.0 / std::sqrt(var + bn.eps);
        out.cache.invstd[j] = invstd;
        for (std::size_t i = 0; i < x.rows; ++i) {
            const double xh = (x(i, j) - mean) * invstd;
            out.cache.xhat(i, j) = xh;
            out.y(i, j) = bn.gamma[j] * xh + bn.beta[j];
        }
        bn.running_mean[j] = (1.0 - bn.momentum) * bn.running_mean[j] + bn.momentum * mean;
        bn.running_var[j] = (1.0 - bn.momentum) * bn.running_var[j] + bn.momentum * var;
    }
    return out;
}

BnGrads batchnorm_backward(const BatchNorm1d& bn, const BnCache& cache, const Matrix& grad_y) {
    if (!cache.valid())
        throw ContractViolationError("batchnorm_backward: cache missing (inference forward?)");
    check_same_shape(grad_y, cache.xhat, "batchnorm_backward");
    const std::size_t b = grad_y.rows, c = grad_y.cols;
    BnGrads g;
    g.grad_x = Matrix(b, c);
    g.dgamma.assign(c, 0.0);
    g.dbeta.assign(c, 0.0);
    const double inv_b = 1.0 / static_cast<double>(b);
    for (std::size_t j = 0; j < c; ++j) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t i = 0; i < b; ++i) {
            sum_dy += grad_y(i, j);
            sum_dy_xhat += grad_y(i, j) * cache.xhat(i, j);
        }
        g.dbeta[j] = sum_dy;
        g.dgamma[j] = sum_dy_xhat;
        const double k = bn.gamma[j] * cache.invstd[j] * inv_b;
        for (std::size_t i = 0; i < b; ++i)
            g.grad_x(i, j) = k * (static_cast<double>(b) * grad_y(i, j) - sum_dy -
                                  cache.xhat(i, j) * sum_dy_xhat);
    }
    return g;
}

}  // namespace sll
