#include "sll/conv.hpp"

#include <cmath>
#include <limits>

#include "sll/error.hpp"

namespace sll {

ConvLayer make_conv_layer(std::size_t in_c, std::size_t out_c, std::size_t kh, std::size_t kw,
                          std::size_t stride, std::size_t pad, SeededRng& rng) {
    if (in_c == 0 || out_c == 0 || kh == 0 || kw == 0 || stride == 0)
        throw InvalidInputError("make_conv_layer: zero dimension");
    ConvLayer layer;
    layer.in_c = in_c;
    layer.out_c = out_c;
    layer.kh = kh;
    layer.kw = kw;
    layer.stride = stride;
    layer.pad = pad;
    const std::size_t fan_in = in_c * kh * kw;
    layer.kernels = Matrix(out_c, fan_in);
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (double& x : layer.kernels.data) x = std_dev * rng.normal();
    layer.bias.assign(out_c, 0.0);
    return layer;
}

ConvShape conv_output_shape(const ConvLayer& layer, const ConvShape& in) {
    if (in.c != layer.in_c)
        throw ShapeError("conv_output_shape: input has " + std::to_string(in.c) +
                         " channels, layer expects " + std::to_string(layer.in_c));
    if (in.h + 2 * layer.pad < layer.kh || in.w + 2 * layer.pad < layer.kw)
        throw ShapeError("conv_output_shape: kernel larger than padded input");
    return {layer.out_c, (in.h + 2 * layer.pad - layer.kh) / layer.stride + 1,
            (in.w + 2 * layer.pad - layer.kw) / layer.stride + 1};
}

namespace {

void check_image_batch(const Matrix& x, const ConvShape& in, const char* op) {
    if (x.cols != in.flat())
        throw ShapeError(std::string(op) + ": batch " + shape_string(x) + " vs shape " +
                         std::to_string(in.c) + "x" + std::to_string(in.h) + "x" +
                         std::to_string(in.w));
    if (x.rows == 0) throw InvalidInputError(std::string(op) + ": empty batch");
}

// One batch's patches, rows ordered (b, oy, ox), columns (c, ky, kx).
Matrix im2col(const Matrix& x, const ConvShape& in, const ConvShape& out, std::size_t kh,
              std::size_t kw, std::size_t stride, std::size_t pad) {
    const std::size_t patch = in.c * kh * kw;
    Matrix cols(x.rows * out.h * out.w, patch);
    for (std::size_t b = 0; b < x.rows; ++b) {
        const double* img = x.data.data() + b * in.flat();
        for (std::size_t oy = 0; oy < out.h; ++oy) {
            for (std::size_t ox = 0; ox < out.w; ++ox) {
                double* dst = cols.data.data() + ((b * out.h + oy) * out.w + ox) * patch;
                for (std::size_t c = 0; c < in.c; ++c) {
                    for (std::size_t ky = 0; ky < kh; ++ky) {
                        const std::ptrdiff_t iy =
                            static_cast<std::ptrdiff_t>(oy * stride + ky) -
                            static_cast<std::ptrdiff_t>(pad);
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            const std::ptrdiff_t ix =
                                static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                static_cast<std::ptrdiff_t>(pad);
                            double v = 0.0;
                            if (iy >= 0 && iy < static_cast<std::ptrdiff_t>(in.h) && ix >= 0 &&
                                ix < static_cast<std::ptrdiff_t>(in.w))
                                v = img[(c * in.h + static_cast<std::size_t>(iy)) * in.w +
                                        static_cast<std::size_t>(ix)];
                            *dst++ = v;
                        }
                    }
                }
            }
        }
    }
    return cols;
}

// (B*oh*ow) x out_c product -> per-sample channel-major rows.
Matrix scatter_pre(const Matrix& prod, std::size_t batch, const ConvShape& out) {
    const std::size_t hw = out.h * out.w;
    Matrix pre(batch, out.flat());
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t s = 0; s < hw; ++s) {
            const double* src = prod.data.data() + (b * hw + s) * out.c;
            for (std::size_t o = 0; o < out.c; ++o) pre(b, o * hw + s) = src[o];
        }
    return pre;
}

}  // namespace

ConvCache conv2d_forward(ConvLayer& layer, const Matrix& x, const ConvShape& in) {
    check_image_batch(x, in, "conv2d_forward");
    const ConvShape out = conv_output_shape(layer, in);
    ConvCache cache;
    cache.input_snapshot = x;
    cache.in_shape = in;
    cache.out_shape = out;
    cache.cols = im2col(x, in, out, layer.kh, layer.kw, layer.stride, layer.pad);
    Matrix prod = matmul(cache.cols, layer.kernels, false, true);  // (B*oh*ow) x out_c
    for (std::size_t r = 0; r < prod.rows; ++r) {
        double* row = prod.data.data() + r * prod.cols;
        for (std::size_t o = 0; o < layer.out_c; ++o) row[o] += layer.bias[o];
    }
    cache.pre = scatter_pre(prod, x.rows, out);
    cache.owner = &layer;
    cache.serial = ++layer.forward_serial;
    return cache;
}

Matrix conv2d_infer(const ConvLayer& layer, const Matrix& x, const ConvShape& in) {
    check_image_batch(x, in, "conv2d_infer");
    const ConvShape out = conv_output_shape(layer, in);
    const Matrix cols = im2col(x, in, out, layer.kh, layer.kw, layer.stride, layer.pad);
    Matrix prod = matmul(cols, layer.kernels, false, true);
    for (std::size_t r = 0; r < prod.rows; ++r) {
        double* row = prod.data.data() + r * prod.cols;
        for (std::size_t o = 0; o < layer.out_c; ++o) row[o] += layer.bias[o];
    }
    return scatter_pre(prod, x.rows, out);
}

ParamGrads conv2d_backward_local(const ConvLayer& layer, const ConvCache& cache,
                                 const Matrix& grad_pre) {
    if (!cache.valid())
        throw ContractViolationError("conv2d_backward_local: cache already released");
    if (cache.owner != static_cast<const void*>(&layer))
        throw ContractViolationError("conv2d_backward_local: cache belongs to a different layer");
    if (cache.serial != layer.forward_serial)
        throw ContractViolationError("conv2d_backward_local: cache is stale");
    check_same_shape(grad_pre, cache.pre, "conv2d_backward_local");

    const ConvShape& out = cache.out_shape;
    const std::size_t hw = out.h * out.w;
    // Re-pack grad_pre as (B*oh*ow) x out_c to mirror the forward product.
    Matrix g(grad_pre.rows * hw, out.c);
    for (std::size_t b = 0; b < grad_pre.rows; ++b)
        for (std::size_t s = 0; s < hw; ++s) {
            double* dst = g.data.data() + (b * hw + s) * out.c;
            for (std::size_t o = 0; o < out.c; ++o) dst[o] = grad_pre(b, o * hw + s);
        }
    ParamGrads grads;
    grads.dw = matmul(g, cache.cols, true, false);  // out_c x patch
    grads.db = column_sums(g);
    return grads;
}

PoolResult maxpool2d(const Matrix& x, const ConvShape& in, std::size_t k, std::size_t s) {
    check_image_batch(x, in, "maxpool2d");
    if (k == 0 || s == 0) throw InvalidInputError("maxpool2d: zero window or stride");
    if (in.h < k || in.w < k)
        throw ShapeError("maxpool2d: window " + std::to_string(k) + " exceeds input " +
                         std::to_string(in.h) + "x" + std::to_string(in.w));
    PoolResult res;
    res.out_shape = {in.c, (in.h - k) / s + 1, (in.w - k) / s + 1};
    const std::size_t ohw = res.out_shape.h * res.out_shape.w;
    res.y = Matrix(x.rows, res.out_shape.flat());
    res.argmax.resize(x.rows * res.out_shape.flat());
    for (std::size_t b = 0; b < x.rows; ++b) {
        const double* img = x.data.data() + b * in.flat();
        for (std::size_t c = 0; c < in.c; ++c) {
            for (std::size_t oy = 0; oy < res.out_shape.h; ++oy) {
                for (std::size_t ox = 0; ox < res.out_shape.w; ++ox) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::size_t best_idx = 0;
                    for (std::size_t dy = 0; dy < k; ++dy)
                        for (std::size_t dx = 0; dx < k; ++dx) {
                            const std::size_t idx =
                                (c * in.h + oy * s + dy) * in.w + ox * s + dx;
                            if (img[idx] > best) {
                                best = img[idx];
                                best_idx = idx;
                            }
                        }
                    const std::size_t o = (c * res.out_shape.h + oy) * res.out_shape.w + ox;
                    res.y(b, o) = best;
                    res.argmax[b * res.out_shape.flat() + o] = static_cast<std::uint32_t>(best_idx);
                }
            }
        }
    }
    return res;
}

Matrix maxpool2d_backward(const PoolResult& pool, const ConvShape& in, const Matrix& grad_y) {
    // Validate against the recorded geometry: pool.y may have been moved out.
    if (grad_y.cols != pool.out_shape.flat() ||
        grad_y.rows * grad_y.cols != pool.argmax.size())
        throw ShapeError("maxpool2d_backward: grad " + shape_string(grad_y) +
                         " vs pooled output of " + std::to_string(pool.out_shape.flat()) +
                         " per row (" + std::to_string(pool.argmax.size()) + " total)");
    Matrix grad_x(grad_y.rows, in.flat());
    for (std::size_t b = 0; b < grad_y.rows; ++b) {
        double* dst = grad_x.data.data() + b * in.flat();
        const double* src = grad_y.data.data() + b * grad_y.cols;
        const std::uint32_t* am = pool.argmax.data() + b * grad_y.cols;
        for (std::size_t o = 0; o < grad_y.cols; ++o) dst[am[o]] += src[o];
    }
    return grad_x;
}

Matrix adaptive_avg_pool_to(const Matrix& x, std::size_t d) {
    if (d == 0) throw InvalidInputError("adaptive_avg_pool_to: target dim must be positive");
    if (d > x.cols)
        throw ShapeError("adaptive_avg_pool_to: target " + std::to_string(d) + " exceeds input " +
                         shape_string(x));
    if (d == x.cols) return x;
    Matrix y(x.rows, d);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const double* row = x.data.data() + i * x.cols;
        for (std::size_t o = 0; o < d; ++o) {
            const std::size_t lo = o * x.cols / d;
            const std::size_t hi = (o + 1) * x.cols / d;
            double sum = 0.0;
            for (std::size_t j = lo; j < hi; ++j) sum += row[j];
            y(i, o) = sum / static_cast<double>(hi - lo);
        }
    }
    return y;
}

Matrix adaptive_avg_pool_backward(const Matrix& grad_y, std::size_t n) {
    if (grad_y.cols > n)
        throw ShapeError("adaptive_avg_pool_backward: output " + shape_string(grad_y) +
                         " exceeds input width " + std::to_string(n));
    if (grad_y.cols == n) return grad_y;
    const std::size_t d = grad_y.cols;
    Matrix grad_x(grad_y.rows, n);
    for (std::size_t i = 0; i < grad_y.rows; ++i)
        for (std::size_t o = 0; o < d; ++o) {
            const std::size_t lo = o * n / d;
            const std::size_t hi = (o + 1) * n / d;
            const double g = grad_y(i, o) / static_cast<double>(hi - lo);
            for (std::size_t j = lo; j < hi; ++j) grad_x(i, j) += g;
        }
    return grad_x;
}

}  // namespace sll
