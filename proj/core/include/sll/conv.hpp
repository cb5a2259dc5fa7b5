#pragma once

#include <cstdint>
#include <vector>

#include "sll/layers.hpp"
#include "sll/matrix.hpp"
#include "sll/rng.hpp"

namespace sll {

// Channel-major image geometry for rows of a flattened batch matrix.
struct ConvShape {
    std::size_t c = 0, h = 0, w = 0;
    std::size_t flat() const { return c * h * w; }
    bool operator==(const ConvShape&) const = default;
};

struct ConvLayer {
    Matrix kernels;            // out_c x (in_c * kh * kw)
    std::vector<double> bias;  // out_c
    std::size_t in_c = 0, out_c = 0, kh = 0, kw = 0, stride = 1, pad = 0;
    OptSlots opt;
    std::uint64_t forward_serial = 0;
};

ConvLayer make_conv_layer(std::size_t in_c, std::size_t out_c, std::size_t kh, std::size_t kw,
                          std::size_t stride, std::size_t pad, SeededRng& rng);

ConvShape conv_output_shape(const ConvLayer& layer, const ConvShape& in);

struct ConvCache {
    Matrix input_snapshot;  // B x in.flat()
    Matrix cols;            // (B * oh * ow) x (in_c * kh * kw)
    Matrix pre;             // B x out.flat(), pre-activation
    ConvShape in_shape, out_shape;
    const void* owner = nullptr;
    std::uint64_t serial = 0;

    bool valid() const { return owner != nullptr; }
    std::size_t bytes() const { return input_snapshot.bytes() + cols.bytes() + pre.bytes(); }
    void release() {
        input_snapshot.release();
        cols.release();
        pre.release();
        owner = nullptr;
    }
};

// Cross-correlation via im2col + one dgemm.  Activation is NOT applied; the
// caller picks relu/identity on cache.pre.
ConvCache conv2d_forward(ConvLayer& layer, const Matrix& x, const ConvShape& in);

Matrix conv2d_infer(const ConvLayer& layer, const Matrix& x, const ConvShape& in);

// Kernel/bias gradients from dL/d(pre).  No input gradient: updates stay local.
ParamGrads conv2d_backward_local(const ConvLayer& layer, const ConvCache& cache,
                                 const Matrix& grad_pre);

struct PoolResult {
    Matrix y;  // B x (c * oh * ow)
    ConvShape out_shape;
    std::vector<std::uint32_t> argmax;  // flat source index per output element
};

PoolResult maxpool2d(const Matrix& x, const ConvShape& in, std::size_t k = 2, std::size_t s = 2);

// Scatters grad_y back to the argmax positions.
Matrix maxpool2d_backward(const PoolResult& pool, const ConvShape& in, const Matrix& grad_y);

// 1-D adaptive average pooling over each row: bin i averages
// x[floor(i*n/d) : floor((i+1)*n/d)).  Identity when d == n.
Matrix adaptive_avg_pool_to(const Matrix& x, std::size_t d);

// Adjoint of adaptive_avg_pool_to (spreads each bin's gradient evenly).
Matrix adaptive_avg_pool_backward(const Matrix& grad_y, std::size_t n);

}  // namespace sll
