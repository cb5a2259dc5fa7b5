#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sll/matrix.hpp"
#include "sll/rng.hpp"

namespace sll {

enum class Activation { relu, identity };

// Per-tensor optimizer slots (first/second moment or infinity norm).
struct TensorOpt {
    std::vector<double> m;
    std::vector<double> u;
};

struct OptSlots {
    TensorOpt w_state;
    TensorOpt b_state;
    std::int64_t t = 0;  // update count for bias correction
};

struct DenseLayer {
    Matrix w;               // out x in
    std::vector<double> b;  // out
    Activation activation = Activation::relu;
    OptSlots opt;
    std::uint64_t forward_serial = 0;  // bumped on every forward; caches carry it
};

// He init for relu fan-in, Xavier for identity.
DenseLayer make_dense_layer(std::size_t in_dim, std::size_t out_dim, Activation activation,
                            SeededRng& rng);

// Everything backward needs.  input_snapshot is always a private copy of the
// incoming batch, so consuming a cache never reaches into another layer's
// buffers; detached_input records whether gradient flow stops here.
struct ForwardCache {
    Matrix input_snapshot;
    Matrix pre_activation;
    Matrix output;
    bool detached_input = true;
    const void* owner = nullptr;
    std::uint64_t serial = 0;

    bool valid() const { return owner != nullptr; }
    std::size_t bytes() const {
        return input_snapshot.bytes() + pre_activation.bytes() + output.bytes();
    }
    void release() {
        input_snapshot.release();
        pre_activation.release();
        output.release();
        owner = nullptr;
    }
};

ForwardCache dense_forward(DenseLayer& layer, const Matrix& input, bool detach_input);

// Inference-only forward; allocates nothing beyond the output.
Matrix dense_infer(const DenseLayer& layer, const Matrix& input);

struct ParamGrads {
    Matrix dw;
    std::vector<double> db;
};

// Parameter gradients only: dL/dW, dL/db from dL/d(output).  The cache must
// come from the latest forward on `layer`; anything stale throws.
ParamGrads dense_backward_local(const DenseLayer& layer, const ForwardCache& cache,
                                const Matrix& grad_output);

struct FullGrads {
    ParamGrads params;
    Matrix grad_input;
};

// Parameter gradients plus the input gradient for chained backprop.
FullGrads dense_backward_full(const DenseLayer& layer, const ForwardCache& cache,
                              const Matrix& grad_output);

// Batch normalization over features (rows = batch).
struct BatchNorm1d {
    std::vector<double> gamma, beta;
    std::vector<double> running_mean, running_var;
    double momentum = 0.1;
    double eps = 1e-5;
    OptSlots opt;
};

BatchNorm1d make_batchnorm1d(std::size_t dim);

struct BnCache {
    Matrix xhat;
    std::vector<double> invstd;
    bool valid() const { return !xhat.empty(); }
    std::size_t bytes() const { return xhat.bytes() + invstd.size() * sizeof(double); }
};

struct BnForward {
    Matrix y;
    BnCache cache;  // populated only in training mode
};

// Training mode normalizes with batch statistics (batch >= 2) and updates the
// running estimates; inference mode uses the running estimates.
BnForward batchnorm_forward(BatchNorm1d& bn, const Matrix& x, bool training);

// Inference-mode normalization (running estimates) without touching state.
Matrix batchnorm_infer(const BatchNorm1d& bn, const Matrix& x);

struct BnGrads {
    Matrix grad_x;
    std::vector<double> dgamma, dbeta;
};

BnGrads batchnorm_backward(const BatchNorm1d& bn, const BnCache& cache, const Matrix& grad_y);

}  // namespace sll
