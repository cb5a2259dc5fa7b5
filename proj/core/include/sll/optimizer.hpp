#pragma once

#include <cstdint>
#include <span>

#include "sll/layers.hpp"

namespace sll {

enum class OptKind { sgd, adam, adamax };

struct OptConfig {
    OptKind kind = OptKind::sgd;
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// One deterministic in-place update of a parameter tensor.  `t` is the
// 1-based update count used for bias correction; state vectors are lazily
// sized on first use.
void optimizer_step(std::span<double> param, std::span<const double> grad, TensorOpt& state,
                    std::int64_t t, const OptConfig& cfg);

// Applies a ParamGrads pair to a dense layer (bumps the layer's slot count).
void apply_update(DenseLayer& layer, const ParamGrads& grads, const OptConfig& cfg);

// Gamma/beta update for batchnorm.
void apply_update(BatchNorm1d& bn, std::span<const double> dgamma, std::span<const double> dbeta,
                  const OptConfig& cfg);

// Logical bytes held by optimizer state (for the memory ledger).
std::size_t opt_state_bytes(const OptSlots& slots);

}  // namespace sll
