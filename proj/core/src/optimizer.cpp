#include "sll/optimizer.hpp"

#include <cmath>

#include "sll/error.hpp"

namespace sll {

void optimizer_step(std::span<double> param, std::span<const double> grad, TensorOpt& state,
                    std::int64_t t, const OptConfig& cfg) {
    if (param.size() != grad.size())
        throw ShapeError("optimizer_step: param of " + std::to_string(param.size()) +
                         " vs grad of " + std::to_string(grad.size()));
    if (!(cfg.lr > 0.0)) throw InvalidInputError("optimizer_step: lr must be positive");
    switch (cfg.kind) {
        case OptKind::sgd:
            for (std::size_t i = 0; i < param.size(); ++i) param[i] -= cfg.lr * grad[i];
            return;
        case OptKind::adam: {
            if (state.m.size() != param.size()) state.m.assign(param.size(), 0.0);
            if (state.u.size() != param.size()) state.u.assign(param.size(), 0.0);
            const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
            const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
            for (std::size_t i = 0; i < param.size(); ++i) {
                state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
                state.u[i] = cfg.beta2 * state.u[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
                const double mhat = state.m[i] / bc1;
                const double vhat = state.u[i] / bc2;
                param[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
            }
            return;
        }
        case OptKind::adamax: {
            if (state.m.size() != param.size()) state.m.assign(param.size(), 0.0);
            if (state.u.size() != param.size()) state.u.assign(param.size(), 0.0);
            const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
            for (std::size_t i = 0; i < param.size(); ++i) {
                state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
                state.u[i] = std::max(cfg.beta2 * state.u[i], std::abs(grad[i]));
                param[i] -= (cfg.lr / bc1) * state.m[i] / (state.u[i] + cfg.eps);
            }
            return;
        }
    }
    throw InvalidInputError("optimizer_step: unknown optimizer kind");
}

void apply_update(DenseLayer& layer, const ParamGrads& grads, const OptConfig& cfg) {
    check_same_shape(layer.w, grads.dw, "apply_update");
    if (grads.db.size() != layer.b.size())
        throw ShapeError("apply_update: bias of " + std::to_string(layer.b.size()) +
                         " vs grad of " + std::to_string(grads.db.size()));
    const std::int64_t t = ++layer.opt.t;
    optimizer_step(layer.w.data, grads.dw.data, layer.opt.w_state, t, cfg);
    optimizer_step(layer.b, grads.db, layer.opt.b_state, t, cfg);
}

void apply_update(BatchNorm1d& bn, std::span<const double> dgamma, std::span<const double> dbeta,
                  const OptConfig& cfg) {
    const std::int64_t t = ++bn.opt.t;
    optimizer_step(bn.gamma, dgamma, bn.opt.w_state, t, cfg);
    optimizer_step(bn.beta, dbeta, bn.opt.b_state, t, cfg);
}

std::size_t opt_state_bytes(const OptSlots& slots) {
    return (slots.w_state.m.size() + slots.w_state.u.size() + slots.b_state.m.size() +
            slots.b_state.u.size()) *
           sizeof(double);
}

}  // namespace sll
