#pragma once

#include <span>
#include <vector>

#include "sll/matrix.hpp"
#include "sll/numerics.hpp"

namespace sll {

enum class Reduction { mean, sum, none };

struct LossResult {
    // Reduced loss.  NaN under Reduction::none; read per_row instead.
    double value = 0.0;
    std::vector<double> per_row;
    // Gradient w.r.t. the logits, matching the reduction (mean divides by B;
    // sum/none leave rows unscaled).  Empty when with_grad is false.
    Matrix grad;
};

// Softmax cross-entropy on raw logits against integer labels.
LossResult cross_entropy(const Matrix& logits, std::span<const int> labels,
                         Reduction reduction = Reduction::mean, bool with_grad = true);

// Overlap coefficient sum_k sqrt(q_k p_k) of two distributions, in [0, 1].
double bhattacharyya_coefficient(const ProbVector& q, const ProbVector& p);

struct BcOptions {
    double eps = 1e-12;      // clamp floor before renormalization
    bool detach_p = true;    // treat p as a constant target
    Reduction reduction = Reduction::mean;
    bool with_grad = true;
};

struct BcResult {
    double value = 0.0;               // reduced loss; NaN under Reduction::none
    std::vector<double> per_row;      // -log BC per row, each >= 0
    std::vector<double> bc_per_row;   // BC per row after clamp+renorm
    Matrix grad_q_logits;             // empty unless with_grad
    Matrix grad_p_logits;             // empty unless with_grad && !detach_p
};

// Alignment loss -log sum_k sqrt(q_k p_k) per row.  Rows are clamped to
// eps and renormalized, then the coefficient is evaluated as
// logsumexp(0.5 (log q + log p)).  Gradients are w.r.t. the logits that
// produced each distribution (rows of q and p are softmax outputs):
//   d/dz_k = 0.5 (q_k - s_k / BC),  s_k = sqrt(q_k p_k).
BcResult bc_surrogate(const BatchProbs& q, const BatchProbs& p, const BcOptions& opt = {});

// KL(q || p) under the same clamp+renormalize convention as bc_surrogate.
double kl_divergence(const ProbVector& q, const ProbVector& p, double eps = 1e-12);

struct ChainReport {
    double kl = 0.0;
    double neg2_log_bc = 0.0;
    double two_one_minus_bc = 0.0;
    bool holds = false;  // kl >= -2 log BC >= 2 (1 - BC), within tol
};

// Evaluates the sandwich kl >= -2 log BC >= 2(1 - BC) for one pair.
ChainReport inequality_chain(const ProbVector& q, const ProbVector& p, double tol = 1e-12);

}  // namespace sll
