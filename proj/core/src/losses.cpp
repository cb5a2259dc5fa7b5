#include "sll/losses.hpp"

#include <cmath>
#include <limits>

#include "sll/error.hpp"

namespace sll {

namespace {

double reduce(Reduction reduction, const std::vector<double>& per_row) {
    double sum = 0.0;
    for (double x : per_row) sum += x;
    switch (reduction) {
        case Reduction::mean: return sum / static_cast<double>(per_row.size());
        case Reduction::sum: return sum;
        case Reduction::none: return std::numeric_limits<double>::quiet_NaN();
    }
    throw InvalidInputError("unknown reduction");
}

// Clamp to eps and renormalize one probability row.
void clamp_renorm(std::span<const double> in, double eps, std::vector<double>& out) {
    out.resize(in.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < in.size(); ++k) {
        out[k] = in[k] < eps ? eps : in[k];
        sum += out[k];
    }
    for (double& x : out) x /= sum;
}

}  // namespace

LossResult cross_entropy(const Matrix& logits, std::span<const int> labels, Reduction reduction,
                         bool with_grad) {
    if (logits.rows == 0 || logits.cols == 0)
        throw InvalidInputError("cross_entropy: empty logits " + shape_string(logits));
    if (labels.size() != logits.rows)
        throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels vs logits " +
                         shape_string(logits));
    if (!all_finite(logits)) throw InvalidInputError("cross_entropy: non-finite logit");

    LossResult res;
    res.per_row.resize(logits.rows);
    if (with_grad) res.grad = Matrix(logits.rows, logits.cols);

    const double row_scale =
        reduction == Reduction::mean ? 1.0 / static_cast<double>(logits.rows) : 1.0;
    for (std::size_t i = 0; i < logits.rows; ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= logits.cols)
            throw InvalidInputError("cross_entropy: label " + std::to_string(y) +
                                    " out of range for " + std::to_string(logits.cols) +
                                    " classes");
        const auto row = logits.row(i);
        const double lse = log_sum_exp(row);
        res.per_row[i] = lse - row[static_cast<std::size_t>(y)];
        if (with_grad) {
            double* g = res.grad.data.data() + i * logits.cols;
            for (std::size_t k = 0; k < logits.cols; ++k)
                g[k] = std::exp(row[k] - lse) * row_scale;
            g[static_cast<std::size_t>(y)] -= row_scale;
        }
    }
    res.value = reduce(reduction, res.per_row);
    return res;
}

double bhattacharyya_coefficient(const ProbVector& q, const ProbVector& p) {
    if (q.size() != p.size())
        throw ShapeError("bhattacharyya_coefficient: sizes " + std::to_string(q.size()) + " vs " +
                         std::to_string(p.size()));
    double bc = 0.0;
    for (std::size_t k = 0; k < q.size(); ++k) bc += std::sqrt(q[k] * p[k]);
    return bc;
}

BcResult bc_surrogate(const BatchProbs& q, const BatchProbs& p, const BcOptions& opt) {
    if (q.batch() != p.batch() || q.classes() != p.classes())
        throw ShapeError("bc_surrogate: shape mismatch " + shape_string(q.matrix()) + " vs " +
                         shape_string(p.matrix()));
    if (!(opt.eps > 0.0)) throw InvalidInputError("bc_surrogate: eps must be positive");

    const std::size_t b = q.batch();
    const std::size_t k = q.classes();
    BcResult res;
    res.per_row.resize(b);
    res.bc_per_row.resize(b);
    if (opt.with_grad) {
        res.grad_q_logits = Matrix(b, k);
        if (!opt.detach_p) res.grad_p_logits = Matrix(b, k);
    }
    const double row_scale = opt.reduction == Reduction::mean ? 1.0 / static_cast<double>(b) : 1.0;

    std::vector<double> qh, ph, s(k), halves(k);
    for (std::size_t i = 0; i < b; ++i) {
        clamp_renorm(q.row(i), opt.eps, qh);
        clamp_renorm(p.row(i), opt.eps, ph);
        for (std::size_t j = 0; j < k; ++j)
            halves[j] = 0.5 * (std::log(qh[j]) + std::log(ph[j]));
        const double log_bc = log_sum_exp(halves);
        res.per_row[i] = -log_bc;
        const double bc = std::exp(log_bc);
        res.bc_per_row[i] = bc;
        if (opt.with_grad) {
            for (std::size_t j = 0; j < k; ++j) s[j] = std::sqrt(qh[j] * ph[j]);
            double* gq = res.grad_q_logits.data.data() + i * k;
            for (std::size_t j = 0; j < k; ++j)
                gq[j] = 0.5 * (qh[j] - s[j] / bc) * row_scale;
            if (!opt.detach_p) {
                double* gp = res.grad_p_logits.data.data() + i * k;
                for (std::size_t j = 0; j < k; ++j)
                    gp[j] = 0.5 * (ph[j] - s[j] / bc) * row_scale;
            }
        }
    }
    res.value = reduce(opt.reduction, res.per_row);
    return res;
}

double kl_divergence(const ProbVector& q, const ProbVector& p, double eps) {
    if (q.size() != p.size())
        throw ShapeError("kl_divergence: sizes " + std::to_string(q.size()) + " vs " +
                         std::to_string(p.size()));
    if (!(eps > 0.0)) throw InvalidInputError("kl_divergence: eps must be positive");
    std::vector<double> qh, ph;
    clamp_renorm(std::span<const double>(q.values()), eps, qh);
    clamp_renorm(std::span<const double>(p.values()), eps, ph);
    double kl = 0.0;
    for (std::size_t i = 0; i < qh.size(); ++i) kl += qh[i] * (std::log(qh[i]) - std::log(ph[i]));
    return kl;
}

ChainReport inequality_chain(const ProbVector& q, const ProbVector& p, double tol) {
    ChainReport rep;
    rep.kl = kl_divergence(q, p);
    // Evaluate BC on the same clamp+renorm convention as the KL.
    std::vector<double> qh, ph;
    clamp_renorm(std::span<const double>(q.values()), 1e-12, qh);
    clamp_renorm(std::span<const double>(p.values()), 1e-12, ph);
    double bc = 0.0;
    std::vector<double> halves(qh.size());
    for (std::size_t i = 0; i < qh.size(); ++i)
        halves[i] = 0.5 * (std::log(qh[i]) + std::log(ph[i]));
    const double log_bc = log_sum_exp(halves);
    bc = std::exp(log_bc);
    rep.neg2_log_bc = -2.0 * log_bc;
    rep.two_one_minus_bc = 2.0 * (1.0 - bc);
    rep.holds = rep.kl + tol >= rep.neg2_log_bc && rep.neg2_log_bc + tol >= rep.two_one_minus_bc;
    return rep;
}

}  // namespace sll
