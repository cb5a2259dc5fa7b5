#include "sll/theory.hpp"

#include <cmath>
#include <limits>

#include "sll/error.hpp"

namespace sll {

namespace {

constexpr double kRowSumTol = 1e-9;
const double kInf = std::numeric_limits<double>::infinity();

void check_stochastic(const Matrix& m, const char* what, std::size_t level) {
    for (std::size_t i = 0; i < m.rows; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) {
            const double v = m(i, j);
            if (!(v >= 0.0) || !std::isfinite(v))
                throw InvalidInputError(std::string(what) + "[" + std::to_string(level) +
                                        "]: negative or non-finite entry in row " +
                                        std::to_string(i));
            sum += v;
        }
        if (std::abs(sum - 1.0) > kRowSumTol)
            throw InvalidInputError(std::string(what) + "[" + std::to_string(level) + "] row " +
                                    std::to_string(i) + " sums to " + std::to_string(sum));
    }
}

// KL(q_row || p_row) with exact zero handling: 0 log 0 = 0; q>0, p=0 => inf.
double kl_row(std::span<const double> q, std::span<const double> p) {
    double kl = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (q[i] == 0.0) continue;
        if (p[i] == 0.0) return kInf;
        kl += q[i] * (std::log(q[i]) - std::log(p[i]));
    }
    return kl < 0.0 && kl > -1e-12 ? 0.0 : kl;  // clip tiny negative rounding
}

}  // namespace

void validate_hierarchy(const DiscreteHierarchy& h) {
    const std::size_t depth = h.depth();
    if (depth == 0) throw InvalidInputError("hierarchy: depth must be >= 1");
    if (h.state_sizes.size() != depth + 1)
        throw InvalidInputError("hierarchy: " + std::to_string(h.state_sizes.size()) +
                                " state sizes for depth " + std::to_string(depth));
    if (h.q_trans.size() != depth || h.likelihood.size() != depth)
        throw InvalidInputError("hierarchy: table counts disagree with depth");
    if (h.n_labels == 0) throw InvalidInputError("hierarchy: no labels");
    if (h.input_state >= h.state_sizes[0])
        throw InvalidInputError("hierarchy: input state out of range");
    if (h.label >= h.n_labels) throw InvalidInputError("hierarchy: label out of range");
    for (std::size_t i = 0; i < depth; ++i) {
        const std::size_t from = h.state_sizes[i], to = h.state_sizes[i + 1];
        if (from == 0 || to == 0) throw InvalidInputError("hierarchy: empty state space");
        if (h.p_trans[i].rows != from || h.p_trans[i].cols != to)
            throw ShapeError("hierarchy: p_trans[" + std::to_string(i) + "] is " +
                             shape_string(h.p_trans[i]) + ", expected [" + std::to_string(from) +
                             "x" + std::to_string(to) + "]");
        check_same_shape(h.p_trans[i], h.q_trans[i], "hierarchy q_trans");
        if (h.likelihood[i].rows != to || h.likelihood[i].cols != h.n_labels)
            throw ShapeError("hierarchy: likelihood[" + std::to_string(i) + "] is " +
                             shape_string(h.likelihood[i]) + ", expected [" + std::to_string(to) +
                             "x" + std::to_string(h.n_labels) + "]");
        check_stochastic(h.p_trans[i], "p_trans", i);
        check_stochastic(h.q_trans[i], "q_trans", i);
        check_stochastic(h.likelihood[i], "likelihood", i);
    }
}

GlobalElboResult global_elbo(const DiscreteHierarchy& h) {
    validate_hierarchy(h);
    const std::size_t depth = h.depth();
    GlobalElboResult res;
    // Odometer over all joint assignments (s_1 .. s_L) of the latent chain.
    std::vector<std::size_t> s(depth, 0);
    double acc = 0.0;
    bool hit_inf = false;
    while (true) {
        double q_joint = 1.0;
        double term = 0.0;
        std::size_t prev = h.input_state;
        bool dead = false;
        for (std::size_t i = 0; i < depth && !dead; ++i) {
            const double q = h.q_trans[i](prev, s[i]);
            if (q == 0.0) {
                dead = true;  // no q-mass: contributes nothing
                break;
            }
            const double p = h.p_trans[i](prev, s[i]);
            q_joint *= q;
            term += std::log(p) - std::log(q);  // log p - log q; p == 0 -> -inf
            prev = s[i];
        }
        if (!dead) {
            term += std::log(h.likelihood[depth - 1](prev, h.label));
            if (std::isinf(term)) {
                hit_inf = true;
            } else {
                acc += q_joint * term;
            }
        }
        // advance odometer
        std::size_t d = 0;
        while (d < depth) {
            if (++s[d] < h.state_sizes[d + 1]) break;
            s[d] = 0;
            ++d;
        }
        if (d == depth) break;
    }
    res.has_infinite_penalty = hit_inf;
    res.value = hit_inf ? -kInf : acc;
    return res;
}

LayerElbos layer_elbos(const DiscreteHierarchy& h) {
    validate_hierarchy(h);
    const std::size_t depth = h.depth();
    LayerElbos res;
    res.a.resize(depth);
    res.k.resize(depth);
    res.per_layer.resize(depth);

    std::vector<double> mu(h.state_sizes[0], 0.0);
    mu[h.input_state] = 1.0;
    for (std::size_t i = 0; i < depth; ++i) {
        const Matrix& q = h.q_trans[i];
        // K_i under the incoming marginal.
        double k = 0.0;
        for (std::size_t sprev = 0; sprev < q.rows; ++sprev) {
            if (mu[sprev] == 0.0) continue;
            k += mu[sprev] * kl_row(q.row(sprev), h.p_trans[i].row(sprev));
        }
        res.k[i] = k;
        if (std::isinf(k)) res.has_infinite_penalty = true;
        // Push the marginal one level.
        std::vector<double> nxt(q.cols, 0.0);
        for (std::size_t sprev = 0; sprev < q.rows; ++sprev) {
            if (mu[sprev] == 0.0) continue;
            for (std::size_t snext = 0; snext < q.cols; ++snext)
                nxt[snext] += mu[sprev] * q(sprev, snext);
        }
        mu = std::move(nxt);
        double a = 0.0;
        for (std::size_t st = 0; st < mu.size(); ++st) {
            if (mu[st] == 0.0) continue;
            a += mu[st] * std::log(h.likelihood[i](st, h.label));
        }
        res.a[i] = a;
        res.per_layer[i] = a - k;
    }
    double k_sum = 0.0;
    for (double k : res.k) k_sum += k;
    res.full = res.a.back() - k_sum;
    return res;
}

AssumptionReport check_assumptions(const DiscreteHierarchy& h) {
    const LayerElbos le = layer_elbos(h);
    const std::size_t depth = le.a.size();
    AssumptionReport rep;
    const double a_final = le.a.back();
    double min_gap = kInf;
    double gap_sum = 0.0, k_sum = 0.0;
    for (std::size_t i = 0; i < depth; ++i) {
        const double gap = a_final - le.a[i];
        gap_sum += gap;
        k_sum += le.k[i];
        if (i + 1 < depth) min_gap = std::min(min_gap, gap);
    }
    const double inv_l = 1.0 / static_cast<double>(depth);
    rep.final_margin = depth == 1 ? 0.0 : min_gap;
    rep.final_dominates = rep.final_margin >= -1e-12;
    rep.slack_margin = inv_l * gap_sum - (1.0 - inv_l) * k_sum;
    rep.slack_covers_kl = rep.slack_margin >= -1e-12;
    return rep;
}

TheoremReport verify_layerwise_bound(const DiscreteHierarchy& h, double tol) {
    const LayerElbos le = layer_elbos(h);
    const std::size_t depth = le.a.size();
    TheoremReport rep;
    rep.has_infinite_penalty = le.has_infinite_penalty;
    rep.assumptions = check_assumptions(h);

    double mean = 0.0, gap_sum = 0.0, k_sum = 0.0;
    const double a_final = le.a.back();
    for (std::size_t i = 0; i < depth; ++i) {
        mean += le.per_layer[i];
        gap_sum += a_final - le.a[i];
        k_sum += le.k[i];
    }
    const double inv_l = 1.0 / static_cast<double>(depth);
    mean *= inv_l;
    rep.mean_layer_elbo = mean;
    rep.full_elbo = le.full;
    rep.bound_holds = mean <= le.full + tol;
    const double lhs = mean - le.full;
    const double rhs = -inv_l * gap_sum + (1.0 - inv_l) * k_sum;
    if (std::isfinite(lhs) && std::isfinite(rhs))
        rep.decomposition_residual = std::abs(lhs - rhs);
    else
        rep.decomposition_residual = (lhs == rhs) ? 0.0 : std::numeric_limits<double>::quiet_NaN();
    return rep;
}

std::vector<double> dirichlet_row(SeededRng& rng, std::size_t k, double alpha) {
    if (k == 0) throw InvalidInputError("dirichlet_row: empty row");
    if (!(alpha > 0.0)) throw InvalidInputError("dirichlet_row: alpha must be positive");
    // Gamma(alpha) draws, normalized.  Marsaglia-Tsang for alpha >= 1,
    // boosted by U^(1/alpha) below 1.
    auto gamma_draw = [&rng](double a) {
        double boost = 1.0;
        if (a < 1.0) {
            double u;
            do {
                u = rng.uniform01();
            } while (u == 0.0);
            boost = std::pow(u, 1.0 / a);
            a += 1.0;
        }
        const double d = a - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        while (true) {
            double x, v;
            do {
                x = rng.normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = rng.uniform01();
            if (u < 1.0 - 0.0331 * x * x * x * x) return boost * d * v;
            if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
                return boost * d * v;
        }
    };
    std::vector<double> row(k);
    double sum = 0.0;
    for (double& x : row) {
        x = gamma_draw(alpha);
        sum += x;
    }
    if (sum <= 0.0) {  // astronomically unlikely; keep the row valid anyway
        row.assign(k, 1.0 / static_cast<double>(k));
        return row;
    }
    for (double& x : row) x /= sum;
    return row;
}

DiscreteHierarchy random_hierarchy(SeededRng& rng, std::size_t depth, std::size_t max_states,
                                   std::size_t n_labels) {
    if (depth == 0 || max_states < 2 || n_labels < 2)
        throw InvalidInputError("random_hierarchy: need depth >= 1, states >= 2, labels >= 2");
    DiscreteHierarchy h;
    h.n_labels = n_labels;
    h.state_sizes.resize(depth + 1);
    for (auto& n : h.state_sizes) n = 2 + rng.below(max_states - 1);
    h.input_state = rng.below(h.state_sizes[0]);
    h.label = rng.below(n_labels);

    // 'aligned' mode sharpens likelihoods toward the label as levels rise and
    // keeps q near p, so a healthy fraction of draws satisfies both
    // assumptions; the generic mode exercises everything else.
    const bool aligned = rng.bernoulli(0.5);
    const double lambda = aligned ? 0.1 * rng.uniform01() : rng.uniform01() * rng.uniform01();

    auto fill = [&](Matrix& m, std::size_t rows, std::size_t cols) {
        m = Matrix(rows, cols);
        for (std::size_t i = 0; i < rows; ++i) {
            const auto row = dirichlet_row(rng, cols);
            for (std::size_t j = 0; j < cols; ++j) m(i, j) = row[j];
        }
    };

    h.p_trans.resize(depth);
    h.q_trans.resize(depth);
    h.likelihood.resize(depth);
    for (std::size_t i = 0; i < depth; ++i) {
        const std::size_t from = h.state_sizes[i], to = h.state_sizes[i + 1];
        fill(h.p_trans[i], from, to);
        fill(h.q_trans[i], from, to);
        for (std::size_t r = 0; r < from; ++r)
            for (std::size_t c = 0; c < to; ++c)
                h.q_trans[i](r, c) =
                    (1.0 - lambda) * h.p_trans[i](r, c) + lambda * h.q_trans[i](r, c);
        fill(h.likelihood[i], to, n_labels);
        if (aligned) {
            // Mix each row toward the observed label, harder at later levels.
            const double w = 0.6 * static_cast<double>(i + 1) / static_cast<double>(depth);
            for (std::size_t r = 0; r < to; ++r) {
                for (std::size_t c = 0; c < n_labels; ++c)
                    h.likelihood[i](r, c) *= (1.0 - w);
                h.likelihood[i](r, h.label) += w;
            }
        }
    }
    return h;
}

}  // namespace sll
