#pragma once

#include <cstdint>
#include <vector>

#include "sll/matrix.hpp"
#include "sll/rng.hpp"

namespace sll {

// A finite latent chain h_0 -> h_1 -> ... -> h_L with an observed input state
// h_0 and label y.  Two Markov kernels run over the same chain: q (the
// inference path) and p (the generative path), plus per-level label
// likelihoods p(y | h_i).  Small enough to enumerate exactly.
struct DiscreteHierarchy {
    std::vector<std::size_t> state_sizes;  // n_0 .. n_L
    std::size_t n_labels = 0;
    std::vector<Matrix> p_trans;     // i-th entry: n_{i-1} x n_i, rows sum to 1
    std::vector<Matrix> q_trans;     // same shapes as p_trans
    std::vector<Matrix> likelihood;  // i-th entry: n_{i+? } see depth(); rows p(y | h_{i+1} = s)
    std::size_t input_state = 0;
    std::size_t label = 0;

    std::size_t depth() const { return p_trans.size(); }  // L
};

// Throws unless all tables are present, correctly shaped, row-stochastic
// within 1e-9, and the observed indices are in range.
void validate_hierarchy(const DiscreteHierarchy& h);

// Objective of the whole chain, computed by brute-force enumeration of every
// joint assignment (s_1..s_L):
//   E_q[ log p(y|h_L) ] - sum_i E_q[ KL(q(h_i|h_{i-1}) || p(h_i|h_{i-1})) ]
// evaluated as one expectation over the joint q.  -inf when q places mass
// where p (or the final likelihood) has none.
struct GlobalElboResult {
    double value = 0.0;
    bool has_infinite_penalty = false;  // q-mass on a p-zero (KL blows up)
};
GlobalElboResult global_elbo(const DiscreteHierarchy& h);

// Per-level decomposition via forward marginals mu_i = q(h_i | h_0):
//   A_i = E_{mu_i}[ log p(y|h_i) ],   K_i = E_{mu_{i-1}}[ KL(q_i || p_i) ],
//   per_layer_i = A_i - K_i,          full = A_L - sum_i K_i.
struct LayerElbos {
    std::vector<double> a;          // A_1 .. A_L
    std::vector<double> k;          // K_1 .. K_L, each >= 0
    std::vector<double> per_layer;  // A_i - K_i
    double full = 0.0;              // A_L - sum K_i
    bool has_infinite_penalty = false;
};
LayerElbos layer_elbos(const DiscreteHierarchy& h);

struct AssumptionReport {
    bool final_dominates = false;   // A_i <= A_L for every i < L
    bool slack_covers_kl = false;   // (L-1)/L sum K_i <= (1/L) sum (A_L - A_i)
    double final_margin = 0.0;      // min_i (A_L - A_i); negative when violated
    double slack_margin = 0.0;      // rhs - lhs of the second condition
};
AssumptionReport check_assumptions(const DiscreteHierarchy& h);

struct TheoremReport {
    double mean_layer_elbo = 0.0;  // (1/L) sum_i (A_i - K_i)
    double full_elbo = 0.0;        // A_L - sum K_i
    bool bound_holds = false;      // mean_layer_elbo <= full_elbo (+tol)
    // | (mean - full) - ( -(1/L) sum (A_L - A_i) + (L-1)/L sum K_i ) |;
    // an algebraic identity, so this must vanish for every hierarchy.
    double decomposition_residual = 0.0;
    AssumptionReport assumptions;
    bool has_infinite_penalty = false;
};
TheoremReport verify_layerwise_bound(const DiscreteHierarchy& h, double tol = 1e-12);

// Random hierarchy: p rows are Dirichlet(1); q rows are mixtures
// (1-lambda) p + lambda Dirichlet(1) with a per-hierarchy lambda, so KL mass
// varies from zero to substantial.  Likelihood rows are Dirichlet(1).
DiscreteHierarchy random_hierarchy(SeededRng& rng, std::size_t depth, std::size_t max_states,
                                   std::size_t n_labels);

// Dirichlet(alpha, ..., alpha) sample of dimension k.
std::vector<double> dirichlet_row(SeededRng& rng, std::size_t k, double alpha = 1.0);

}  // namespace sll
