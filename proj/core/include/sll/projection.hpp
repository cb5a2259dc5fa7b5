#pragma once

#include <cstdint>

#include "sll/matrix.hpp"
#include "sll/rng.hpp"

namespace sll {

// Fixed random projection head: a frozen N(0,1) matrix applied with scale
// 1/sqrt(out_dim).  The matrix is fully determined by (seed, in_dim, out_dim)
// and can be regenerated at any time.
struct ProjectionHead {
    Matrix weights;  // out_dim x in_dim
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    double scale = 0.0;      // 1 / sqrt(out_dim)
    double keep_prob = 1.0;  // dropout keep probability on the weights
    std::uint64_t seed = 0;
};

ProjectionHead make_projection_head(std::size_t in_dim, std::size_t out_dim, double keep_prob,
                                    std::uint64_t seed);

// Bernoulli(keep_prob) 0/1 mask over the head's weights, one draw per entry.
Matrix sample_projection_mask(const ProjectionHead& head, SeededRng& rng);

// v = scale * x (M . R)^T, with inverted-dropout scaling 1/keep_prob when a
// mask is supplied (training); v = scale * x R^T without one (inference).
Matrix project(const ProjectionHead& head, const Matrix& x, const Matrix* mask = nullptr);

// Pullback of a gradient through the same (masked) linear map.
Matrix project_backward(const ProjectionHead& head, const Matrix& grad_v,
                        const Matrix* mask = nullptr);

struct DistortionReport {
    double median_eps = 0.0;
    double max_eps = 0.0;
    std::vector<double> per_trial;  // worst pairwise distortion per trial
};

// Draws `trials` fresh heads and measures the worst pairwise squared-distance
// distortion |  ||v_a - v_b||^2 / ||h_a - h_b||^2 - 1 | over the point set.
DistortionReport jl_distortion_probe(const Matrix& points, std::size_t out_dim,
                                     std::size_t trials, SeededRng& rng);

}  // namespace sll
