#include "sll/projection.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "sll/error.hpp"
#include "sll/numerics.hpp"

namespace sll {

ProjectionHead make_projection_head(std::size_t in_dim, std::size_t out_dim, double keep_prob,
                                    std::uint64_t seed) {
    if (in_dim == 0 || out_dim == 0)
        throw InvalidInputError("make_projection_head: dimensions must be positive");
    if (!(keep_prob > 0.0 && keep_prob <= 1.0))
        throw InvalidInputError("make_projection_head: keep_prob must lie in (0, 1]");
    if (in_dim < out_dim)
        std::cerr << "[sll] warning: projection head expands " << in_dim << " -> " << out_dim
                  << " dims; distances are not compressed\n";
    ProjectionHead head;
    head.in_dim = in_dim;
    head.out_dim = out_dim;
    head.scale = 1.0 / std::sqrt(static_cast<double>(out_dim));
    head.keep_prob = keep_prob;
    head.seed = seed;
    SeededRng rng(seed);
    head.weights = gaussian_matrix(out_dim, in_dim, rng);
    return head;
}

Matrix sample_projection_mask(const ProjectionHead& head, SeededRng& rng) {
    Matrix mask(head.out_dim, head.in_dim);
    for (double& m : mask.data) m = rng.bernoulli(head.keep_prob) ? 1.0 : 0.0;
    return mask;
}

namespace {
// Effective projection matrix including dropout scaling.
Matrix effective_weights(const ProjectionHead& head, const Matrix* mask) {
    if (!mask) return scale(head.weights, head.scale);
    check_same_shape(head.weights, *mask, "project (mask)");
    Matrix w = hadamard(head.weights, *mask);
    return scale(w, head.scale / head.keep_prob);
}
}  // namespace

Matrix project(const ProjectionHead& head, const Matrix& x, const Matrix* mask) {
    if (x.cols != head.in_dim)
        throw ShapeError("project: input " + shape_string(x) + " vs head expecting " +
                         std::to_string(head.in_dim) + " features");
    const Matrix w = effective_weights(head, mask);
    return matmul(x, w, false, true);  // (B x in)(in x out)
}

Matrix project_backward(const ProjectionHead& head, const Matrix& grad_v, const Matrix* mask) {
    if (grad_v.cols != head.out_dim)
        throw ShapeError("project_backward: gradient " + shape_string(grad_v) + " vs head of " +
                         std::to_string(head.out_dim) + " outputs");
    const Matrix w = effective_weights(head, mask);
    return matmul(grad_v, w);  // (B x out)(out x in)
}

DistortionReport jl_distortion_probe(const Matrix& points, std::size_t out_dim,
                                     std::size_t trials, SeededRng& rng) {
    if (points.rows < 2)
        throw InvalidInputError("jl_distortion_probe: need at least two points");
    if (out_dim == 0 || trials == 0)
        throw InvalidInputError("jl_distortion_probe: out_dim and trials must be positive");

    DistortionReport rep;
    rep.per_trial.reserve(trials);
    const double inv_out = 1.0 / static_cast<double>(out_dim);
    for (std::size_t t = 0; t < trials; ++t) {
        SeededRng head_rng = rng.child(t + 1);
        const Matrix r = gaussian_matrix(out_dim, points.cols, head_rng);
        Matrix v = matmul(points, r, false, true);
        for (double& x : v.data) x *= std::sqrt(inv_out);
        double worst = 0.0;
        for (std::size_t a = 0; a < points.rows; ++a) {
            for (std::size_t b = a + 1; b < points.rows; ++b) {
                double dh = 0.0, dv = 0.0;
                for (std::size_t j = 0; j < points.cols; ++j) {
                    const double d = points(a, j) - points(b, j);
                    dh += d * d;
                }
                for (std::size_t j = 0; j < out_dim; ++j) {
                    const double d = v(a, j) - v(b, j);
                    dv += d * d;
                }
                if (dh == 0.0) continue;  // coincident points carry no distortion signal
                worst = std::max(worst, std::abs(dv / dh - 1.0));
            }
        }
        rep.per_trial.push_back(worst);
    }
    std::vector<double> sorted = rep.per_trial;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    rep.median_eps = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    rep.max_eps = sorted.back();
    return rep;
}

}  // namespace sll
