#pragma once

#include <span>
#include <vector>

#include "sll/matrix.hpp"
#include "sll/rng.hpp"

namespace sll {

// Probability vector: entries >= 0, summing to 1 within 1e-9.
class ProbVector {
public:
    // Validates and renormalizes a nonnegative vector with positive mass.
    static ProbVector normalized(std::vector<double> raw);
    // Accepts a vector that already satisfies the invariant.
    static ProbVector checked(std::vector<double> p);

    const std::vector<double>& values() const { return p_; }
    std::size_t size() const { return p_.size(); }
    double operator[](std::size_t i) const { return p_[i]; }

private:
    explicit ProbVector(std::vector<double> p) : p_(std::move(p)) {}
    std::vector<double> p_;
};

// Batch of probability rows (rows sum to 1 within 1e-9, entries >= 0).
class BatchProbs {
public:
    static BatchProbs from_logits(const Matrix& logits);  // row-wise softmax
    static BatchProbs checked(Matrix probs);

    const Matrix& matrix() const { return m_; }
    std::size_t batch() const { return m_.rows; }
    std::size_t classes() const { return m_.cols; }
    std::span<const double> row(std::size_t i) const { return m_.row(i); }

private:
    explicit BatchProbs(Matrix m) : m_(std::move(m)) {}
    Matrix m_;
};

// Shift-by-max softmax; exact on ties, stable for large magnitudes.
ProbVector softmax(std::span<const double> logits);
Matrix softmax_rows(const Matrix& logits);

// log(sum_i exp(x_i)) with the max factored out; exact for a single element.
double log_sum_exp(std::span<const double> x);

// i.i.d. N(0,1) entries drawn from `rng`.
Matrix gaussian_matrix(std::size_t rows, std::size_t cols, SeededRng& rng);

}  // namespace sll
