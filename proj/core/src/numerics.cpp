#include "sll/numerics.hpp"

#include <algorithm>
#include <cmath>

#include "sll/error.hpp"

namespace sll {

namespace {
constexpr double kProbSumTol = 1e-9;
}

ProbVector ProbVector::normalized(std::vector<double> raw) {
    if (raw.empty()) throw InvalidInputError("ProbVector: empty vector");
    if (!all_finite(std::span<const double>(raw)))
        throw InvalidInputError("ProbVector: non-finite entry");
    double sum = 0.0;
    for (double x : raw) {
        if (x < 0.0) throw InvalidInputError("ProbVector: negative entry");
        sum += x;
    }
    if (sum <= 0.0) throw InvalidInputError("ProbVector: zero total mass");
    for (double& x : raw) x /= sum;
    return ProbVector(std::move(raw));
}

ProbVector ProbVector::checked(std::vector<double> p) {
    if (p.empty()) throw InvalidInputError("ProbVector: empty vector");
    if (!all_finite(std::span<const double>(p)))
        throw InvalidInputError("ProbVector: non-finite entry");
    double sum = 0.0;
    for (double x : p) {
        if (x < 0.0) throw InvalidInputError("ProbVector: negative entry");
        sum += x;
    }
    if (std::abs(sum - 1.0) > kProbSumTol)
        throw InvalidInputError("ProbVector: entries sum to " + std::to_string(sum) +
                                ", expected 1 within 1e-9");
    return ProbVector(std::move(p));
}

BatchProbs BatchProbs::from_logits(const Matrix& logits) {
    return BatchProbs(softmax_rows(logits));
}

BatchProbs BatchProbs::checked(Matrix probs) {
    if (probs.rows == 0 || probs.cols == 0)
        throw InvalidInputError("BatchProbs: empty matrix " + shape_string(probs));
    for (std::size_t i = 0; i < probs.rows; ++i)
        ProbVector::checked(std::vector<double>(probs.row(i).begin(), probs.row(i).end()));
    return BatchProbs(std::move(probs));
}

ProbVector softmax(std::span<const double> logits) {
    if (logits.empty()) throw InvalidInputError("softmax: empty input");
    if (!all_finite(logits)) throw InvalidInputError("softmax: non-finite logit");
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        sum += out[i];
    }
    for (double& x : out) x /= sum;
    return ProbVector::checked(std::move(out));
}

Matrix softmax_rows(const Matrix& logits) {
    if (logits.rows == 0 || logits.cols == 0)
        throw InvalidInputError("softmax_rows: empty input " + shape_string(logits));
    if (!all_finite(logits)) throw InvalidInputError("softmax_rows: non-finite logit");
    Matrix out(logits.rows, logits.cols);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        const double* in = logits.data.data() + i * logits.cols;
        double* o = out.data.data() + i * out.cols;
        const double m = *std::max_element(in, in + logits.cols);
        double sum = 0.0;
        for (std::size_t j = 0; j < logits.cols; ++j) {
            o[j] = std::exp(in[j] - m);
            sum += o[j];
        }
        for (std::size_t j = 0; j < logits.cols; ++j) o[j] /= sum;
    }
    return out;
}

double log_sum_exp(std::span<const double> x) {
    if (x.empty()) throw InvalidInputError("log_sum_exp: empty input");
    const double m = *std::max_element(x.begin(), x.end());
    if (std::isinf(m) && m < 0.0) return m;  // all -inf
    double sum = 0.0;
    for (double v : x) sum += std::exp(v - m);
    return m + std::log(sum);
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, SeededRng& rng) {
    if (rows == 0 || cols == 0)
        throw InvalidInputError("gaussian_matrix: dimensions must be positive");
    Matrix m(rows, cols);
    for (double& x : m.data) x = rng.normal();
    return m;
}

}  // namespace sll
