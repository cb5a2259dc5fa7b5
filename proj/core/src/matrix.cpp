#include "sll/matrix.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>

#include "sll/error.hpp"

namespace sll {

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows_init) {
    Matrix m;
    m.rows = rows_init.size();
    m.cols = rows_init.size() ? rows_init.begin()->size() : 0;
    m.data.reserve(m.rows * m.cols);
    for (const auto& r : rows_init) {
        if (r.size() != m.cols)
            throw ShapeError("from_rows: ragged initializer (row of " + std::to_string(r.size()) +
                             " in a " + std::to_string(m.rows) + "x" + std::to_string(m.cols) +
                             " matrix)");
        m.data.insert(m.data.end(), r.begin(), r.end());
    }
    return m;
}

std::string shape_string(const Matrix& m) {
    return "[" + std::to_string(m.rows) + "x" + std::to_string(m.cols) + "]";
}

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows != b.rows || a.cols != b.cols)
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                         shape_string(b));
}

Matrix matmul(const Matrix& a, const Matrix& b, bool trans_a, bool trans_b) {
    const std::size_t m = trans_a ? a.cols : a.rows;
    const std::size_t k = trans_a ? a.rows : a.cols;
    const std::size_t kb = trans_b ? b.cols : b.rows;
    const std::size_t n = trans_b ? b.rows : b.cols;
    if (k != kb)
        throw ShapeError("matmul: inner dimensions disagree " + shape_string(a) +
                         (trans_a ? "^T" : "") + " vs " + shape_string(b) +
                         (trans_b ? "^T" : ""));
    Matrix c(m, n);
    if (m == 0 || n == 0 || k == 0) return c;
    cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(m), static_cast<int>(n),
                static_cast<int>(k), 1.0, a.data.data(), static_cast<int>(a.cols), b.data.data(),
                static_cast<int>(b.cols), 0.0, c.data.data(), static_cast<int>(c.cols));
    return c;
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols, m.rows);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
    return t;
}

Matrix add(const Matrix& a, const Matrix& b) {
    check_same_shape(a, b, "add");
    Matrix c = a;
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] += b.data[i];
    return c;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    check_same_shape(a, b, "sub");
    Matrix c = a;
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] -= b.data[i];
    return c;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    check_same_shape(a, b, "hadamard");
    Matrix c = a;
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] *= b.data[i];
    return c;
}

Matrix scale(const Matrix& a, double s) {
    Matrix c = a;
    for (double& x : c.data) x *= s;
    return c;
}

void add_inplace(Matrix& a, const Matrix& b) {
    check_same_shape(a, b, "add_inplace");
    for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

void axpy_inplace(Matrix& a, const Matrix& b, double alpha) {
    check_same_shape(a, b, "axpy_inplace");
    for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += alpha * b.data[i];
}

void add_row_vector_inplace(Matrix& m, std::span<const double> v) {
    if (v.size() != m.cols)
        throw ShapeError("add_row_vector_inplace: vector of " + std::to_string(v.size()) +
                         " vs matrix " + shape_string(m));
    for (std::size_t i = 0; i < m.rows; ++i) {
        double* r = m.data.data() + i * m.cols;
        for (std::size_t j = 0; j < m.cols; ++j) r[j] += v[j];
    }
}

std::vector<double> column_sums(const Matrix& m) {
    std::vector<double> s(m.cols, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* r = m.data.data() + i * m.cols;
        for (std::size_t j = 0; j < m.cols; ++j) s[j] += r[j];
    }
    return s;
}

Matrix relu(const Matrix& m) {
    Matrix c = m;
    for (double& x : c.data) x = x > 0.0 ? x : 0.0;
    return c;
}

Matrix relu_mask(const Matrix& pre) {
    Matrix c(pre.rows, pre.cols);
    for (std::size_t i = 0; i < pre.data.size(); ++i) c.data[i] = pre.data[i] > 0.0 ? 1.0 : 0.0;
    return c;
}

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

bool all_finite(const Matrix& m) { return all_finite(std::span<const double>(m.data)); }

double max_abs_diff(const Matrix& a, const Matrix& b) {
    check_same_shape(a, b, "max_abs_diff");
    double d = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        d = std::max(d, std::abs(a.data[i] - b.data[i]));
    return d;
}

}  // namespace sll
