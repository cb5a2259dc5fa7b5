#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace sll {

// Dense row-major matrix of doubles.  Value semantics; shape checks throw
// ShapeError with both shapes spelled out.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows_init);

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

    std::size_t size() const { return rows * cols; }
    bool empty() const { return data.empty(); }
    std::size_t bytes() const { return data.size() * sizeof(double); }

    void release() {
        rows = cols = 0;
        data.clear();
        data.shrink_to_fit();
    }
};

std::string shape_string(const Matrix& m);
void check_same_shape(const Matrix& a, const Matrix& b, const char* op);

// c = op(a) * op(b) via BLAS dgemm.
Matrix matmul(const Matrix& a, const Matrix& b, bool trans_a = false, bool trans_b = false);

Matrix transpose(const Matrix& m);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
void add_inplace(Matrix& a, const Matrix& b);
void axpy_inplace(Matrix& a, const Matrix& b, double alpha);  // a += alpha * b

// Broadcast ops over rows.
void add_row_vector_inplace(Matrix& m, std::span<const double> v);
std::vector<double> column_sums(const Matrix& m);

Matrix relu(const Matrix& m);
// 1 where the pre-activation was > 0, else 0.
Matrix relu_mask(const Matrix& pre);

bool all_finite(const Matrix& m);
bool all_finite(std::span<const double> v);

double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace sll
