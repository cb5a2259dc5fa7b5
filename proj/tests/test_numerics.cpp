#include <doctest.h>

#include <cmath>
#include <set>

#include "helpers.hpp"
#include "sll/error.hpp"
#include "sll/numerics.hpp"
#include "sll/rng.hpp"

using namespace sll;

TEST_CASE("softmax of equal logits is exactly uniform") {
    const double zeros[2] = {0.0, 0.0};
    const auto p = softmax(zeros);
    CHECK(p[0] == 0.5);
    CHECK(p[1] == 0.5);

    // Large equal logits must not overflow: the max shift cancels them.
    const double big[2] = {1000.0, 1000.0};
    const auto q = softmax(big);
    CHECK(q[0] == 0.5);
    CHECK(q[1] == 0.5);

    const double huge[3] = {1e308, 1e308, 1e308};
    const auto r = softmax(huge);
    CHECK(r[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("softmax recovers known ratios") {
    // softmax([ln 1, ln 3]) = [1/4, 3/4]
    const double logits[2] = {std::log(1.0), std::log(3.0)};
    const auto p = softmax(logits);
    CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("softmax is shift invariant bitwise") {
    const double base[4] = {0.125, -1.5, 2.25, 0.75};
    double shifted[4];
    for (int i = 0; i < 4; ++i) shifted[i] = base[i] + 3.5;  // exact in binary
    const auto p = softmax(base);
    const auto q = softmax(shifted);
    for (std::size_t i = 0; i < 4; ++i) CHECK(p[i] == q[i]);
}

TEST_CASE("softmax rejects bad input") {
    CHECK_THROWS_AS(softmax(std::span<const double>{}), InvalidInputError);
    const double nan_in[2] = {0.0, std::nan("")};
    CHECK_THROWS_AS(softmax(nan_in), InvalidInputError);
}

TEST_CASE("softmax_rows matches per-row softmax") {
    SeededRng rng(7);
    Matrix logits = gaussian_matrix(5, 7, rng);
    const Matrix probs = softmax_rows(logits);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        const auto ref = softmax(logits.row(i));
        for (std::size_t j = 0; j < logits.cols; ++j) CHECK(probs(i, j) == ref[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < logits.cols; ++j) sum += probs(i, j);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("log_sum_exp of a single element is exact") {
    const double one[1] = {-3.25};
    CHECK(log_sum_exp(one) == -3.25);
    const double big[1] = {1234.5};
    CHECK(log_sum_exp(big) == 1234.5);
}

TEST_CASE("log_sum_exp equals log of the sum") {
    // lse(log 2, log 6) = log 8
    const double x[2] = {std::log(2.0), std::log(6.0)};
    CHECK(log_sum_exp(x) == doctest::Approx(std::log(8.0)).epsilon(1e-14));
    // stable at extreme magnitudes: lse(1000, 1000) = 1000 + log 2
    const double y[2] = {1000.0, 1000.0};
    CHECK(log_sum_exp(y) == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("ProbVector validates its invariant") {
    CHECK_THROWS_AS(ProbVector::checked({0.5, 0.6}), InvalidInputError);
    CHECK_THROWS_AS(ProbVector::checked({-0.1, 1.1}), InvalidInputError);
    CHECK_THROWS_AS(ProbVector::checked({}), InvalidInputError);
    CHECK_THROWS_AS(ProbVector::normalized({0.0, 0.0}), InvalidInputError);
    const auto p = ProbVector::normalized({2.0, 6.0});
    CHECK(p[0] == 0.25);
    CHECK(p[1] == 0.75);
    const auto ok = ProbVector::checked({0.25, 0.75});
    CHECK(ok.size() == 2);
}

TEST_CASE("matmul agrees with a naive triple loop") {
    SeededRng rng(11);
    const Matrix a = gaussian_matrix(4, 6, rng);
    const Matrix b = gaussian_matrix(6, 3, rng);
    const Matrix c = matmul(a, b);
    REQUIRE(c.rows == 4);
    REQUIRE(c.cols == 3);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            double ref = 0.0;
            for (std::size_t k = 0; k < 6; ++k) ref += a(i, k) * b(k, j);
            CHECK(c(i, j) == doctest::Approx(ref).epsilon(1e-13));
        }
}

TEST_CASE("matmul transpose flags match explicit transposition") {
    SeededRng rng(12);
    const Matrix a = gaussian_matrix(5, 3, rng);
    const Matrix b = gaussian_matrix(5, 4, rng);
    const Matrix at_b = matmul(a, b, true, false);
    const Matrix ref = matmul(transpose(a), b);
    CHECK(max_abs_diff(at_b, ref) == 0.0);

    const Matrix c = gaussian_matrix(3, 4, rng);  // b (5x4) times c^T (4x3)
    const Matrix b_ct = matmul(b, c, false, true);
    const Matrix ref2 = matmul(b, transpose(c));
    CHECK(max_abs_diff(b_ct, ref2) == 0.0);
}

TEST_CASE("transpose of a product reverses the factors") {
    const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}, {5, 6}});
    const Matrix b = Matrix::from_rows({{7, 8, 9, 10}, {11, 12, 13, 14}});
    const Matrix lhs = transpose(matmul(a, b));
    const Matrix rhs = matmul(transpose(b), transpose(a));
    CHECK(max_abs_diff(lhs, rhs) == 0.0);  // exact: small integers
}

TEST_CASE("shape errors name both operands") {
    const Matrix a(2, 3), b(4, 5);
    try {
        matmul(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2x3]") != std::string::npos);
        CHECK(msg.find("[4x5]") != std::string::npos);
    }
    CHECK_THROWS_AS(add(a, b), ShapeError);
    CHECK_THROWS_AS(Matrix::from_rows({{1, 2}, {3}}), ShapeError);
}

TEST_CASE("elementwise helpers") {
    const Matrix a = Matrix::from_rows({{1, -2}, {3, -4}});
    const Matrix b = Matrix::from_rows({{10, 20}, {30, 40}});
    CHECK(add(a, b)(1, 1) == 36);
    CHECK(sub(b, a)(0, 1) == 22);
    CHECK(hadamard(a, b)(1, 0) == 90);
    CHECK(scale(a, -2.0)(0, 1) == 4);
    const Matrix r = relu(a);
    CHECK(r(0, 0) == 1);
    CHECK(r(0, 1) == 0);
    const Matrix m = relu_mask(a);
    CHECK(m(1, 0) == 1);
    CHECK(m(1, 1) == 0);
    CHECK(column_sums(b)[0] == 40);
    Matrix c = a;
    add_row_vector_inplace(c, std::vector<double>{100, 200});
    CHECK(c(1, 1) == 196);
}

TEST_CASE("splitmix64 matches the published reference sequence") {
    // Seed 0 vectors appear in the reference implementation's test suite.
    std::uint64_t state = 0;
    CHECK(splitmix64(state) == 0xE220A8397B1DCDAFULL);
    CHECK(splitmix64(state) == 0x6E789E6AA1B965F4ULL);
    CHECK(splitmix64(state) == 0x06C45D188009454FULL);
}

TEST_CASE("rng streams are deterministic and seed-separated") {
    SeededRng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    bool any_diff = false;
    SeededRng a2(42);
    for (int i = 0; i < 100; ++i) any_diff |= a2.next_u64() != c.next_u64();
    CHECK(any_diff);

    // Child streams are reproducible and independent of consumption order.
    SeededRng parent(7);
    parent.next_u64();
    SeededRng child_late = parent.child(3);
    SeededRng child_fresh = SeededRng(7).child(3);
    for (int i = 0; i < 10; ++i) CHECK(child_late.next_u64() == child_fresh.next_u64());
}

TEST_CASE("uniform01 stays in [0,1) with sane moments") {
    SeededRng rng(123);
    double sum = 0.0, sum_sq = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
        sum_sq += u * u;
    }
    const double mean = sum / n;
    const double var = sum_sq / n - mean * mean;
    CHECK(mean == doctest::Approx(0.5).epsilon(0.01));
    CHECK(var == doctest::Approx(1.0 / 12.0).epsilon(0.03));
}

TEST_CASE("normal draws have unit moments and finite tails") {
    SeededRng rng(321);
    double sum = 0.0, sum_sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        REQUIRE(std::isfinite(z));
        sum += z;
        sum_sq += z * z;
    }
    const double mean = sum / n;
    const double var = sum_sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("below is unbiased over small ranges") {
    SeededRng rng(5);
    CHECK_THROWS_AS(rng.below(0), InvalidInputError);
    int counts[7] = {0};
    const int n = 70000;
    for (int i = 0; i < n; ++i) ++counts[rng.below(7)];
    for (int k = 0; k < 7; ++k) CHECK(std::abs(counts[k] - n / 7) < 500);
}

TEST_CASE("permutation is a permutation") {
    SeededRng rng(9);
    const auto perm = rng.permutation(257);
    std::set<std::size_t> seen(perm.begin(), perm.end());
    CHECK(seen.size() == 257);
    CHECK(*seen.begin() == 0);
    CHECK(*seen.rbegin() == 256);
}

TEST_CASE("bernoulli respects the edge probabilities") {
    SeededRng rng(10);
    for (int i = 0; i < 100; ++i) {
        CHECK(rng.bernoulli(1.0));
        CHECK_FALSE(rng.bernoulli(0.0));
    }
    CHECK_THROWS_AS(rng.bernoulli(1.5), InvalidInputError);
}

TEST_CASE("gaussian_matrix is seeded and well-scaled") {
    SeededRng rng_a(77), rng_b(77), rng_c(78);
    const Matrix a = gaussian_matrix(100, 100, rng_a);
    const Matrix b = gaussian_matrix(100, 100, rng_b);
    const Matrix c = gaussian_matrix(100, 100, rng_c);
    CHECK(max_abs_diff(a, b) == 0.0);
    CHECK(max_abs_diff(a, c) > 0.0);
    double sum = 0.0, sum_sq = 0.0;
    for (double x : a.data) {
        sum += x;
        sum_sq += x * x;
    }
    const double n = static_cast<double>(a.size());
    CHECK(std::abs(sum / n) < 0.05);
    CHECK(sum_sq / n == doctest::Approx(1.0).epsilon(0.05));
    CHECK_THROWS_AS(gaussian_matrix(0, 5, rng_a), InvalidInputError);
}
