#include <doctest.h>

#include <cmath>

#include "somiap/error.hpp"
#include "somiap/numerics.hpp"
#include "support.hpp"

using namespace somiap;
using namespace testsupport;

namespace {

Matrix naive_dct(const Matrix& x) {
    const std::size_t n = x.rows();
    Matrix out(n, n);
    const auto alpha = [n](std::size_t k) { return k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n); };
    for (std::size_t u = 0; u < n; ++u)
        for (std::size_t v = 0; v < n; ++v) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    s += x(i, j) * std::cos(M_PI * (2.0 * i + 1) * u / (2.0 * n)) *
                         std::cos(M_PI * (2.0 * j + 1) * v / (2.0 * n));
            out(u, v) = alpha(u) * alpha(v) * s;
        }
    return out;
}

Matrix diag(const std::vector<double>& v) {
    Matrix d(v.size(), v.size());
    for (std::size_t i = 0; i < v.size(); ++i) d(i, i) = v[i];
    return d;
}

double orthonormality_error(const Matrix& v) {
    return max_abs_diff(v.transposed() * v, Matrix::identity(v.cols()));
}

}  // namespace

TEST_CASE("dct2 of a constant block") {
    const Matrix c(8, 8, 3.5);
    const Matrix d = dct2(c);
    CHECK(d(0, 0) == doctest::Approx(8 * 3.5).epsilon(1e-14));
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 8; ++j)
            if (i || j) CHECK(std::abs(d(i, j)) <= 1e-12);
}

TEST_CASE("dct2 matches the naive definition") {
    Rng rng(11);
    for (const std::size_t n : {2u, 5u, 8u, 32u}) {
        const Matrix x = random_matrix(n, n, rng, 0.0, 255.0);
        CHECK(max_abs_diff(dct2(x), naive_dct(x)) <= 1e-9);
    }
}

TEST_CASE("dct2 round trip and energy") {
    Rng rng(12);
    const Matrix x = random_matrix(16, 16, rng);
    const Matrix d = dct2(x);
    CHECK(max_abs_diff(idct2(d), x) <= 1e-12);
    CHECK(std::abs(d.frobenius_norm() - x.frobenius_norm()) <= 1e-10 * x.frobenius_norm());
}

TEST_CASE("dct2 shape errors") {
    CHECK_THROWS_AS(dct2(Matrix(3, 4)), ShapeError);
    CHECK_THROWS_AS(dct2(Matrix(1, 1)), ShapeError);
}

TEST_CASE("jacobi on small matrices") {
    const auto d = jacobi_eigh(diag({3.0, 1.0}));
    CHECK(d.values[0] == doctest::Approx(3.0));
    CHECK(d.values[1] == doctest::Approx(1.0));
    CHECK(std::abs(std::abs(d.vectors(0, 0)) - 1.0) < 1e-12);
    CHECK(std::abs(std::abs(d.vectors(1, 1)) - 1.0) < 1e-12);

    const auto e = jacobi_eigh(Matrix(2, 2, std::vector<double>{2, 1, 1, 2}));
    CHECK(e.values[0] == doctest::Approx(3.0));
    CHECK(e.values[1] == doctest::Approx(1.0));
    CHECK(std::abs(std::abs(e.vectors(0, 0)) - M_SQRT1_2) < 1e-12);
    CHECK(std::abs(e.vectors(0, 0) - e.vectors(1, 0)) < 1e-12);
}

TEST_CASE("jacobi on a random symmetric matrix") {
    Rng rng(13);
    const Matrix a = random_symmetric(50, rng);
    const auto d = jacobi_eigh(a);
    const Matrix recon = d.vectors * diag(d.values) * d.vectors.transposed();
    CHECK((recon - a).frobenius_norm() <= 1e-8 * a.frobenius_norm());
    CHECK(orthonormality_error(d.vectors) <= 1e-10);
    double sum = 0.0;
    for (const double v : d.values) sum += v;
    CHECK(std::abs(sum - a.trace()) <= 1e-9 * std::max(1.0, std::abs(a.trace())));
    for (std::size_t i = 1; i < d.values.size(); ++i) CHECK(d.values[i - 1] >= d.values[i]);

    const auto again = jacobi_eigh(a);
    CHECK(again.values == d.values);
    CHECK(again.vectors == d.vectors);
}

TEST_CASE("jacobi rejects asymmetric input") {
    CHECK_THROWS_AS(jacobi_eigh(Matrix(2, 2, std::vector<double>{1, 2, 3, 4})), ContractError);
    CHECK_THROWS_AS(jacobi_eigh(Matrix(2, 3)), ShapeError);
}

TEST_CASE("generalized eigenproblem") {
    Rng rng(14);
    const Matrix b = random_symmetric(6, rng);
    const auto plain = jacobi_eigh(b);
    const auto gen = generalized_symmetric_eig(b, Matrix::identity(6));
    for (std::size_t i = 0; i < 6; ++i) CHECK(gen.values[i] == doctest::Approx(plain.values[i]).epsilon(1e-10));

    Matrix m = random_matrix(5, 5, rng);
    Matrix w = m.transposed() * m;
    for (std::size_t i = 0; i < 5; ++i) w(i, i) += 1.0;
    Matrix b2 = w;
    for (auto& v : b2.data()) v *= 2.0;
    for (const double v : generalized_symmetric_eig(b2, w).values) CHECK(v == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("generalized eigen residuals on a random SPD pair") {
    Rng rng(15);
    const Matrix mb = random_matrix(10, 10, rng);
    const Matrix mw = random_matrix(10, 10, rng);
    const Matrix b = mb.transposed() * mb;
    Matrix w = mw.transposed() * mw;
    for (std::size_t i = 0; i < 10; ++i) w(i, i) += 0.5;
    const auto d = generalized_symmetric_eig(b, w);
    for (std::size_t k = 0; k < 3; ++k) {
        const auto v = d.vectors.column(k);
        const auto bv = b * std::span<const double>(v);
        const auto wv = w * std::span<const double>(v);
        std::vector<double> r(10);
        for (std::size_t i = 0; i < 10; ++i) r[i] = bv[i] - d.values[k] * wv[i];
        CHECK(norm2(r) <= 1e-6 * norm2(bv));
        CHECK(norm2(v) == doctest::Approx(1.0));
    }
}

TEST_CASE("generalized eigen singular W") {
    const Matrix w(3, 3, 0.0);
    CHECK_THROWS_AS(generalized_symmetric_eig(Matrix::identity(3), w), SingularityError);
}
