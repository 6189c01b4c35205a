#include "somiap/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

#include "somiap/error.hpp"

namespace somiap {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) throw ShapeError("Matrix: data length must equal rows*cols");
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

std::vector<double> Matrix::column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

double Matrix::frobenius_norm() const {
    double s = 0.0;
    for (const double v : data_) s += v * v;
    return std::sqrt(s);
}

double Matrix::trace() const {
    double s = 0.0;
    for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) s += (*this)(i, i);
    return s;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw ShapeError("matrix product: inner dimensions differ");
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto orow = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const auto brow = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("matrix difference: shapes differ");
    Matrix out = a;
    for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] -= b.data()[i];
    return out;
}

std::vector<double> operator*(const Matrix& a, std::span<const double> v) {
    if (a.cols() != v.size()) throw ShapeError("matrix-vector product: dimensions differ");
    std::vector<double> out(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) out[i] = dot(a.row(i), v);
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("max_abs_diff: shapes differ");
    double m = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

// ---------------------------------------------------------------------------
// DCT

namespace {

/// basis(k, n) = s_k cos(pi (2n + 1) k / 2N)
Matrix make_dct_basis(std::size_t n) {
    Matrix c(n, n);
    const double s0 = std::sqrt(1.0 / static_cast<double>(n));
    const double s = std::sqrt(2.0 / static_cast<double>(n));
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            c(k, i) = (k == 0 ? s0 : s) *
                      std::cos(std::numbers::pi * static_cast<double>((2 * i + 1) * k) / (2.0 * static_cast<double>(n)));
    return c;
}

const Matrix& dct_basis(std::size_t n) {
    thread_local std::map<std::size_t, Matrix> cache;
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, make_dct_basis(n)).first;
    return it->second;
}

void check_square_block(const Matrix& m, const char* op) {
    if (m.rows() != m.cols() || m.rows() < 2) {
        std::ostringstream os;
        os << op << ": expected a square block with side >= 2, got " << m.rows() << "x" << m.cols();
        throw ShapeError(os.str());
    }
}

}  // namespace

Matrix dct2(const Matrix& block) {
    check_square_block(block, "dct2");
    const Matrix& c = dct_basis(block.rows());
    return c * block * c.transposed();
}

Matrix idct2(const Matrix& coeffs) {
    check_square_block(coeffs, "idct2");
    const Matrix& c = dct_basis(coeffs.rows());
    return c.transposed() * coeffs * c;
}

// ---------------------------------------------------------------------------
// Eigensolvers

namespace {

void check_symmetric(const Matrix& a, const char* op) {
    if (a.rows() != a.cols()) throw ShapeError(std::string(op) + ": matrix must be square");
    const double tol = 1e-9 * std::max(1.0, a.frobenius_norm());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = i + 1; j < a.cols(); ++j)
            if (std::abs(a(i, j) - a(j, i)) > tol)
                throw ContractError(std::string(op) + ": matrix is not symmetric");
}

EigenDecomposition sorted_descending(std::vector<double> values, const Matrix& vectors) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    EigenDecomposition out{std::vector<double>(n), Matrix(vectors.rows(), n)};
    for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = values[order[j]];
        for (std::size_t r = 0; r < vectors.rows(); ++r) out.vectors(r, j) = vectors(r, order[j]);
    }
    return out;
}

}  // namespace

EigenDecomposition jacobi_eigh(const Matrix& input) {
    check_symmetric(input, "jacobi_eigh");
    const std::size_t n = input.rows();
    Matrix a = input;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (input(i, j) + input(j, i));
    Matrix v = Matrix::identity(n);
    const double tol = 1e-12 * a.frobenius_norm();

    const auto max_off_diagonal = [&] {
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) m = std::max(m, std::abs(a(i, j)));
        return m;
    };

    for (int sweep = 0; sweep < 100 && max_off_diagonal() > tol; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double app = a(p, p);
                const double aqq = a(q, q);
                // Rutishauser's stable form of the rotation angle.
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                const double tau = s / (1.0 + c);

                a(p, p) = app - t * apq;
                a(q, q) = aqq + t * apq;
                a(p, q) = a(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    if (k == p || k == q) continue;
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = a(p, k) = akp - s * (akq + tau * akp);
                    a(k, q) = a(q, k) = akq + s * (akp - tau * akq);
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = vkp - s * (vkq + tau * vkp);
                    v(k, q) = vkq + s * (vkp - tau * vkq);
                }
            }
        }
    }

    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = a(i, i);
    return sorted_descending(std::move(values), v);
}

EigenDecomposition generalized_symmetric_eig(const Matrix& b, const Matrix& w_in, double ridge) {
    check_symmetric(b, "generalized_symmetric_eig(b)");
    check_symmetric(w_in, "generalized_symmetric_eig(w)");
    if (b.rows() != w_in.rows()) throw ShapeError("generalized_symmetric_eig: b and w differ in size");
    const std::size_t n = b.rows();

    Matrix w = w_in;
    if (ridge > 0.0) {
        const double eps = ridge * w.trace() / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) w(i, i) += eps;
    }

    const EigenDecomposition wd = jacobi_eigh(w);
    const double largest = wd.values.empty() ? 0.0 : wd.values.front();
    const double floor = 1e-13 * std::max(std::abs(largest), 1e-300);
    if (n > 0 && (largest <= 0.0 || wd.values.back() <= floor))
        throw SingularityError("generalized_symmetric_eig: w is not positive definite");

    // W^(-1/2) = U diag(1/sqrt(l)) U^T
    Matrix inv_sqrt(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += wd.vectors(i, k) * wd.vectors(j, k) / std::sqrt(wd.values[k]);
            inv_sqrt(i, j) = s;
        }

    Matrix c = inv_sqrt * b * inv_sqrt;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) c(i, j) = c(j, i) = 0.5 * (c(i, j) + c(j, i));

    EigenDecomposition cd = jacobi_eigh(c);
    Matrix v = inv_sqrt * cd.vectors;
    for (std::size_t j = 0; j < n; ++j) {
        double norm = 0.0;
        for (std::size_t r = 0; r < n; ++r) norm += v(r, j) * v(r, j);
        norm = std::sqrt(norm);
        if (norm > 0.0)
            for (std::size_t r = 0; r < n; ++r) v(r, j) /= norm;
    }
    return {std::move(cd.values), std::move(v)};
}

}  // namespace somiap
