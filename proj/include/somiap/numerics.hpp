#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace somiap {

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

    std::vector<double> column(std::size_t c) const;

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    Matrix transposed() const;
    double frobenius_norm() const;
    double trace() const;

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
std::vector<double> operator*(const Matrix& a, std::span<const double> v);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

/// Largest |a_ij - b_ij|.
double max_abs_diff(const Matrix& a, const Matrix& b);

/// Values sorted descending; column i of `vectors` pairs with values[i].
struct EigenDecomposition {
    std::vector<double> values;
    Matrix vectors;
};

/// Orthonormal 2-D DCT-II of a square block: scale sqrt(1/N) for the zero
/// frequency and sqrt(2/N) otherwise, on each axis.
Matrix dct2(const Matrix& block);

/// Inverse of dct2 (orthonormal DCT-III on both axes).
Matrix idct2(const Matrix& coeffs);

/// Cyclic Jacobi eigensolver for a symmetric matrix. Iterates until the
/// largest off-diagonal magnitude is <= 1e-12 * ||a||_F or 100 sweeps.
EigenDecomposition jacobi_eigh(const Matrix& a);

/// Solves B v = lambda W v for symmetric B and symmetric positive definite W
/// by whitening with W^(-1/2). When `ridge` > 0, ridge * trace(W) / n is added
/// to the diagonal of W first. Returned vectors have unit Euclidean norm.
EigenDecomposition generalized_symmetric_eig(const Matrix& b, const Matrix& w, double ridge = 0.0);

}  // namespace somiap
