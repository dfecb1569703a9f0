#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace hdgee {

using Vector = std::vector<double>;

/// Dense row-major matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    Matrix transpose() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Vector operator*(const Matrix& a, std::span<const double> x);
Matrix operator-(const Matrix& a, const Matrix& b);
double max_abs(const Matrix& a);
double max_abs(std::span<const double> x);

/// Square matrix whose (j, k) and (k, j) entries are equal exactly. Built by
/// mirroring one triangle, so the invariant holds by construction.
class SymmetricMatrix {
public:
    SymmetricMatrix() = default;
    explicit SymmetricMatrix(std::size_t n) : full_(n, n) {}

    /// Mirrors the lower triangle of `m` (entries with col <= row).
    static SymmetricMatrix from_lower(const Matrix& m);
    /// Requires exact symmetry; throws InvalidArgument otherwise.
    static SymmetricMatrix from_symmetric(const Matrix& m);
    /// Averages m and its transpose.
    static SymmetricMatrix symmetrized(const Matrix& m);
    static SymmetricMatrix identity(std::size_t n);
    static SymmetricMatrix diagonal(std::span<const double> d);

    std::size_t dimension() const noexcept { return full_.rows(); }
    double operator()(std::size_t r, std::size_t c) const { return full_(r, c); }
    const Matrix& dense() const noexcept { return full_; }

    /// Writes both (r, c) and (c, r).
    void set(std::size_t r, std::size_t c, double v);

private:
    Matrix full_;
};

/// Lower-triangular factor L with A = L L^T. Factor once, solve many.
class Cholesky {
public:
    /// Pivots at or below this value are treated as failure.
    static constexpr double kPivotThreshold = 1e-12;

    explicit Cholesky(const SymmetricMatrix& a);

    std::size_t dimension() const noexcept { return lower_.rows(); }
    Vector solve(std::span<const double> b) const;
    Matrix solve(const Matrix& b) const;
    SymmetricMatrix inverse() const;
    /// x^T A^{-1} x without forming the inverse.
    double inverse_quadratic_form(std::span<const double> x) const;
    double min_pivot() const noexcept { return min_pivot_; }
    const Matrix& lower() const noexcept { return lower_; }

private:
    Vector forward(std::span<const double> b) const;
    Vector backward(std::span<const double> z) const;

    Matrix lower_;
    double min_pivot_ = 0.0;
};

Vector solve_spd(const SymmetricMatrix& a, std::span<const double> b);
SymmetricMatrix invert_spd(const SymmetricMatrix& a);

struct EigenExtremes {
    double min;
    double max;
};

EigenExtremes eigen_extremes(const SymmetricMatrix& a);

}  // namespace hdgee
