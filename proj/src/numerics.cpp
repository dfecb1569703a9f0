#include "hdgee/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "hdgee/error.hpp"
#include "hdgee/kernels.hpp"

namespace hdgee {

NotPositiveDefinite::NotPositiveDefinite(std::size_t pivot_index, double pivot)
    : Error(fmt::format("matrix is not positive definite: pivot {} = {:.6g}", pivot_index, pivot)),
      pivot_index_(pivot_index),
      pivot_(pivot) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        throw DimensionMismatch(fmt::format("matrix {}x{} given {} entries", rows, cols, data_.size()));
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

Matrix Matrix::transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t c = 0; c < cols_; ++c) {
            t(c, r) = (*this)(r, c);
        }
    }
    return t;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionMismatch(
            fmt::format("cannot multiply {}x{} by {}x{}", a.rows(), a.cols(), b.rows(), b.cols()));
    }
    Matrix out(a.rows(), b.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            kernels::axpy(a(r, k), b.row(k), out.row(r));
        }
    }
    return out;
}

Vector operator*(const Matrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) {
        throw DimensionMismatch(fmt::format("cannot multiply {}x{} by vector of length {}", a.rows(),
                                            a.cols(), x.size()));
    }
    Vector out(a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        out[r] = kernels::dot(a.row(r), x);
    }
    return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionMismatch("matrix difference of unequal shapes");
    }
    Matrix out = a;
    kernels::axpy(-1.0, b.data(), out.data());
    return out;
}

double max_abs(std::span<const double> x) {
    double m = 0.0;
    for (double v : x) {
        m = std::max(m, std::abs(v));
    }
    return m;
}

double max_abs(const Matrix& a) { return max_abs(a.data()); }

SymmetricMatrix SymmetricMatrix::from_lower(const Matrix& m) {
    if (m.rows() != m.cols()) {
        throw DimensionMismatch("symmetric matrix must be square");
    }
    SymmetricMatrix s(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c <= r; ++c) {
            s.set(r, c, m(r, c));
        }
    }
    return s;
}

SymmetricMatrix SymmetricMatrix::from_symmetric(const Matrix& m) {
    if (m.rows() != m.cols()) {
        throw DimensionMismatch("symmetric matrix must be square");
    }
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < r; ++c) {
            if (m(r, c) != m(c, r)) {
                throw InvalidArgument(fmt::format("matrix is not symmetric at ({}, {})", r, c));
            }
        }
    }
    return from_lower(m);
}

SymmetricMatrix SymmetricMatrix::symmetrized(const Matrix& m) {
    if (m.rows() != m.cols()) {
        throw DimensionMismatch("symmetric matrix must be square");
    }
    SymmetricMatrix s(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c <= r; ++c) {
            s.set(r, c, 0.5 * (m(r, c) + m(c, r)));
        }
    }
    return s;
}

SymmetricMatrix SymmetricMatrix::identity(std::size_t n) { return from_lower(Matrix::identity(n)); }

SymmetricMatrix SymmetricMatrix::diagonal(std::span<const double> d) {
    SymmetricMatrix s(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        s.set(i, i, d[i]);
    }
    return s;
}

void SymmetricMatrix::set(std::size_t r, std::size_t c, double v) {
    full_(r, c) = v;
    full_(c, r) = v;
}

Cholesky::Cholesky(const SymmetricMatrix& a) : lower_(a.dimension(), a.dimension()) {
    const std::size_t n = a.dimension();
    min_pivot_ = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
        auto lj = lower_.row(j);
        double d = a(j, j) - kernels::dot(lj.first(j), lj.first(j));
        if (!(d > kPivotThreshold)) {
            throw NotPositiveDefinite(j, d);
        }
        min_pivot_ = std::min(min_pivot_, d);
        const double root = std::sqrt(d);
        lower_(j, j) = root;
        for (std::size_t i = j + 1; i < n; ++i) {
            auto li = lower_.row(i);
            lower_(i, j) = (a(i, j) - kernels::dot(li.first(j), lj.first(j))) / root;
        }
    }
}

Vector Cholesky::forward(std::span<const double> b) const {
    const std::size_t n = dimension();
    Vector z(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto li = lower_.row(i);
        z[i] = (b[i] - kernels::dot(li.first(i), std::span<const double>(z).first(i))) / li[i];
    }
    return z;
}

Vector Cholesky::backward(std::span<const double> z) const {
    const std::size_t n = dimension();
    Vector x(z.begin(), z.end());
    for (std::size_t ii = n; ii-- > 0;) {
        x[ii] /= lower_(ii, ii);
        const double xi = x[ii];
        // x[0..ii) -= xi * L(ii, 0..ii)
        kernels::axpy(-xi, lower_.row(ii).first(ii), std::span<double>(x).first(ii));
    }
    return x;
}

Vector Cholesky::solve(std::span<const double> b) const {
    if (b.size() != dimension()) {
        throw DimensionMismatch(
            fmt::format("right-hand side of length {} for a {}-dimensional system", b.size(), dimension()));
    }
    return backward(forward(b));
}

Matrix Cholesky::solve(const Matrix& b) const {
    if (b.rows() != dimension()) {
        throw DimensionMismatch("right-hand side rows do not match system dimension");
    }
    Matrix x(b.rows(), b.cols());
    Vector col(b.rows());
    for (std::size_t c = 0; c < b.cols(); ++c) {
        for (std::size_t r = 0; r < b.rows(); ++r) {
            col[r] = b(r, c);
        }
        const Vector sol = solve(col);
        for (std::size_t r = 0; r < b.rows(); ++r) {
            x(r, c) = sol[r];
        }
    }
    return x;
}

SymmetricMatrix Cholesky::inverse() const {
    const Matrix inv = solve(Matrix::identity(dimension()));
    return SymmetricMatrix::symmetrized(inv);
}

double Cholesky::inverse_quadratic_form(std::span<const double> x) const {
    if (x.size() != dimension()) {
        throw DimensionMismatch("quadratic form vector length does not match dimension");
    }
    const Vector z = forward(x);
    return kernels::dot(z, z);
}

Vector solve_spd(const SymmetricMatrix& a, std::span<const double> b) { return Cholesky(a).solve(b); }

SymmetricMatrix invert_spd(const SymmetricMatrix& a) { return Cholesky(a).inverse(); }

EigenExtremes eigen_extremes(const SymmetricMatrix& a) {
    const std::size_t n = a.dimension();
    if (n == 0) {
        throw InvalidArgument("eigenvalues of an empty matrix");
    }
    Eigen::MatrixXd m(n, n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = a(r, c);
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        throw NumericError("symmetric eigenvalue iteration did not converge");
    }
    const auto& ev = solver.eigenvalues();
    return {ev.minCoeff(), ev.maxCoeff()};
}

}  // namespace hdgee
