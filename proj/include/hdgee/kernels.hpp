#pragma once

// Inner-loop arithmetic used by the score, information and meat accumulations.
//
// Every kernel has a scalar reference implementation and, on x86-64, an AVX2+FMA
// variant. The variant is chosen once at startup from the CPU feature bits and
// can be overridden with HDGEE_ISA=scalar|avx2 or force_isa(). Results of the
// two paths agree to rounding, not bit-for-bit; a single process always uses one
// path, so studies stay byte-reproducible.

#include <cstddef>
#include <span>
#include <string_view>

namespace hdgee::kernels {

enum class Isa { Scalar, Avx2 };

Isa active_isa() noexcept;
bool isa_supported(Isa isa) noexcept;
/// Returns false (and leaves the selection unchanged) when `isa` is unsupported.
bool force_isa(Isa isa) noexcept;
std::string_view isa_name(Isa isa) noexcept;

/// sum_k x[k] * y[k]
double dot(std::span<const double> x, std::span<const double> y);

/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

/// Lower triangle of a row-major p x p matrix: out(a, b) += alpha * x[a] * y[b], b <= a.
void rank1_lower(double alpha, std::span<const double> x, std::span<const double> y,
                 std::span<double> out);

namespace scalar {
double dot(const double* x, const double* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace scalar

namespace avx2 {
bool available() noexcept;
double dot(const double* x, const double* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace avx2

}  // namespace hdgee::kernels
