#include "hdgee/kernels.hpp"

#include <atomic>
#include <cassert>
#include <cstdlib>
#include <string>

namespace hdgee::kernels {
namespace {

Isa detect() noexcept {
    if (const char* env = std::getenv("HDGEE_ISA")) {
        const std::string want(env);
        if (want == "scalar") {
            return Isa::Scalar;
        }
        if (want == "avx2" && avx2::available()) {
            return Isa::Avx2;
        }
    }
    return avx2::available() ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa>& selected() noexcept {
    static std::atomic<Isa> isa{detect()};
    return isa;
}

}  // namespace

Isa active_isa() noexcept { return selected().load(std::memory_order_relaxed); }

bool isa_supported(Isa isa) noexcept {
    return isa == Isa::Scalar || avx2::available();
}

bool force_isa(Isa isa) noexcept {
    if (!isa_supported(isa)) {
        return false;
    }
    selected().store(isa, std::memory_order_relaxed);
    return true;
}

std::string_view isa_name(Isa isa) noexcept {
    return isa == Isa::Avx2 ? "avx2" : "scalar";
}

double dot(std::span<const double> x, std::span<const double> y) {
    assert(x.size() == y.size());
    if (active_isa() == Isa::Avx2) {
        return avx2::dot(x.data(), y.data(), x.size());
    }
    return scalar::dot(x.data(), y.data(), x.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    assert(x.size() == y.size());
    if (active_isa() == Isa::Avx2) {
        avx2::axpy(alpha, x.data(), y.data(), x.size());
    } else {
        scalar::axpy(alpha, x.data(), y.data(), x.size());
    }
}

void rank1_lower(double alpha, std::span<const double> x, std::span<const double> y,
                 std::span<double> out) {
    const std::size_t p = x.size();
    assert(y.size() == p && out.size() == p * p);
    const bool wide = active_isa() == Isa::Avx2;
    for (std::size_t a = 0; a < p; ++a) {
        const double scale = alpha * x[a];
        if (scale == 0.0) {
            continue;
        }
        double* row = out.data() + a * p;
        if (wide) {
            avx2::axpy(scale, y.data(), row, a + 1);
        } else {
            scalar::axpy(scale, y.data(), row, a + 1);
        }
    }
}

}  // namespace hdgee::kernels
