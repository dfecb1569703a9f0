#include "hdgee/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)
#define HDGEE_HAVE_AVX2 1
#include <immintrin.h>
#else
#define HDGEE_HAVE_AVX2 0
#endif

namespace hdgee::kernels::avx2 {

#if HDGEE_HAVE_AVX2

bool available() noexcept {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

double dot(const double* x, const double* y, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t k = 0;
    for (; k + 8 <= n; k += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + k), _mm256_loadu_pd(y + k), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + k + 4), _mm256_loadu_pd(y + k + 4), acc1);
    }
    if (k + 4 <= n) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + k), _mm256_loadu_pd(y + k), acc0);
        k += 4;
    }
    acc0 = _mm256_add_pd(acc0, acc1);
    __m128d lo = _mm256_castpd256_pd128(acc0);
    __m128d hi = _mm256_extractf128_pd(acc0, 1);
    lo = _mm_add_pd(lo, hi);
    lo = _mm_add_sd(lo, _mm_unpackhi_pd(lo, lo));
    double acc = _mm_cvtsd_f64(lo);
    for (; k < n; ++k) {
        acc += x[k] * y[k];
    }
    return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d a = _mm256_set1_pd(alpha);
    std::size_t k = 0;
    for (; k + 4 <= n; k += 4) {
        _mm256_storeu_pd(y + k, _mm256_fmadd_pd(a, _mm256_loadu_pd(x + k), _mm256_loadu_pd(y + k)));
    }
    for (; k < n; ++k) {
        y[k] += alpha * x[k];
    }
}

#else

bool available() noexcept { return false; }

double dot(const double* x, const double* y, std::size_t n) { return scalar::dot(x, y, n); }

void axpy(double alpha, const double* x, double* y, std::size_t n) { scalar::axpy(alpha, x, y, n); }

#endif

}  // namespace hdgee::kernels::avx2
