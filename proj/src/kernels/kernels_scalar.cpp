#include "hdgee/kernels.hpp"

namespace hdgee::kernels::scalar {

double dot(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        acc += x[k] * y[k];
    }
    return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
        y[k] += alpha * x[k];
    }
}

}  // namespace hdgee::kernels::scalar
