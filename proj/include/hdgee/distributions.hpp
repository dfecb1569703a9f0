#pragma once

#include <cstddef>

namespace hdgee {

/// Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a).
double gamma_q(double a, double x);
double gamma_p(double a, double x);

double normal_cdf(double x);
/// Upper tail 1 - Phi(x), accurate in the far tail.
double normal_upper(double x);
/// Standard normal quantile, p in (0, 1).
double normal_quantile(double p);

double chi_square_cdf(double x, double df);
double chi_square_upper(double x, double df);

/// Asymptotic Kolmogorov tail P(K > lambda).
double kolmogorov_upper(double lambda);

}  // namespace hdgee
