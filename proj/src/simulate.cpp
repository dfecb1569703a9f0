#include "hdgee/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <fmt/format.h>

#include "hdgee/error.hpp"
#include "hdgee/kernels.hpp"

namespace hdgee {

BahadurInvalid::BahadurInvalid(std::size_t outcome, double cell)
    : Error(fmt::format("Bahadur pmf is negative at outcome {}: {:.6g}", outcome, cell)),
      outcome_(outcome),
      cell_(cell) {}

std::size_t pn_rule(std::size_t n) {
    if (n == 0) {
        throw InvalidArgument("pn_rule needs n >= 1");
    }
    // floor(2.5 n^{1/3}) is the largest k with 8 k^3 <= 125 n.
    using wide = unsigned __int128;
    const auto fits = [n](std::size_t k) {
        const wide kk = k;
        return 8 * kk * kk * kk <= static_cast<wide>(125) * n;
    };
    auto k = static_cast<std::size_t>(2.5 * std::cbrt(static_cast<double>(n)));
    while (k > 0 && !fits(k)) --k;
    while (fits(k + 1)) ++k;
    return k;
}

ParamVector beta_pattern(std::size_t p, const BetaPattern& pattern) {
    switch (pattern.kind) {
        case BetaPatternKind::Graded: {
            if (p < 4) {
                throw InvalidArgument(fmt::format("graded coefficient pattern needs p >= 4, got {}", p));
            }
            const std::size_t k = p / 4;
            ParamVector beta(p, -0.1);
            std::fill_n(beta.begin(), k, 0.4);
            std::fill_n(beta.begin() + k, k, -0.3);
            std::fill_n(beta.begin() + 2 * k, k, 0.2);
            return beta;
        }
        case BetaPatternKind::NullTail: {
            if (p != 24) {
                throw InvalidArgument(fmt::format("null-tail coefficient pattern needs p = 24, got {}", p));
            }
            ParamVector beta(24, 0.0);
            std::fill_n(beta.begin(), 6, 0.4);
            std::fill_n(beta.begin() + 6, 6, -0.3);
            std::fill_n(beta.begin() + 12, 6, 0.2);
            std::fill_n(beta.begin() + 18, 2, -0.1);
            return beta;
        }
        case BetaPatternKind::Custom:
            if (pattern.custom.size() != p) {
                throw InvalidArgument(
                    fmt::format("custom coefficient vector has length {}, design has p = {}", pattern.custom.size(), p));
            }
            require_finite(pattern.custom, "custom coefficients");
            return pattern.custom;
    }
    throw InvalidArgument("unknown coefficient pattern");
}

void SimDesign::validate() const {
    if (n == 0 || m == 0 || replications == 0) {
        throw InvalidArgument("design needs n, m and replications >= 1");
    }
    if (!(covariate_variance > 0.0)) throw InvalidArgument("covariate variance must be positive");
    if (!(std::abs(covariate_rho) < 1.0)) throw InvalidArgument("covariate rho must lie in (-1, 1)");
    if (family == Family::BinaryLogit && m > kMaxBahadurSize) {
        throw InvalidArgument(fmt::format("Bahadur enumeration supports m <= {}", kMaxBahadurSize));
    }
    if (family == Family::BinaryLogit && !(std::abs(response_rho) < 1.0)) {
        throw InvalidArgument("response rho must lie in (-1, 1)");
    }
    if (max_retries == 0) throw InvalidArgument("max_retries must be positive");
    (void)beta_pattern(p(), beta);
}

Matrix gen_covariates(Xoshiro256& rng, std::size_t m, std::size_t p, double variance, double rho) {
    if (!(variance > 0.0) || !(std::abs(rho) < 1.0)) {
        throw InvalidArgument("covariates need variance > 0 and |rho| < 1");
    }
    std::normal_distribution<double> normal;
    const double sd = std::sqrt(variance);
    const double innovation = sd * std::sqrt(1.0 - rho * rho);
    Matrix x(m, p);
    for (std::size_t j = 0; j < m; ++j) {
        auto row = x.row(j);
        row[0] = sd * normal(rng);
        for (std::size_t k = 1; k < p; ++k) {
            row[k] = rho * row[k - 1] + innovation * normal(rng);
        }
    }
    return x;
}

Vector bahadur_pmf_unchecked(std::span<const double> pi, double rho) {
    const std::size_t m = pi.size();
    if (m == 0 || m > kMaxBahadurSize) {
        throw InvalidArgument(fmt::format("Bahadur pmf supports 1 <= m <= {}, got {}", kMaxBahadurSize, m));
    }
    Vector e1(m), e0(m);
    for (std::size_t j = 0; j < m; ++j) {
        if (!(pi[j] > 0.0 && pi[j] < 1.0)) {
            throw InvalidArgument(fmt::format("marginal probability {} outside (0, 1)", pi[j]));
        }
        const double sd = std::sqrt(pi[j] * (1.0 - pi[j]));
        e1[j] = (1.0 - pi[j]) / sd;
        e0[j] = -pi[j] / sd;
    }
    const std::size_t outcomes = std::size_t{1} << m;
    Vector pmf(outcomes);
    Vector e(m);
    for (std::size_t y = 0; y < outcomes; ++y) {
        double base = 1.0;
        for (std::size_t j = 0; j < m; ++j) {
            const bool one = (y >> j) & 1U;
            base *= one ? pi[j] : 1.0 - pi[j];
            e[j] = one ? e1[j] : e0[j];
        }
        double pairs = 0.0;
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t k = j + 1; k < m; ++k)
                pairs += e[j] * e[k];
        pmf[y] = base * (1.0 + rho * pairs);
    }
    return pmf;
}

Vector bahadur_pmf(std::span<const double> pi, double rho) {
    Vector pmf = bahadur_pmf_unchecked(pi, rho);
    const auto it = std::min_element(pmf.begin(), pmf.end());
    if (*it < -1e-12) {
        throw BahadurInvalid(static_cast<std::size_t>(it - pmf.begin()), *it);
    }
    return pmf;
}

Vector draw_outcome(Xoshiro256& rng, std::span<const double> pmf, std::size_t m) {
    const double u = rng.uniform();
    double cumulative = 0.0;
    std::size_t chosen = pmf.size();
    std::size_t last_positive = 0;
    for (std::size_t y = 0; y < pmf.size(); ++y) {
        const double cell = std::max(0.0, pmf[y]);
        if (cell > 0.0) last_positive = y;
        cumulative += cell;
        if (u < cumulative) {
            chosen = y;
            break;
        }
    }
    if (chosen == pmf.size()) chosen = last_positive;  // rounding left u above the total
    Vector out(m);
    for (std::size_t j = 0; j < m; ++j) out[j] = static_cast<double>((chosen >> j) & 1U);
    return out;
}

Vector gen_responses(Xoshiro256& rng, std::span<const double> pi, double rho) {
    const Vector pmf = bahadur_pmf(pi, rho);
    return draw_outcome(rng, pmf, pi.size());
}

SimulatedData gen_dataset(const SimDesign& design, std::size_t replication_index) {
    design.validate();
    const std::size_t p = design.p();
    const ParamVector beta0 = beta_pattern(p, design.beta);
    const MarginalModel model(design.family);
    GenerationDiagnostics diag;
    diag.max_pmf_min = -std::numeric_limits<double>::infinity();
    std::vector<ClusterObservation> clusters;
    clusters.reserve(design.n);

    for (std::size_t i = 0; i < design.n; ++i) {
        Xoshiro256 rng = derive_stream(design.seed, replication_index, i);
        ++diag.rng_streams_used;
        if (design.family == Family::PoissonLog) {
            Matrix x = gen_covariates(rng, design.m, p, design.covariate_variance, design.covariate_rho);
            const Vector theta = x * beta0;
            Vector y(design.m);
            for (std::size_t j = 0; j < design.m; ++j) {
                std::poisson_distribution<long> draw(model.mean(theta[j]));
                y[j] = static_cast<double>(draw(rng));
            }
            clusters.push_back({std::move(y), std::move(x)});
            continue;
        }
        std::size_t redraws = 0;
        while (true) {
            Matrix x = gen_covariates(rng, design.m, p, design.covariate_variance, design.covariate_rho);
            const Vector pi = marginal_mean(model, x * beta0);
            const Vector pmf = bahadur_pmf_unchecked(pi, design.response_rho);
            const double lowest = *std::min_element(pmf.begin(), pmf.end());
            if (lowest >= -1e-12) {
                clusters.push_back({draw_outcome(rng, pmf, design.m), std::move(x)});
                break;
            }
            diag.max_pmf_min = std::max(diag.max_pmf_min, lowest);
            if (++redraws > design.max_retries) {
                const auto worst = static_cast<std::size_t>(std::min_element(pmf.begin(), pmf.end()) - pmf.begin());
                throw BahadurInvalid(worst, lowest);
            }
        }
        diag.total_redraws += redraws;
        if (redraws > 0) ++diag.clusters_regenerated;
    }
    if (diag.clusters_regenerated == 0) diag.max_pmf_min = 0.0;
    const double rate = static_cast<double>(diag.clusters_regenerated) / static_cast<double>(design.n);
    if (rate > design.max_regeneration_rate) {
        throw StudyAborted(fmt::format("replication {}: {:.1f}% of clusters needed regeneration (limit {:.1f}%)",
                                       replication_index, 100.0 * rate, 100.0 * design.max_regeneration_rate));
    }
    return {ClusteredDataset(std::move(clusters), design.family), beta0, diag};
}

}  // namespace hdgee
