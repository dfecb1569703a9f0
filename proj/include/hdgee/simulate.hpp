#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <tuple>
#include <vector>

#include "hdgee/model.hpp"
#include "hdgee/numerics.hpp"
#include "hdgee/random.hpp"

namespace hdgee {

/// floor(2.5 n^{1/3}), computed in integer arithmetic.
std::size_t pn_rule(std::size_t n);

enum class BetaPatternKind { Graded, NullTail, Custom };

struct BetaPattern {
    BetaPatternKind kind = BetaPatternKind::Graded;
    Vector custom;
};

/// Graded: (0.4 1_k, -0.3 1_k, 0.2 1_k, -0.1 1_{p-3k}) with k = floor(p/4).
/// NullTail (p = 24): (0.4 1_6, -0.3 1_6, 0.2 1_6, -0.1 1_2, 0, 0, 0, 0).
ParamVector beta_pattern(std::size_t p, const BetaPattern& pattern);

struct SimDesign {
    std::size_t n = 500;
    std::optional<std::size_t> p_override;
    std::size_t m = 3;
    double covariate_variance = 0.2;
    double covariate_rho = 0.5;
    double response_rho = 0.5;
    BetaPattern beta;
    std::size_t replications = 500;
    std::uint64_t seed = 20100101;
    Family family = Family::BinaryLogit;
    /// Per-cluster cap on covariate redraws after an invalid Bahadur pmf.
    std::size_t max_retries = 100;
    /// Abort when regenerated clusters / n exceeds this. 1.0 disables the check.
    double max_regeneration_rate = 1.0;

    std::size_t p() const { return p_override ? *p_override : pn_rule(n); }
    void validate() const;
};

struct GenerationDiagnostics {
    std::size_t clusters_regenerated = 0;  // clusters needing at least one redraw
    std::size_t total_redraws = 0;
    double max_pmf_min = 0.0;  // largest (closest to valid) min cell among rejected draws
    std::size_t rng_streams_used = 0;
};

/// Rows are independent; within a row x_1 = s z_1, x_k = rho x_{k-1} + s sqrt(1-rho^2) z_k.
Matrix gen_covariates(Xoshiro256& rng, std::size_t m, std::size_t p, double variance, double rho);

/// Largest supported cluster size for pmf enumeration.
inline constexpr std::size_t kMaxBahadurSize = 20;

/// Second-order Bahadur pmf with exchangeable correlation rho over all 2^m
/// outcomes; outcome index bit j holds y_{j+1}. Does not check validity.
Vector bahadur_pmf_unchecked(std::span<const double> pi, double rho);
/// As above; throws BahadurInvalid if any cell < -1e-12.
Vector bahadur_pmf(std::span<const double> pi, double rho);

/// One categorical draw from the Bahadur pmf using a single uniform.
Vector gen_responses(Xoshiro256& rng, std::span<const double> pi, double rho);
/// Draw from an already validated pmf.
Vector draw_outcome(Xoshiro256& rng, std::span<const double> pmf, std::size_t m);

struct SimulatedData {
    ClusteredDataset data;
    ParamVector beta0;
    GenerationDiagnostics diagnostics;
};

/// Pure function of (design, replication_index). Binary designs use Bahadur
/// responses; Poisson designs draw independent log-linear counts.
SimulatedData gen_dataset(const SimDesign& design, std::size_t replication_index);

}  // namespace hdgee
