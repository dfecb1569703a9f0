#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "hdgee/estimator.hpp"
#include "hdgee/simulate.hpp"
#include "hdgee/working_correlation.hpp"

namespace hdgee {

enum class StudyKind { MseTable, SandwichTable, WaldNull, HighDimNull };

struct SampleSize {
    std::size_t n;
    std::optional<std::size_t> p;
};

struct StudyConfig {
    StudyKind study = StudyKind::MseTable;
    SimDesign design;
    /// Sample sizes to sweep; empty means the single (design.n, design.p_override).
    std::vector<SampleSize> grid;
    std::vector<StructureKind> structures;
    std::string output_path;
    std::size_t parallelism = 1;
    double alpha = 0.05;
    /// Abort when more than this fraction of replications fail to converge.
    double max_exclusion_rate = 0.02;
    /// Wald study: 0-based coordinates set to zero under H0; empty means the last four.
    std::vector<std::size_t> wald_coordinates;
    FitOptions fit;

    void validate() const;
    std::vector<SampleSize> effective_grid() const;
};

struct MseRow {
    StructureKind structure;
    std::size_t n;
    std::size_t p;
    double avg_mse_x10;       // 10 * mean of ||b - b0||^2 / p
    double avg_squared_error;  // mean of ||b - b0||^2
    std::size_t replications_used;
    std::size_t excluded;
    double regeneration_rate;
};

struct SandwichRow {
    StructureKind structure;
    std::size_t n;
    std::size_t p;
    std::size_t coefficient;  // 1-based
    double sd;                // Monte Carlo sd, divisor reps - 1
    double sd2;               // mean sandwich standard error
    double coverage;          // fraction of (1 - alpha) intervals covering the truth
    std::size_t replications_used;
    std::size_t excluded;
};

struct WaldSample {
    std::size_t replication;
    double w;
    double z;
};

struct WaldSummary {
    StructureKind structure;
    std::size_t n;
    std::size_t p;
    std::size_t df;
    std::vector<WaldSample> samples;
    double mean_w;
    double var_w;
    double ks_distance;
    double ks_p_value;
    double mean_z;
    double sd_z;
    std::size_t excluded;
};

std::vector<MseRow> run_mse_study(const StudyConfig& config);
std::vector<SandwichRow> run_sandwich_study(const StudyConfig& config);
WaldSummary run_wald_study(const StudyConfig& config);

/// Least-squares slope of log(avg ||b - b0||^2) on log(p/n) over the rows of one structure.
double rate_slope(const std::vector<MseRow>& rows, StructureKind structure);

/// Kolmogorov-Smirnov distance of `samples` to the chi-square(df) cdf.
double ks_distance_chi_square(std::vector<double> samples, double df);

std::string mse_csv(const std::vector<MseRow>& rows);
std::string sandwich_csv(const std::vector<SandwichRow>& rows);
std::string wald_samples_csv(const WaldSummary& summary);
std::string wald_summary_text(const WaldSummary& summary);

/// Default worker count: HDGEE_JOBS if set and positive, else 1.
std::size_t default_parallelism();

}  // namespace hdgee
