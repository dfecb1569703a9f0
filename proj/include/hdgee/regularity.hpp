#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hdgee/estimator.hpp"
#include "hdgee/model.hpp"

namespace hdgee {

/// Observed counterparts of the regularity conditions on design, marginal
/// probabilities and working correlation.
struct RegularityReport {
    double design_eig_min = 0.0;  // of n^{-1} sum_i X_i^T X_i
    double design_eig_max = 0.0;
    double max_covariate_norm = 0.0;
    double covariate_norm_ratio = 0.0;  // max_covariate_norm / sqrt(p)
    std::optional<double> prob_min;  // fitted marginal means, when a fit is given
    std::optional<double> prob_max;
    std::optional<double> corr_eig_min;
    std::vector<std::string> flags;
};

inline constexpr double kEigenFlagThreshold = 1e-6;
inline constexpr double kProbabilityFlagMargin = 1e-4;

RegularityReport check_regularity(const ClusteredDataset& data, const MarginalModel& model,
                                  const FitResult* fit = nullptr);

}  // namespace hdgee
