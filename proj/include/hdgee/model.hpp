#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "hdgee/numerics.hpp"

namespace hdgee {

enum class Family { BinaryLogit, PoissonLog };

std::string_view family_name(Family f) noexcept;
Family parse_family(std::string_view name);

/// Canonical-link marginal model with dispersion fixed at 1, so the variance
/// function coincides with the derivative of the mean.
class MarginalModel {
public:
    constexpr explicit MarginalModel(Family family) noexcept : family_(family) {}

    constexpr Family family() const noexcept { return family_; }

    double mean(double theta) const noexcept;
    double variance(double theta) const noexcept { return dmean(theta); }
    double dmean(double theta) const noexcept;
    double d2mean(double theta) const noexcept;
    double d3mean(double theta) const noexcept;

    /// Whether `y` is an admissible response value for this family.
    bool admits(double y) const noexcept;

private:
    Family family_;
};

using ParamVector = std::vector<double>;

struct ClusterObservation {
    Vector y;
    Matrix x;  // m_i x p, row j is the covariate vector of observation j

    std::size_t size() const noexcept { return y.size(); }
};

/// n independent clusters sharing a covariate dimension p.
class ClusteredDataset {
public:
    ClusteredDataset() = default;
    /// Validates shapes and (for `family`) the response values.
    ClusteredDataset(std::vector<ClusterObservation> clusters,
                     std::optional<Family> family = std::nullopt);

    std::size_t n() const noexcept { return clusters_.size(); }
    std::size_t p() const noexcept { return p_; }
    std::optional<std::size_t> m_common() const noexcept { return m_common_; }
    std::size_t max_cluster_size() const noexcept { return m_max_; }
    std::size_t total_observations() const noexcept { return total_; }

    const ClusterObservation& operator[](std::size_t i) const { return clusters_[i]; }
    std::span<const ClusterObservation> clusters() const noexcept { return clusters_; }

    /// Sorted distinct cluster sizes.
    std::vector<std::size_t> distinct_sizes() const;

private:
    std::vector<ClusterObservation> clusters_;
    std::size_t p_ = 0;
    std::size_t m_max_ = 0;
    std::size_t total_ = 0;
    std::optional<std::size_t> m_common_;
};

Vector linear_predictor(const ClusterObservation& cluster, std::span<const double> beta);
Vector marginal_mean(const MarginalModel& model, std::span<const double> theta);
Vector marginal_variance(const MarginalModel& model, std::span<const double> theta);

/// (y_j - mu_j) / sqrt(v_j). Throws DegenerateFit when a variance underflows to 0.
Vector pearson_residuals(const ClusterObservation& cluster, const MarginalModel& model,
                         std::span<const double> beta);

void require_finite(std::span<const double> beta, std::string_view what);

}  // namespace hdgee
