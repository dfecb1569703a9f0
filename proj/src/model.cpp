#include "hdgee/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "hdgee/error.hpp"
#include "hdgee/kernels.hpp"

namespace hdgee {
namespace {

// Largest double below 1; the logistic mean is kept strictly inside (0, 1).
constexpr double kBelowOne = 1.0 - 0x1p-53;

}  // namespace

std::string_view family_name(Family f) noexcept {
    return f == Family::BinaryLogit ? "binary" : "poisson";
}

Family parse_family(std::string_view name) {
    if (name == "binary" || name == "logit" || name == "binomial") return Family::BinaryLogit;
    if (name == "poisson" || name == "log") return Family::PoissonLog;
    throw InvalidArgument(fmt::format("unknown family '{}' (expected binary or poisson)", name));
}

double MarginalModel::mean(double theta) const noexcept {
    if (family_ == Family::PoissonLog) {
        return std::exp(theta);
    }
    if (theta >= 0.0) {
        return std::min(1.0 / (1.0 + std::exp(-theta)), kBelowOne);
    }
    const double e = std::exp(theta);
    return std::max(e / (1.0 + e), std::numeric_limits<double>::denorm_min());
}

double MarginalModel::dmean(double theta) const noexcept {
    if (family_ == Family::PoissonLog) {
        return std::exp(theta);
    }
    const double e = std::exp(-std::abs(theta));
    const double d = 1.0 + e;
    return e / (d * d);
}

double MarginalModel::d2mean(double theta) const noexcept {
    if (family_ == Family::PoissonLog) {
        return std::exp(theta);
    }
    // v (1 - 2 mu), with 1 - 2 mu = -tanh(theta / 2)
    return -dmean(theta) * std::tanh(0.5 * theta);
}

double MarginalModel::d3mean(double theta) const noexcept {
    if (family_ == Family::PoissonLog) {
        return std::exp(theta);
    }
    const double v = dmean(theta);
    return v * (1.0 - 6.0 * v);
}

bool MarginalModel::admits(double y) const noexcept {
    if (!std::isfinite(y)) return false;
    if (family_ == Family::BinaryLogit) return y == 0.0 || y == 1.0;
    return y >= 0.0 && y == std::floor(y);
}

ClusteredDataset::ClusteredDataset(std::vector<ClusterObservation> clusters, std::optional<Family> family)
    : clusters_(std::move(clusters)) {
    if (clusters_.empty()) {
        throw InvalidArgument("dataset needs at least one cluster");
    }
    p_ = clusters_.front().x.cols();
    if (p_ == 0) {
        throw InvalidArgument("covariate dimension must be at least 1");
    }
    std::size_t m_min = clusters_.front().size();
    const MarginalModel model(family.value_or(Family::BinaryLogit));
    for (std::size_t i = 0; i < clusters_.size(); ++i) {
        const auto& c = clusters_[i];
        if (c.size() == 0) {
            throw InvalidArgument(fmt::format("cluster {} is empty", i));
        }
        if (c.x.rows() != c.size() || c.x.cols() != p_) {
            throw DimensionMismatch(fmt::format("cluster {}: X is {}x{}, expected {}x{}", i, c.x.rows(),
                                                c.x.cols(), c.size(), p_));
        }
        for (std::size_t j = 0; j < c.size(); ++j) {
            if (family && !model.admits(c.y[j])) {
                throw InvalidArgument(fmt::format("cluster {} observation {}: response {} not valid for {}",
                                                  i, j, c.y[j], family_name(*family)));
            }
        }
        m_min = std::min(m_min, c.size());
        m_max_ = std::max(m_max_, c.size());
        total_ += c.size();
    }
    if (m_min == m_max_) {
        m_common_ = m_max_;
    }
}

std::vector<std::size_t> ClusteredDataset::distinct_sizes() const {
    std::set<std::size_t> sizes;
    for (const auto& c : clusters_) sizes.insert(c.size());
    return {sizes.begin(), sizes.end()};
}

Vector linear_predictor(const ClusterObservation& cluster, std::span<const double> beta) {
    if (cluster.x.cols() != beta.size()) {
        throw DimensionMismatch(
            fmt::format("covariates have {} columns but beta has length {}", cluster.x.cols(), beta.size()));
    }
    return cluster.x * beta;
}

Vector marginal_mean(const MarginalModel& model, std::span<const double> theta) {
    Vector out(theta.size());
    std::transform(theta.begin(), theta.end(), out.begin(), [&](double t) { return model.mean(t); });
    return out;
}

Vector marginal_variance(const MarginalModel& model, std::span<const double> theta) {
    Vector out(theta.size());
    std::transform(theta.begin(), theta.end(), out.begin(), [&](double t) { return model.variance(t); });
    return out;
}

Vector pearson_residuals(const ClusterObservation& cluster, const MarginalModel& model,
                         std::span<const double> beta) {
    const Vector theta = linear_predictor(cluster, beta);
    Vector out(theta.size());
    for (std::size_t j = 0; j < theta.size(); ++j) {
        const double v = model.variance(theta[j]);
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw DegenerateFit(fmt::format("marginal variance {} at linear predictor {}", v, theta[j]));
        }
        out[j] = (cluster.y[j] - model.mean(theta[j])) / std::sqrt(v);
    }
    return out;
}

void require_finite(std::span<const double> beta, std::string_view what) {
    for (std::size_t k = 0; k < beta.size(); ++k) {
        if (!std::isfinite(beta[k])) {
            throw InvalidArgument(fmt::format("{}: entry {} is not finite", what, k));
        }
    }
}

}  // namespace hdgee
