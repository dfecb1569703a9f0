#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "hdgee/model.hpp"
#include "hdgee/numerics.hpp"

namespace hdgee {

struct Independence {};
struct Exchangeable {
    double tau;
};
struct AutoRegressive1 {
    double tau;
};
struct Unstructured {
    SymmetricMatrix r;
};

using CorrelationStructure = std::variant<Independence, Exchangeable, AutoRegressive1, Unstructured>;

enum class StructureKind { Independence, Exchangeable, AutoRegressive1, Unstructured };

StructureKind kind_of(const CorrelationStructure& s) noexcept;
/// Short names used in tables and on the command line: IN, CS, AR-1, UN.
std::string_view structure_label(StructureKind k) noexcept;
StructureKind parse_structure(std::string_view name);

/// Open validity interval for an exchangeable tau at cluster size m.
struct TauInterval {
    double lower;
    double upper;
};
TauInterval exchangeable_interval(std::size_t m);
TauInterval ar1_interval();

/// Distance kept from the open validity boundary when clamping moment estimates.
inline constexpr double kTauClampMargin = 1e-6;

Matrix correlation_matrix(const CorrelationStructure& s, std::size_t m);
Matrix inverse_correlation(const Matrix& r);

struct TauEstimate {
    double value;
    double raw;
    bool clamped;
};

/// Pairwise-product moment estimator, clamped to the SPD interval of the largest m.
TauEstimate estimate_exchangeable_tau(std::span<const Vector> residuals);
/// Lag-1 product moment estimator, clamped to (-1, 1) shrunk by kTauClampMargin.
TauEstimate estimate_ar1_tau(std::span<const Vector> residuals);

struct CorrelationEstimate {
    CorrelationStructure structure;
    std::size_t sample_size_used = 0;
    double condition_number = 1.0;
    bool tau_clamped = false;
    /// Unstructured only: some diagonal entry left [0.5, 2.0].
    bool diagonal_out_of_band = false;
};

/// Average outer product of Pearson residual vectors (no diagonal normalization
/// unless `normalize` is set). Requires a common cluster size.
CorrelationEstimate estimate_unstructured(const ClusteredDataset& data, const MarginalModel& model,
                                          std::span<const double> beta, bool normalize = false);

/// Moment estimate of the given structure kind from per-cluster Pearson residuals.
CorrelationEstimate estimate_from_residuals(StructureKind kind, std::span<const Vector> residuals);

/// Moment estimate of the given structure kind from residuals at beta.
CorrelationEstimate estimate_structure(StructureKind kind, const ClusteredDataset& data,
                                       const MarginalModel& model, std::span<const double> beta);

/// R^{-1} materialized once per distinct cluster size.
class InverseCorrelationCache {
public:
    InverseCorrelationCache(const CorrelationStructure& s, std::span<const std::size_t> sizes);
    const Matrix& operator()(std::size_t m) const;

private:
    std::map<std::size_t, Matrix> by_size_;
};

}  // namespace hdgee
