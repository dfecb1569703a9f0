#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hdgee/model.hpp"
#include "hdgee/numerics.hpp"
#include "hdgee/working_correlation.hpp"

namespace hdgee {

struct FitOptions {
    std::size_t max_outer_iterations = 50;
    double score_tolerance = 1e-8;  // on max-abs of the score
    std::size_t step_halving_max = 10;
    double parameter_tolerance = 1e-10;

    void validate() const;
};

struct FitResult {
    ParamVector beta_hat;
    CorrelationStructure structure_final = Independence{};
    SymmetricMatrix h;
    SymmetricMatrix m_hat;
    SymmetricMatrix sigma_hat;
    std::size_t iterations = 0;
    bool converged = false;
    double final_score_norm = 0.0;
    /// Score norm at each accepted iterate, starting from the initial value.
    std::vector<double> score_history;
    bool tau_clamped = false;
    std::string message;
};

/// Per-cluster quantities at a given beta, reused by every accumulation below.
struct ClusterTerms {
    Vector mean;
    Vector variance;
    Vector sqrt_variance;
    Vector residual;  // Pearson residuals
};

ClusterTerms cluster_terms(const ClusterObservation& cluster, const MarginalModel& model,
                           std::span<const double> beta);

/// S_n(beta) = sum_i X_i^T A_i^{1/2} R^{-1} A_i^{-1/2} (Y_i - mu_i).
Vector score(const ClusteredDataset& data, const MarginalModel& model, std::span<const double> beta,
             const InverseCorrelationCache& rinv);
Vector score(const ClusteredDataset& data, const MarginalModel& model, std::span<const double> beta,
             const CorrelationStructure& structure);

/// H_n(beta) = sum_i X_i^T A_i^{1/2} R^{-1} A_i^{1/2} X_i.
SymmetricMatrix fisher_information(const ClusteredDataset& data, const MarginalModel& model,
                                   std::span<const double> beta, const InverseCorrelationCache& rinv);
SymmetricMatrix fisher_information(const ClusteredDataset& data, const MarginalModel& model,
                                   std::span<const double> beta, const CorrelationStructure& structure);

/// The three pieces of the negative score Jacobian D = H + E + G.
struct JacobianParts {
    Matrix h;
    Matrix e;
    Matrix g;
    Matrix total() const;
};

JacobianParts jacobian_parts(const ClusteredDataset& data, const MarginalModel& model,
                             std::span<const double> beta, const InverseCorrelationCache& rinv);
/// -dS_n/dbeta^T, evaluated analytically. Not symmetric in general.
Matrix exact_jacobian(const ClusteredDataset& data, const MarginalModel& model,
                      std::span<const double> beta, const CorrelationStructure& structure);

FitResult fit_independence(const ClusteredDataset& data, const MarginalModel& model,
                           const FitOptions& opts = {});

/// Alternates moment re-estimation of the working correlation with one scoring
/// step, starting from the independence fit. Fills H, M_hat and the sandwich.
FitResult fit_gee(const ClusteredDataset& data, const MarginalModel& model, StructureKind kind,
                  const FitOptions& opts = {});

/// Same as above but starting from a supplied preliminary estimate.
FitResult fit_gee_from(const ClusteredDataset& data, const MarginalModel& model, StructureKind kind,
                       std::span<const double> beta_start, const FitOptions& opts = {});

}  // namespace hdgee
