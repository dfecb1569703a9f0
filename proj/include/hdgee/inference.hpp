#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hdgee/estimator.hpp"
#include "hdgee/numerics.hpp"

namespace hdgee {

/// H0: L beta = null_value. L need not have orthonormal rows.
struct Hypothesis {
    Matrix l;
    Vector null_value;  // empty means zero

    /// Restriction of the listed coordinates (0-based) to zero.
    static Hypothesis coordinates(std::size_t p, std::span<const std::size_t> indices);
};

struct WaldResult {
    double statistic;
    std::size_t df;
    double p_value;
};

struct HighDimTestResult {
    double z;
    double quadratic_form;
    std::size_t p;
};

struct ConfidenceInterval {
    double lower;
    double upper;
};

/// sum_i X_i^T A_i^{1/2} R^{-1} eps_i eps_i^T R^{-1} A_i^{1/2} X_i. With
/// `model_based` the empirical eps_i eps_i^T is replaced by R itself.
SymmetricMatrix sandwich_meat(const ClusteredDataset& data, const MarginalModel& model,
                              std::span<const double> beta, const CorrelationStructure& structure,
                              bool model_based = false);

/// H^{-1} M H^{-1}, via the Cholesky factor of H.
SymmetricMatrix sandwich_from(const SymmetricMatrix& h, const SymmetricMatrix& meat);

/// Recomputes H, M_hat and Sigma_hat at fit.beta_hat and stores them into `fit`.
SymmetricMatrix sandwich_covariance(FitResult& fit, const ClusteredDataset& data,
                                    const MarginalModel& model);

/// beta_j +- z_{alpha/2} sqrt(Sigma_jj); `j` is 0-based.
ConfidenceInterval confidence_interval(const FitResult& fit, std::size_t j, double alpha);

WaldResult wald_test(const FitResult& fit, const Hypothesis& hyp);
WaldResult wald_test(std::span<const double> beta, const SymmetricMatrix& sigma, const Hypothesis& hyp);

/// [(b - b0)^T Sigma^{-1} (b - b0) - p] / sqrt(2p).
HighDimTestResult high_dim_test(const FitResult& fit, std::span<const double> beta_null);
HighDimTestResult high_dim_test(std::span<const double> beta, const SymmetricMatrix& sigma,
                                std::span<const double> beta_null);

/// Replicated fits at one sample size.
struct ReplicatedFits {
    std::size_t n;
    std::vector<FitResult> fits;
};

struct ConsistencyRow {
    std::size_t n;
    std::size_t replications;
    /// max-abs of n (C Sigma_hat_avg C^T - C Sigma_mc C^T)
    double scaled_difference;
};

struct ConsistencyReport {
    std::vector<ConsistencyRow> rows;
    bool decreasing;
};

/// Compares the replication-averaged sandwich with the Monte Carlo covariance
/// of beta_hat along the rows of C, scaled by n.
ConsistencyReport sandwich_consistency_probe(std::span<const ReplicatedFits> fit_seq, const Matrix& c);

}  // namespace hdgee
