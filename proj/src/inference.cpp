#include "hdgee/inference.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "hdgee/distributions.hpp"
#include "hdgee/error.hpp"
#include "hdgee/kernels.hpp"

namespace hdgee {

Hypothesis Hypothesis::coordinates(std::size_t p, std::span<const std::size_t> indices) {
    Hypothesis h{Matrix(indices.size(), p), Vector(indices.size(), 0.0)};
    for (std::size_t r = 0; r < indices.size(); ++r) {
        if (indices[r] >= p) {
            throw InvalidArgument(fmt::format("coordinate {} out of range for p = {}", indices[r], p));
        }
        h.l(r, indices[r]) = 1.0;
    }
    return h;
}

SymmetricMatrix sandwich_meat(const ClusteredDataset& data, const MarginalModel& model,
                              std::span<const double> beta, const CorrelationStructure& structure,
                              bool model_based) {
    const std::size_t p = data.p();
    const auto sizes = data.distinct_sizes();
    const InverseCorrelationCache rinv(structure, sizes);
    Matrix meat(p, p);
    Vector u(p);
    for (const auto& c : data.clusters()) {
        const ClusterTerms t = cluster_terms(c, model, beta);
        const Matrix& ri = rinv(c.size());
        std::fill(u.begin(), u.end(), 0.0);
        if (model_based) {
            // eps eps^T replaced by R: W^T R^{-1} R R^{-1} W = W^T R^{-1} W, a sum of
            // outer products of the rows of W against R^{-1} W.
            const std::size_t m = c.size();
            for (std::size_t j = 0; j < m; ++j) {
                for (std::size_t k = 0; k < m; ++k) {
                    const double coef = ri(j, k) * t.sqrt_variance[j] * t.sqrt_variance[k];
                    kernels::rank1_lower(coef, c.x.row(j), c.x.row(k), meat.data());
                }
            }
            continue;
        }
        // u_i = W^T R^{-1} eps = sum_j s_j (R^{-1} eps)_j X_j
        const Vector g = ri * t.residual;
        for (std::size_t j = 0; j < c.size(); ++j) {
            kernels::axpy(t.sqrt_variance[j] * g[j], c.x.row(j), u);
        }
        kernels::rank1_lower(1.0, u, u, meat.data());
    }
    return SymmetricMatrix::from_lower(meat);
}

SymmetricMatrix sandwich_from(const SymmetricMatrix& h, const SymmetricMatrix& meat) {
    const Cholesky chol(h);
    // H^{-1} M H^{-1} = (H^{-1} (H^{-1} M)^T) since M and H are symmetric
    const Matrix left = chol.solve(meat.dense());
    const Matrix both = chol.solve(left.transpose());
    return SymmetricMatrix::symmetrized(both);
}

SymmetricMatrix sandwich_covariance(FitResult& fit, const ClusteredDataset& data, const MarginalModel& model) {
    fit.h = fisher_information(data, model, fit.beta_hat, fit.structure_final);
    fit.m_hat = sandwich_meat(data, model, fit.beta_hat, fit.structure_final);
    fit.sigma_hat = sandwich_from(fit.h, fit.m_hat);
    return fit.sigma_hat;
}

ConfidenceInterval confidence_interval(const FitResult& fit, std::size_t j, double alpha) {
    if (j >= fit.beta_hat.size()) {
        throw InvalidArgument(fmt::format("coefficient index {} out of range (p = {})", j, fit.beta_hat.size()));
    }
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw InvalidArgument(fmt::format("alpha must lie in (0, 1], got {}", alpha));
    }
    if (fit.sigma_hat.dimension() != fit.beta_hat.size()) {
        throw InvalidArgument("fit carries no sandwich covariance");
    }
    const double z = alpha == 1.0 ? 0.0 : normal_quantile(1.0 - 0.5 * alpha);
    const double se = std::sqrt(std::max(0.0, fit.sigma_hat(j, j)));
    return {fit.beta_hat[j] - z * se, fit.beta_hat[j] + z * se};
}

WaldResult wald_test(std::span<const double> beta, const SymmetricMatrix& sigma, const Hypothesis& hyp) {
    const std::size_t p = beta.size();
    const std::size_t l = hyp.l.rows();
    if (hyp.l.cols() != p || sigma.dimension() != p) {
        throw DimensionMismatch("hypothesis matrix, covariance and beta disagree in dimension");
    }
    if (l == 0 || l > p) {
        throw InvalidArgument(fmt::format("hypothesis has {} rows for p = {}", l, p));
    }
    if (!hyp.null_value.empty() && hyp.null_value.size() != l) {
        throw DimensionMismatch("null value length does not match hypothesis rows");
    }
    Vector d = hyp.l * beta;
    if (!hyp.null_value.empty()) {
        for (std::size_t r = 0; r < l; ++r) d[r] -= hyp.null_value[r];
    }
    const Matrix ls = hyp.l * sigma.dense();
    const Matrix lslt = ls * hyp.l.transpose();
    const double w = std::max(0.0, Cholesky(SymmetricMatrix::symmetrized(lslt)).inverse_quadratic_form(d));
    return {w, l, chi_square_upper(w, static_cast<double>(l))};
}

WaldResult wald_test(const FitResult& fit, const Hypothesis& hyp) {
    return wald_test(fit.beta_hat, fit.sigma_hat, hyp);
}

HighDimTestResult high_dim_test(std::span<const double> beta, const SymmetricMatrix& sigma,
                                std::span<const double> beta_null) {
    const std::size_t p = beta.size();
    if (beta_null.size() != p || sigma.dimension() != p) {
        throw DimensionMismatch("high-dimensional test inputs disagree in dimension");
    }
    Vector d(p);
    for (std::size_t k = 0; k < p; ++k) d[k] = beta[k] - beta_null[k];
    const double q = Cholesky(sigma).inverse_quadratic_form(d);
    const double pd = static_cast<double>(p);
    return {(q - pd) / std::sqrt(2.0 * pd), q, p};
}

HighDimTestResult high_dim_test(const FitResult& fit, std::span<const double> beta_null) {
    return high_dim_test(fit.beta_hat, fit.sigma_hat, beta_null);
}

ConsistencyReport sandwich_consistency_probe(std::span<const ReplicatedFits> fit_seq, const Matrix& c) {
    if (fit_seq.size() < 2) {
        throw InvalidArgument("consistency probe needs at least two sample sizes");
    }
    ConsistencyReport report{{}, true};
    for (const auto& group : fit_seq) {
        const std::size_t reps = group.fits.size();
        if (reps < 100) {
            throw InvalidArgument(
                fmt::format("consistency probe needs >= 100 replications, n = {} has {}", group.n, reps));
        }
        const std::size_t p = group.fits.front().beta_hat.size();
        if (c.cols() != p) {
            throw DimensionMismatch("contrast matrix columns do not match p");
        }
        Vector mean(p, 0.0);
        Matrix sigma_avg(p, p);
        for (const auto& f : group.fits) {
            kernels::axpy(1.0, f.beta_hat, mean);
            kernels::axpy(1.0, f.sigma_hat.dense().data(), sigma_avg.data());
        }
        const double inv = 1.0 / static_cast<double>(reps);
        for (double& v : mean) v *= inv;
        for (double& v : sigma_avg.data()) v *= inv;
        Matrix mc(p, p);
        Vector dev(p);
        for (const auto& f : group.fits) {
            for (std::size_t k = 0; k < p; ++k) dev[k] = f.beta_hat[k] - mean[k];
            kernels::rank1_lower(1.0, dev, dev, mc.data());
        }
        const double inv1 = 1.0 / static_cast<double>(reps - 1);
        const SymmetricMatrix mc_sym = SymmetricMatrix::from_lower(mc);
        Matrix mc_scaled = mc_sym.dense();
        for (double& v : mc_scaled.data()) v *= inv1;
        const Matrix ct = c.transpose();
        const Matrix diff = c * sigma_avg * ct - c * mc_scaled * ct;
        report.rows.push_back({group.n, reps, static_cast<double>(group.n) * max_abs(diff)});
    }
    for (std::size_t i = 1; i < report.rows.size(); ++i) {
        if (report.rows[i].scaled_difference > report.rows[i - 1].scaled_difference) report.decreasing = false;
    }
    return report;
}

}  // namespace hdgee
