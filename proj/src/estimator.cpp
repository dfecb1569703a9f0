#include "hdgee/estimator.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "hdgee/error.hpp"
#include "hdgee/inference.hpp"
#include "hdgee/kernels.hpp"

namespace hdgee {

void FitOptions::validate() const {
    if (max_outer_iterations == 0 || step_halving_max == 0 || !(score_tolerance > 0.0) ||
        !(parameter_tolerance > 0.0)) {
        throw InvalidArgument("fit options must all be positive");
    }
}

ClusterTerms cluster_terms(const ClusterObservation& cluster, const MarginalModel& model,
                           std::span<const double> beta) {
    const Vector theta = linear_predictor(cluster, beta);
    const std::size_t m = theta.size();
    ClusterTerms t{Vector(m), Vector(m), Vector(m), Vector(m)};
    for (std::size_t j = 0; j < m; ++j) {
        t.mean[j] = model.mean(theta[j]);
        t.variance[j] = model.variance(theta[j]);
        if (!(t.variance[j] > 0.0) || !std::isfinite(t.variance[j])) {
            throw DegenerateFit(
                fmt::format("marginal variance {} at linear predictor {}", t.variance[j], theta[j]));
        }
        t.sqrt_variance[j] = std::sqrt(t.variance[j]);
        t.residual[j] = (cluster.y[j] - t.mean[j]) / t.sqrt_variance[j];
    }
    return t;
}

namespace {

std::vector<std::size_t> sizes_of(const ClusteredDataset& data) { return data.distinct_sizes(); }

void check_beta(const ClusteredDataset& data, std::span<const double> beta) {
    if (beta.size() != data.p()) {
        throw DimensionMismatch(fmt::format("beta has length {}, data has p = {}", beta.size(), data.p()));
    }
}

/// W = A^{1/2} X for one cluster.
Matrix weighted_design(const ClusterObservation& c, const ClusterTerms& t) {
    Matrix w = c.x;
    for (std::size_t j = 0; j < c.size(); ++j) {
        for (double& v : w.row(j)) v *= t.sqrt_variance[j];
    }
    return w;
}

/// T = R^{-1} W.
Matrix left_multiply(const Matrix& rinv, const Matrix& w) {
    Matrix out(w.rows(), w.cols());
    for (std::size_t j = 0; j < w.rows(); ++j) {
        for (std::size_t k = 0; k < w.rows(); ++k) {
            kernels::axpy(rinv(j, k), w.row(k), out.row(j));
        }
    }
    return out;
}

void add_score(const ClusterObservation& c, const ClusterTerms& t, const Matrix& rinv, std::span<double> s) {
    const Vector g = rinv * t.residual;
    for (std::size_t j = 0; j < c.size(); ++j) {
        kernels::axpy(t.sqrt_variance[j] * g[j], c.x.row(j), s);
    }
}

void add_information_lower(const Matrix& w, const Matrix& tw, Matrix& h) {
    for (std::size_t j = 0; j < w.rows(); ++j) {
        kernels::rank1_lower(1.0, w.row(j), tw.row(j), h.data());
    }
}

SymmetricMatrix information_at(const ClusteredDataset& data, const MarginalModel& model,
                               std::span<const double> beta, const InverseCorrelationCache& rinv) {
    Matrix h(data.p(), data.p());
    for (const auto& c : data.clusters()) {
        const ClusterTerms t = cluster_terms(c, model, beta);
        const Matrix w = weighted_design(c, t);
        add_information_lower(w, left_multiply(rinv(c.size()), w), h);
    }
    return SymmetricMatrix::from_lower(h);
}

struct Evaluation {
    std::vector<Vector> residuals;
    CorrelationEstimate estimate;
};

Evaluation evaluate_structure(StructureKind kind, const ClusteredDataset& data, const MarginalModel& model,
                              std::span<const double> beta) {
    std::vector<Vector> residuals;
    residuals.reserve(data.n());
    for (const auto& c : data.clusters()) residuals.push_back(cluster_terms(c, model, beta).residual);
    if (kind == StructureKind::Unstructured && !data.m_common()) {
        throw InvalidArgument("unstructured working correlation requires a common cluster size");
    }
    CorrelationEstimate est = estimate_from_residuals(kind, residuals);
    return {std::move(residuals), std::move(est)};
}

double norm2(std::span<const double> v) { return std::sqrt(kernels::dot(v, v)); }

constexpr double kDivergentStep = 1e-2;

FitResult run_scoring(const ClusteredDataset& data, const MarginalModel& model, StructureKind kind,
                      ParamVector beta, const FitOptions& opts) {
    opts.validate();
    check_beta(data, beta);
    require_finite(beta, "starting value");
    const auto sizes = sizes_of(data);

    FitResult fit;
    std::vector<double> beta_norms;
    bool stalled = false;
    double last_step = 0.0;
    Evaluation eval = evaluate_structure(kind, data, model, beta);
    InverseCorrelationCache cache(eval.estimate.structure, sizes);
    Vector s = score(data, model, beta, cache);
    double norm = max_abs(s);
    fit.score_history.push_back(norm);
    beta_norms.push_back(norm2(beta));

    while (norm > opts.score_tolerance && fit.iterations < opts.max_outer_iterations && !stalled) {
        const Cholesky chol(fisher_information(data, model, beta, cache));
        const Vector step = chol.solve(s);

        double t = 1.0;
        ParamVector candidate(beta.size());
        for (std::size_t halving = 0; halving <= opts.step_halving_max; ++halving) {
            for (std::size_t k = 0; k < beta.size(); ++k) candidate[k] = beta[k] + t * step[k];
            double cand_norm = std::numeric_limits<double>::infinity();
            try {
                cand_norm = max_abs(score(data, model, candidate, cache));
            } catch (const DegenerateFit&) {
            }
            if (cand_norm < norm || halving == opts.step_halving_max) break;
            t *= 0.5;
        }
        last_step = t * max_abs(step);
        stalled = last_step <= opts.parameter_tolerance;
        beta = candidate;
        ++fit.iterations;

        eval = evaluate_structure(kind, data, model, beta);
        cache = InverseCorrelationCache(eval.estimate.structure, sizes);
        s = score(data, model, beta, cache);
        norm = max_abs(s);
        fit.score_history.push_back(norm);
        beta_norms.push_back(norm2(beta));
    }

    fit.beta_hat = beta;
    fit.structure_final = eval.estimate.structure;
    fit.tau_clamped = eval.estimate.tau_clamped;
    fit.final_score_norm = norm;
    fit.converged = norm <= opts.score_tolerance;
    bool growing = beta_norms.size() > 3;
    for (std::size_t i = beta_norms.size() - std::min<std::size_t>(beta_norms.size(), 4) + 1;
         i < beta_norms.size() && growing; ++i) {
        growing = beta_norms[i] > beta_norms[i - 1];
    }
    // Near a genuine root the Newton steps shrink quadratically. A score that vanishes while
    // steps stay large means the estimating equation is only satisfied at infinity.
    const bool diverging = growing && last_step > kDivergentStep;
    if (fit.converged && diverging) {
        fit.converged = false;
        fit.message = fmt::format("score vanished only as |beta| grew to {:.3g} (last step {:.3g}), possible separation",
                                  beta_norms.back(), last_step);
    } else if (!fit.converged) {
        fit.message = fmt::format("no root within {} iterations (score max-abs {:.3g})", fit.iterations, norm);
        if (stalled) fit.message += "; parameter change below tolerance";
        if (growing) {
            fit.message += fmt::format("; |beta| grew monotonically to {:.3g}, possible separation",
                                       beta_norms.back());
        }
    }
    if (!fit.converged) {
        try {
            sandwich_covariance(fit, data, model);
        } catch (const NotPositiveDefinite&) {
            fit.message += "; information matrix singular at the last iterate";
        }
        return fit;
    }
    sandwich_covariance(fit, data, model);
    return fit;
}

}  // namespace

Vector score(const ClusteredDataset& data, const MarginalModel& model, std::span<const double> beta,
             const InverseCorrelationCache& rinv) {
    check_beta(data, beta);
    Vector s(data.p(), 0.0);
    for (const auto& c : data.clusters()) {
        add_score(c, cluster_terms(c, model, beta), rinv(c.size()), s);
    }
    return s;
}

Vector score(const ClusteredDataset& data, const MarginalModel& model, std::span<const double> beta,
             const CorrelationStructure& structure) {
    const auto sizes = sizes_of(data);
    return score(data, model, beta, InverseCorrelationCache(structure, sizes));
}

SymmetricMatrix fisher_information(const ClusteredDataset& data, const MarginalModel& model,
                                   std::span<const double> beta, const InverseCorrelationCache& rinv) {
    check_beta(data, beta);
    return information_at(data, model, beta, rinv);
}

SymmetricMatrix fisher_information(const ClusteredDataset& data, const MarginalModel& model,
                                   std::span<const double> beta, const CorrelationStructure& structure) {
    const auto sizes = sizes_of(data);
    return fisher_information(data, model, beta, InverseCorrelationCache(structure, sizes));
}

Matrix JacobianParts::total() const {
    Matrix d = h;
    kernels::axpy(1.0, e.data(), d.data());
    kernels::axpy(1.0, g.data(), d.data());
    return d;
}

JacobianParts jacobian_parts(const ClusteredDataset& data, const MarginalModel& model,
                             std::span<const double> beta, const InverseCorrelationCache& rinv) {
    check_beta(data, beta);
    const std::size_t p = data.p();
    JacobianParts parts{fisher_information(data, model, beta, rinv).dense(), Matrix(p, p), Matrix(p, p)};
    for (const auto& c : data.clusters()) {
        const ClusterTerms t = cluster_terms(c, model, beta);
        const Matrix& ri = rinv(c.size());
        const Matrix w = weighted_design(c, t);
        const Matrix tw = left_multiply(ri, w);
        const Vector g = ri * t.residual;
        const Vector theta = linear_predictor(c, beta);
        for (std::size_t j = 0; j < c.size(); ++j) {
            const double curvature = model.d2mean(theta[j]);
            // E: c_j (R^{-1} W)_j^T X_j with c_j = mu''_j eps_j / (2 v_j)
            const double ce = curvature * t.residual[j] / (2.0 * t.variance[j]);
            // G: -(mu''_j / (2 s_j)) g_j X_j X_j^T
            const double cg = -curvature * g[j] / (2.0 * t.sqrt_variance[j]);
            const auto xj = c.x.row(j);
            const auto tj = tw.row(j);
            for (std::size_t a = 0; a < p; ++a) {
                kernels::axpy(ce * tj[a], xj, parts.e.row(a));
                kernels::axpy(cg * xj[a], xj, parts.g.row(a));
            }
        }
    }
    return parts;
}

Matrix exact_jacobian(const ClusteredDataset& data, const MarginalModel& model, std::span<const double> beta,
                      const CorrelationStructure& structure) {
    const auto sizes = sizes_of(data);
    return jacobian_parts(data, model, beta, InverseCorrelationCache(structure, sizes)).total();
}

FitResult fit_independence(const ClusteredDataset& data, const MarginalModel& model, const FitOptions& opts) {
    return run_scoring(data, model, StructureKind::Independence, ParamVector(data.p(), 0.0), opts);
}

FitResult fit_gee_from(const ClusteredDataset& data, const MarginalModel& model, StructureKind kind,
                       std::span<const double> beta_start, const FitOptions& opts) {
    return run_scoring(data, model, kind, ParamVector(beta_start.begin(), beta_start.end()), opts);
}

FitResult fit_gee(const ClusteredDataset& data, const MarginalModel& model, StructureKind kind,
                  const FitOptions& opts) {
    if (kind == StructureKind::Unstructured && !data.m_common()) {
        throw InvalidArgument("unstructured working correlation requires a common cluster size");
    }
    FitResult initial = fit_independence(data, model, opts);
    if (!initial.converged || kind == StructureKind::Independence) {
        return initial;
    }
    FitResult fit = fit_gee_from(data, model, kind, initial.beta_hat, opts);
    fit.iterations += initial.iterations;
    return fit;
}

}  // namespace hdgee
