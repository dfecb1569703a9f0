#include "hdgee/regularity.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "hdgee/kernels.hpp"

namespace hdgee {

RegularityReport check_regularity(const ClusteredDataset& data, const MarginalModel& model,
                                  const FitResult* fit) {
    RegularityReport r;
    const std::size_t p = data.p();
    Matrix gram(p, p);
    for (const auto& c : data.clusters()) {
        for (std::size_t j = 0; j < c.size(); ++j) {
            const auto row = c.x.row(j);
            kernels::rank1_lower(1.0, row, row, gram.data());
            r.max_covariate_norm = std::max(r.max_covariate_norm, std::sqrt(kernels::dot(row, row)));
        }
    }
    for (double& v : gram.data()) v /= static_cast<double>(data.n());
    const auto ev = eigen_extremes(SymmetricMatrix::from_lower(gram));
    r.design_eig_min = ev.min;
    r.design_eig_max = ev.max;
    r.covariate_norm_ratio = r.max_covariate_norm / std::sqrt(static_cast<double>(p));
    if (r.design_eig_min <= kEigenFlagThreshold) {
        r.flags.push_back(fmt::format("design_eig_min {:.3g} <= {:g}", r.design_eig_min, kEigenFlagThreshold));
    }

    if (fit != nullptr && fit->beta_hat.size() == p) {
        double lo = 1.0;
        double hi = 0.0;
        for (const auto& c : data.clusters()) {
            for (double theta : linear_predictor(c, fit->beta_hat)) {
                const double mu = model.mean(theta);
                lo = std::min(lo, mu);
                hi = std::max(hi, mu);
            }
        }
        if (model.family() == Family::BinaryLogit) {
            r.prob_min = lo;
            r.prob_max = hi;
            if (lo < kProbabilityFlagMargin || hi > 1.0 - kProbabilityFlagMargin) {
                r.flags.push_back(fmt::format("fitted probabilities [{:.3g}, {:.3g}] leave [{:g}, {:g}]", lo, hi,
                                              kProbabilityFlagMargin, 1.0 - kProbabilityFlagMargin));
            }
        }
        const std::size_t m = data.max_cluster_size();
        const auto corr = eigen_extremes(SymmetricMatrix::symmetrized(correlation_matrix(fit->structure_final, m)));
        r.corr_eig_min = corr.min;
        if (corr.min <= kEigenFlagThreshold) {
            r.flags.push_back(fmt::format("working correlation eig_min {:.3g} <= {:g}", corr.min, kEigenFlagThreshold));
        }
    }
    return r;
}

}  // namespace hdgee
