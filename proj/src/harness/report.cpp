#include "hdgee/report.hpp"

#include <cmath>
#include <ostream>
#include <string>

#include <fmt/format.h>

#include "hdgee/inference.hpp"
#include "hdgee/kernels.hpp"

namespace hdgee {
namespace {

std::string structure_detail(const CorrelationStructure& s) {
    if (const auto* cs = std::get_if<Exchangeable>(&s)) return fmt::format("{:.10g}", cs->tau);
    if (const auto* ar = std::get_if<AutoRegressive1>(&s)) return fmt::format("{:.10g}", ar->tau);
    if (const auto* un = std::get_if<Unstructured>(&s)) {
        std::string out;
        for (std::size_t j = 0; j < un->r.dimension(); ++j) {
            for (std::size_t k = 0; k < un->r.dimension(); ++k) {
                if (!out.empty()) out += ' ';
                out += fmt::format("{:.10g}", un->r(j, k));
            }
        }
        return out;
    }
    return "-";
}

std::string optional_value(const std::optional<double>& v) {
    return v ? fmt::format("{:.10g}", *v) : std::string("-");
}

}  // namespace

void write_fit_report(std::ostream& out, const FitResult& fit, const ClusteredDataset& data,
                      const MarginalModel& model, StructureKind kind, double alpha,
                      const RegularityReport& regularity) {
    std::string text;
    text += fmt::format("family = {}\n", family_name(model.family()));
    text += fmt::format("structure = {}\n", structure_label(kind));
    text += fmt::format("n = {}\np = {}\nobservations = {}\n", data.n(), data.p(), data.total_observations());
    text += fmt::format("converged = {}\niterations = {}\nfinal_score_norm = {:.6g}\n", fit.converged ? "true" : "false",
                        fit.iterations, fit.final_score_norm);
    if (!fit.message.empty()) text += fmt::format("message = {}\n", fit.message);
    text += fmt::format("working_correlation = {}\n", structure_detail(fit.structure_final));
    text += fmt::format("tau_clamped = {}\n", fit.tau_clamped ? "true" : "false");
    text += fmt::format("alpha = {:g}\n", alpha);
    text += fmt::format("kernel_isa = {}\n", kernels::isa_name(kernels::active_isa()));
    for (std::size_t j = 0; j < fit.beta_hat.size(); ++j) {
        const auto ci = confidence_interval(fit, j, alpha);
        text += fmt::format("beta[{}] = {:.10g} se = {:.10g} ci = [{:.10g}, {:.10g}]\n", j + 1, fit.beta_hat[j],
                            std::sqrt(std::max(0.0, fit.sigma_hat(j, j))), ci.lower, ci.upper);
    }
    text += fmt::format("design_eig_min = {:.10g}\ndesign_eig_max = {:.10g}\n", regularity.design_eig_min,
                        regularity.design_eig_max);
    text += fmt::format("max_covariate_norm = {:.10g}\ncovariate_norm_ratio = {:.10g}\n", regularity.max_covariate_norm,
                        regularity.covariate_norm_ratio);
    text += fmt::format("prob_min = {}\nprob_max = {}\ncorr_eig_min = {}\n", optional_value(regularity.prob_min),
                        optional_value(regularity.prob_max), optional_value(regularity.corr_eig_min));
    for (const auto& flag : regularity.flags) text += fmt::format("flag = {}\n", flag);
    out << text;
}

}  // namespace hdgee
