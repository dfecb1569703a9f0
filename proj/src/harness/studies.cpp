#include "hdgee/studies.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <thread>

#include <fmt/format.h>

#include "hdgee/distributions.hpp"
#include "hdgee/error.hpp"
#include "hdgee/inference.hpp"

namespace hdgee {
namespace {

/// Runs fn(i) for i in [0, count) on `jobs` workers. Each index writes only its
/// own slot, so results do not depend on scheduling. The exception of the
/// lowest failing index is rethrown.
template <class Fn>
void parallel_for(std::size_t count, std::size_t jobs, Fn&& fn) {
    std::vector<std::exception_ptr> errors(count);
    const auto guarded = [&](std::size_t i) {
        try {
            fn(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(count, 1));
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i) guarded(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> workers;
        workers.reserve(jobs);
        for (std::size_t w = 0; w < jobs; ++w) {
            workers.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) guarded(i);
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

/// Fit failures that count as an excluded replication rather than a study error.
template <class Fn>
std::optional<FitResult> try_fit(Fn&& fn) {
    try {
        FitResult fit = fn();
        if (!fit.converged) return std::nullopt;
        return fit;
    } catch (const NotPositiveDefinite&) {
    } catch (const DegenerateFit&) {
    } catch (const NumericError&) {
    }
    return std::nullopt;
}

SimulatedData generate(const SimDesign& design, std::size_t rep) {
    try {
        return gen_dataset(design, rep);
    } catch (const BahadurInvalid& e) {
        throw StudyAborted(fmt::format("replication {}: cluster regeneration exhausted ({})", rep, e.what()));
    }
}

void check_exclusions(const StudyConfig& config, std::size_t excluded, std::size_t reps, std::string_view what) {
    const double rate = static_cast<double>(excluded) / static_cast<double>(reps);
    if (rate > config.max_exclusion_rate) {
        throw StudyAborted(fmt::format("{}: {} of {} replications failed to converge ({:.1f}% > {:.1f}%)", what,
                                       excluded, reps, 100.0 * rate, 100.0 * config.max_exclusion_rate));
    }
}

SimDesign design_for(const StudyConfig& config, const SampleSize& size) {
    SimDesign d = config.design;
    d.n = size.n;
    d.p_override = size.p;
    d.validate();
    return d;
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty()) return;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(fmt::format("cannot write '{}'", path));
    out << text;
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance_of(const std::vector<double>& v) {
    if (v.size() < 2) return std::nan("");
    const double mu = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - mu) * (x - mu);
    return ss / static_cast<double>(v.size() - 1);
}

}  // namespace

void StudyConfig::validate() const {
    design.validate();
    if (study == StudyKind::MseTable && structures.empty()) {
        throw InvalidArgument("MSE study needs at least one working correlation structure");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
    if (!(max_exclusion_rate >= 0.0)) throw InvalidArgument("max_exclusion_rate must be >= 0");
    fit.validate();
}

std::vector<SampleSize> StudyConfig::effective_grid() const {
    if (!grid.empty()) return grid;
    return {SampleSize{design.n, design.p_override}};
}

std::vector<MseRow> run_mse_study(const StudyConfig& config) {
    config.validate();
    const std::size_t reps = config.design.replications;
    const std::size_t ns = config.structures.size();
    std::vector<MseRow> rows;
    for (const auto& size : config.effective_grid()) {
        const SimDesign design = design_for(config, size);
        const std::size_t p = design.p();
        // errors[rep * ns + s]: squared error, absent when excluded
        std::vector<std::optional<double>> errors(reps * ns);
        std::vector<std::size_t> regenerated(reps, 0);
        parallel_for(reps, config.parallelism, [&](std::size_t rep) {
            const SimulatedData sim = generate(design, rep);
            regenerated[rep] = sim.diagnostics.clusters_regenerated;
            const MarginalModel model(design.family);
            const auto initial = try_fit([&] { return fit_independence(sim.data, model, config.fit); });
            for (std::size_t s = 0; s < ns; ++s) {
                if (!initial) continue;
                const StructureKind kind = config.structures[s];
                const auto fit = kind == StructureKind::Independence
                                     ? initial
                                     : try_fit([&] {
                                           return fit_gee_from(sim.data, model, kind, initial->beta_hat, config.fit);
                                       });
                if (!fit) continue;
                double sq = 0.0;
                for (std::size_t k = 0; k < p; ++k) {
                    const double d = fit->beta_hat[k] - sim.beta0[k];
                    sq += d * d;
                }
                errors[rep * ns + s] = sq;
            }
        });
        const double regen = static_cast<double>(std::accumulate(regenerated.begin(), regenerated.end(), std::size_t{0})) /
                             static_cast<double>(reps * design.n);
        for (std::size_t s = 0; s < ns; ++s) {
            double total = 0.0;
            std::size_t used = 0;
            for (std::size_t rep = 0; rep < reps; ++rep) {
                if (const auto& e = errors[rep * ns + s]) {
                    total += *e;
                    ++used;
                }
            }
            const std::size_t excluded = reps - used;
            check_exclusions(config, excluded, reps,
                             fmt::format("n={} {}", design.n, structure_label(config.structures[s])));
            const double avg = total / static_cast<double>(used);
            rows.push_back({config.structures[s], design.n, p, 10.0 * avg / static_cast<double>(p), avg, used,
                            excluded, regen});
        }
    }
    write_text(config.output_path, mse_csv(rows));
    return rows;
}

std::vector<SandwichRow> run_sandwich_study(const StudyConfig& config) {
    config.validate();
    const std::size_t reps = config.design.replications;
    std::vector<StructureKind> structures = config.structures;
    if (structures.empty()) structures.push_back(StructureKind::Unstructured);
    std::vector<SandwichRow> rows;
    for (const auto& size : config.effective_grid()) {
        const SimDesign design = design_for(config, size);
        const std::size_t p = design.p();
        const std::size_t k = p / 4;
        std::vector<std::size_t> coefs;
        for (std::size_t c : {k, 2 * k, 3 * k, p}) {
            if (c >= 1 && std::find(coefs.begin(), coefs.end(), c) == coefs.end()) coefs.push_back(c);
        }
        const std::size_t nc = coefs.size();
        for (const StructureKind kind : structures) {
            struct Outcome {
                bool ok = false;
                std::vector<double> beta, se;
                std::vector<bool> covered;
            };
            std::vector<Outcome> outcomes(reps);
            parallel_for(reps, config.parallelism, [&](std::size_t rep) {
                const SimulatedData sim = generate(design, rep);
                const MarginalModel model(design.family);
                const auto fit = try_fit([&] { return fit_gee(sim.data, model, kind, config.fit); });
                if (!fit) return;
                Outcome o{true, {}, {}, {}};
                for (std::size_t c : coefs) {
                    const std::size_t j = c - 1;
                    const auto ci = confidence_interval(*fit, j, config.alpha);
                    o.beta.push_back(fit->beta_hat[j]);
                    o.se.push_back(std::sqrt(fit->sigma_hat(j, j)));
                    o.covered.push_back(ci.lower <= sim.beta0[j] && sim.beta0[j] <= ci.upper);
                }
                outcomes[rep] = std::move(o);
            });
            const std::size_t used =
                static_cast<std::size_t>(std::count_if(outcomes.begin(), outcomes.end(), [](const Outcome& o) { return o.ok; }));
            check_exclusions(config, reps - used, reps, fmt::format("n={} {}", design.n, structure_label(kind)));
            for (std::size_t c = 0; c < nc; ++c) {
                std::vector<double> b, se;
                std::size_t covered = 0;
                for (const auto& o : outcomes) {
                    if (!o.ok) continue;
                    b.push_back(o.beta[c]);
                    se.push_back(o.se[c]);
                    covered += o.covered[c] ? 1 : 0;
                }
                rows.push_back({kind, design.n, p, coefs[c], std::sqrt(variance_of(b)), mean_of(se),
                                static_cast<double>(covered) / static_cast<double>(used), used, reps - used});
            }
        }
    }
    write_text(config.output_path, sandwich_csv(rows));
    return rows;
}

WaldSummary run_wald_study(const StudyConfig& config) {
    config.validate();
    SimDesign design = config.design;
    design.validate();
    const std::size_t reps = design.replications;
    const std::size_t p = design.p();
    const StructureKind kind = config.structures.empty() ? StructureKind::Unstructured : config.structures.front();
    std::vector<std::size_t> coords = config.wald_coordinates;
    if (coords.empty()) {
        if (p < 4) throw InvalidArgument("Wald study needs p >= 4 for the default hypothesis");
        for (std::size_t j = p - 4; j < p; ++j) coords.push_back(j);
    }
    const Hypothesis hyp = Hypothesis::coordinates(p, coords);

    std::vector<std::optional<WaldSample>> samples(reps);
    parallel_for(reps, config.parallelism, [&](std::size_t rep) {
        const SimulatedData sim = generate(design, rep);
        const MarginalModel model(design.family);
        const auto fit = try_fit([&] { return fit_gee(sim.data, model, kind, config.fit); });
        if (!fit) return;
        try {
            const auto w = wald_test(*fit, hyp);
            const auto z = high_dim_test(*fit, sim.beta0);
            samples[rep] = WaldSample{rep, w.statistic, z.z};
        } catch (const NotPositiveDefinite&) {
        }
    });

    WaldSummary summary{kind, design.n, p, coords.size(), {}, 0, 0, 0, 0, 0, 0, 0};
    std::vector<double> w, z;
    for (const auto& s : samples) {
        if (!s) continue;
        summary.samples.push_back(*s);
        w.push_back(s->w);
        z.push_back(s->z);
    }
    summary.excluded = reps - summary.samples.size();
    check_exclusions(config, summary.excluded, reps, fmt::format("n={} Wald {}", design.n, structure_label(kind)));
    summary.mean_w = mean_of(w);
    summary.var_w = variance_of(w);
    summary.ks_distance = ks_distance_chi_square(w, static_cast<double>(summary.df));
    const double root = std::sqrt(static_cast<double>(w.size()));
    summary.ks_p_value = kolmogorov_upper((root + 0.12 + 0.11 / root) * summary.ks_distance);
    summary.mean_z = mean_of(z);
    summary.sd_z = std::sqrt(variance_of(z));

    if (!config.output_path.empty()) {
        write_text(config.output_path, wald_samples_csv(summary));
        write_text(config.output_path + ".summary", wald_summary_text(summary));
    }
    return summary;
}

double rate_slope(const std::vector<MseRow>& rows, StructureKind structure) {
    std::vector<double> xs, ys;
    for (const auto& r : rows) {
        if (r.structure != structure) continue;
        xs.push_back(std::log(static_cast<double>(r.p) / static_cast<double>(r.n)));
        ys.push_back(std::log(r.avg_squared_error));
    }
    if (xs.size() < 2) throw InvalidArgument("rate slope needs at least two sample sizes");
    const double mx = mean_of(xs);
    const double my = mean_of(ys);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    return sxy / sxx;
}

double ks_distance_chi_square(std::vector<double> samples, double df) {
    if (samples.empty()) throw InvalidArgument("KS distance of an empty sample");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = chi_square_cdf(samples[i], df);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

std::string mse_csv(const std::vector<MseRow>& rows) {
    std::string out = "structure,n,p,avg_mse_x10,avg_squared_error,replications,excluded,regeneration_rate\n";
    for (const auto& r : rows) {
        out += fmt::format("{},{},{},{:.6f},{:.8f},{},{},{:.6f}\n", structure_label(r.structure), r.n, r.p,
                           r.avg_mse_x10, r.avg_squared_error, r.replications_used, r.excluded, r.regeneration_rate);
    }
    return out;
}

std::string sandwich_csv(const std::vector<SandwichRow>& rows) {
    std::string out = "structure,n,p,coefficient,sd,sd2,coverage,replications,excluded\n";
    for (const auto& r : rows) {
        out += fmt::format("{},{},{},{},{:.6f},{:.6f},{:.4f},{},{}\n", structure_label(r.structure), r.n, r.p,
                           r.coefficient, r.sd, r.sd2, r.coverage, r.replications_used, r.excluded);
    }
    return out;
}

std::string wald_samples_csv(const WaldSummary& summary) {
    std::string out = "replication,W,z_highdim\n";
    for (const auto& s : summary.samples) {
        out += fmt::format("{},{:.12g},{:.12g}\n", s.replication, s.w, s.z);
    }
    return out;
}

std::string wald_summary_text(const WaldSummary& s) {
    return fmt::format(
        "structure = {}\nn = {}\np = {}\ndf = {}\nreplications = {}\nexcluded = {}\nmean_W = {:.6f}\nvar_W = {:.6f}\n"
        "ks_distance = {:.6f}\nks_p_value = {:.6f}\nmean_z = {:.6f}\nsd_z = {:.6f}\n",
        structure_label(s.structure), s.n, s.p, s.df, s.samples.size(), s.excluded, s.mean_w, s.var_w, s.ks_distance,
        s.ks_p_value, s.mean_z, s.sd_z);
}

std::size_t default_parallelism() {
    if (const char* env = std::getenv("HDGEE_JOBS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    }
    return 1;
}

}  // namespace hdgee
