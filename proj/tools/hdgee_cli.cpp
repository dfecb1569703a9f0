// Command-line front end: fit a CSV file, simulate a dataset, or run a study.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "hdgee/config.hpp"
#include "hdgee/csv_io.hpp"
#include "hdgee/error.hpp"
#include "hdgee/estimator.hpp"
#include "hdgee/regularity.hpp"
#include "hdgee/report.hpp"
#include "hdgee/simulate.hpp"
#include "hdgee/studies.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitParse = 2;
constexpr int kExitConvergence = 3;
constexpr int kExitAborted = 4;

struct FitArgs {
    std::string input;
    std::string family = "binary";
    std::string structure = "CS";
    double alpha = 0.05;
    std::string out;
    std::size_t max_iter = 50;
};

struct SimulateArgs {
    std::size_t n = 500;
    std::optional<std::size_t> p;
    std::size_t m = 3;
    std::uint64_t seed = 20100101;
    std::size_t replication = 0;
    std::string family = "binary";
    std::string pattern = "graded";
    std::string out;
    std::string beta_out;
};

struct StudyArgs {
    std::string kind;
    std::string config;
    std::uint64_t seed = 0;
    std::size_t reps = 0;
    std::vector<std::size_t> n;
    std::vector<std::size_t> p;
    std::vector<std::string> structures;
    std::string family;
    double alpha = 0.05;
    std::string out;
    std::size_t jobs = 0;
};

int run_fit(const FitArgs& a) {
    const hdgee::Family family = hdgee::parse_family(a.family);
    const hdgee::StructureKind kind = hdgee::parse_structure(a.structure);
    const hdgee::ClusteredDataset data = hdgee::read_csv(a.input, family);
    const hdgee::MarginalModel model(family);
    hdgee::FitOptions opts;
    opts.max_outer_iterations = a.max_iter;
    const hdgee::FitResult fit = hdgee::fit_gee(data, model, kind, opts);
    const auto regularity = hdgee::check_regularity(data, model, &fit);
    if (a.out.empty()) {
        hdgee::write_fit_report(std::cout, fit, data, model, kind, a.alpha, regularity);
    } else {
        std::ofstream out(a.out, std::ios::binary);
        hdgee::write_fit_report(out, fit, data, model, kind, a.alpha, regularity);
    }
    if (!fit.converged) {
        std::cerr << "hdgee: " << fit.message << '\n';
        return kExitConvergence;
    }
    return kExitOk;
}

hdgee::BetaPattern pattern_from(const std::string& name) {
    if (name == "graded") return {hdgee::BetaPatternKind::Graded, {}};
    if (name == "null-tail") return {hdgee::BetaPatternKind::NullTail, {}};
    throw hdgee::InvalidArgument(fmt::format("unknown pattern '{}' (expected graded or null-tail)", name));
}

int run_simulate(const SimulateArgs& a) {
    hdgee::SimDesign d;
    d.n = a.n;
    d.p_override = a.p;
    d.m = a.m;
    d.seed = a.seed;
    d.family = hdgee::parse_family(a.family);
    d.beta = pattern_from(a.pattern);
    const auto sim = hdgee::gen_dataset(d, a.replication);
    if (a.out.empty()) {
        hdgee::write_csv(std::cout, sim.data);
    } else {
        hdgee::write_csv(std::filesystem::path(a.out), sim.data);
    }
    if (!a.beta_out.empty()) {
        std::ofstream beta(a.beta_out, std::ios::binary);
        beta << "index,beta0\n";
        for (std::size_t k = 0; k < sim.beta0.size(); ++k) beta << fmt::format("{},{}\n", k + 1, sim.beta0[k]);
    }
    std::cerr << fmt::format("hdgee: n={} p={} clusters_regenerated={} total_redraws={}\n", sim.data.n(), sim.data.p(),
                             sim.diagnostics.clusters_regenerated, sim.diagnostics.total_redraws);
    return kExitOk;
}

int run_study(const StudyArgs& a, const CLI::App& cmd) {
    hdgee::StudyConfig c;
    if (!a.config.empty()) {
        c = hdgee::load_study_config(a.config);
    }
    const hdgee::StudyKind kind = hdgee::parse_study_kind(a.kind);
    if (a.config.empty() || kind != c.study) {
        if (kind == hdgee::StudyKind::WaldNull && a.config.empty()) {
            c.design.n = 1000;
            c.design.p_override = 24;
            c.design.beta = {hdgee::BetaPatternKind::NullTail, {}};
        }
        c.study = kind;
    }
    if (a.config.empty()) c.parallelism = hdgee::default_parallelism();
    if (cmd.count("--seed")) c.design.seed = a.seed;
    if (cmd.count("--reps")) c.design.replications = a.reps;
    if (cmd.count("--family")) c.design.family = hdgee::parse_family(a.family);
    if (cmd.count("--alpha")) c.alpha = a.alpha;
    if (cmd.count("--out")) c.output_path = a.out;
    if (cmd.count("--jobs")) c.parallelism = a.jobs;
    if (cmd.count("--structure")) {
        c.structures.clear();
        for (const auto& s : a.structures) c.structures.push_back(hdgee::parse_structure(s));
    }
    if (cmd.count("--n")) {
        if (!a.p.empty() && a.p.size() != a.n.size() && a.p.size() != 1) {
            throw hdgee::InvalidArgument("--p must be given once or once per --n");
        }
        c.grid.clear();
        for (std::size_t i = 0; i < a.n.size(); ++i) {
            std::optional<std::size_t> p;
            if (!a.p.empty()) p = a.p.size() == 1 ? a.p.front() : a.p[i];
            c.grid.push_back({a.n[i], p});
        }
        c.design.n = a.n.front();
        c.design.p_override = c.grid.front().p;
    } else if (cmd.count("--p")) {
        c.design.p_override = a.p.front();
        for (auto& g : c.grid) g.p = a.p.front();
    }
    if (c.study == hdgee::StudyKind::MseTable && c.structures.empty()) {
        c.structures = {hdgee::StructureKind::Independence, hdgee::StructureKind::Unstructured,
                        hdgee::StructureKind::Exchangeable, hdgee::StructureKind::AutoRegressive1};
    }

    switch (c.study) {
        case hdgee::StudyKind::MseTable:
            std::cout << hdgee::mse_csv(hdgee::run_mse_study(c));
            break;
        case hdgee::StudyKind::SandwichTable:
            std::cout << hdgee::sandwich_csv(hdgee::run_sandwich_study(c));
            break;
        case hdgee::StudyKind::WaldNull:
        case hdgee::StudyKind::HighDimNull:
            std::cout << hdgee::wald_summary_text(hdgee::run_wald_study(c));
            break;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generalized estimating equations for clustered data with many covariates"};
    app.require_subcommand(1);

    FitArgs fit_args;
    auto* fit = app.add_subcommand("fit", "Fit a GEE model to a CSV file (cluster,y,x1,...,xp)");
    fit->add_option("input", fit_args.input, "Input CSV")->required();
    fit->add_option("--family", fit_args.family, "binary | poisson");
    fit->add_option("--structure", fit_args.structure, "IN | CS | AR-1 | UN");
    fit->add_option("--alpha", fit_args.alpha, "Confidence intervals at level 1 - alpha");
    fit->add_option("--out", fit_args.out, "Report path (default stdout)");
    fit->add_option("--max-iter", fit_args.max_iter, "Outer iteration cap");

    SimulateArgs sim_args;
    auto* sim = app.add_subcommand("simulate", "Write one simulated replication as CSV");
    sim->add_option("--n", sim_args.n, "Number of clusters");
    sim->add_option("--p", sim_args.p, "Covariate dimension (default floor(2.5 n^(1/3)))");
    sim->add_option("--m", sim_args.m, "Cluster size");
    sim->add_option("--seed", sim_args.seed, "Base seed");
    sim->add_option("--rep", sim_args.replication, "Replication index");
    sim->add_option("--family", sim_args.family, "binary | poisson");
    sim->add_option("--pattern", sim_args.pattern, "graded | null-tail");
    sim->add_option("--out", sim_args.out, "CSV path (default stdout)");
    sim->add_option("--beta-out", sim_args.beta_out, "Also write the true coefficients here");

    StudyArgs study_args;
    auto* study = app.add_subcommand("study", "Run a seeded Monte Carlo study");
    study->add_option("kind", study_args.kind, "mse | sandwich | wald")->required();
    study->add_option("--config", study_args.config, "JSON config; flags override it");
    study->add_option("--seed", study_args.seed, "Base seed");
    study->add_option("--reps", study_args.reps, "Replications");
    study->add_option("--n", study_args.n, "Sample size(s)");
    study->add_option("--p", study_args.p, "Covariate dimension, once or once per --n");
    study->add_option("--structure", study_args.structures, "Working correlation(s)");
    study->add_option("--family", study_args.family, "binary | poisson");
    study->add_option("--alpha", study_args.alpha, "CI level for coverage");
    study->add_option("--out", study_args.out, "Output CSV path");
    study->add_option("--jobs", study_args.jobs, "Worker threads (default HDGEE_JOBS or 1)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitParse;
    }

    try {
        if (*fit) return run_fit(fit_args);
        if (*sim) return run_simulate(sim_args);
        return run_study(study_args, *study);
    } catch (const hdgee::StudyAborted& e) {
        std::cerr << "hdgee: study aborted: " << e.what() << '\n';
        return kExitAborted;
    } catch (const hdgee::NotPositiveDefinite& e) {
        std::cerr << "hdgee: " << e.what() << '\n';
        return kExitConvergence;
    } catch (const hdgee::DegenerateFit& e) {
        std::cerr << "hdgee: " << e.what() << '\n';
        return kExitConvergence;
    } catch (const hdgee::NumericError& e) {
        std::cerr << "hdgee: " << e.what() << '\n';
        return kExitConvergence;
    } catch (const hdgee::Error& e) {
        std::cerr << "hdgee: " << e.what() << '\n';
        return kExitParse;
    }
}
