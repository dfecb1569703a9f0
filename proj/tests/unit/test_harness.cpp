#include <doctest.h>

#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hdgee/config.hpp"
#include "hdgee/csv_io.hpp"
#include "hdgee/error.hpp"
#include "hdgee/estimator.hpp"
#include "hdgee/regularity.hpp"
#include "hdgee/report.hpp"
#include "hdgee/simulate.hpp"
#include "hdgee/studies.hpp"

using namespace hdgee;
namespace fs = std::filesystem;

namespace {

const MarginalModel logit(Family::BinaryLogit);

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "hdgee_harness_tests";
    fs::create_directories(dir);
    return dir / name;
}

StudyConfig small_study(StudyKind kind) {
    StudyConfig c;
    c.study = kind;
    c.design.n = 120;
    c.design.p_override = 6;
    c.design.replications = 6;
    c.design.seed = 99;
    c.structures = {StructureKind::Independence, StructureKind::Exchangeable};
    return c;
}

}  // namespace

TEST_CASE("CSV toy file fits to zero") {
    std::istringstream in("cluster,y,x1\n1,1,1\n1,0,1\n");
    const auto d = read_csv(in, Family::BinaryLogit);
    CHECK(d.n() == 1);
    CHECK(d.p() == 1);
    const auto f = fit_gee(d, logit, StructureKind::Independence);
    CHECK(f.converged);
    CHECK(std::abs(f.beta_hat[0]) <= 1e-12);
}

TEST_CASE("CSV rejects malformed input with the line number") {
    auto line_of = [](const std::string& text) -> std::size_t {
        std::istringstream in(text);
        try {
            read_csv(in, Family::BinaryLogit);
        } catch (const ParseError& e) {
            return e.line();
        }
        return 0;
    };
    CHECK(line_of("cluster,y,x1\n1,1,0.5\n1,2,0.1\n") == 3);
    CHECK(line_of("cluster,y,x1\n1,1,0.5\n2,0,0.1\n1,1,0.3\n") == 4);
    CHECK(line_of("cluster,y,x2\n1,1,0.5\n") == 1);
    CHECK(line_of("cluster,y,x1\n1,1,abc\n") == 2);
    CHECK(line_of("cluster,y,x1\n1,1\n") == 2);
    CHECK(line_of("") == 1);
    std::istringstream pois("cluster,y,x1\na,3,1\na,0,1\nb,7,2\n");
    CHECK(read_csv(pois, Family::PoissonLog).n() == 2);
}

TEST_CASE("CSV round trip gives a bit-identical fit") {
    SimDesign design;
    design.n = 200;
    design.p_override = 6;
    const auto sim = gen_dataset(design, 1);
    std::stringstream buf;
    write_csv(buf, sim.data);
    const auto back = read_csv(buf, Family::BinaryLogit);
    for (std::size_t i = 0; i < back.n(); ++i) {
        REQUIRE(back[i].x == sim.data[i].x);
        REQUIRE(back[i].y == sim.data[i].y);
    }
    const auto a = fit_gee(sim.data, logit, StructureKind::Unstructured);
    const auto b = fit_gee(back, logit, StructureKind::Unstructured);
    CHECK(a.beta_hat == b.beta_hat);
    CHECK(a.sigma_hat.dense() == b.sigma_hat.dense());
}

TEST_CASE("regularity diagnostics") {
    // Two clusters of two orthonormal rows: n^{-1} sum X^T X = I
    std::vector<ClusterObservation> cs{{{1, 0}, Matrix::identity(2)}, {{0, 1}, Matrix::identity(2)}};
    const ClusteredDataset d(cs, Family::BinaryLogit);
    auto r = check_regularity(d, logit);
    CHECK(r.design_eig_min == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.design_eig_max == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.max_covariate_norm == doctest::Approx(1.0));
    CHECK(r.flags.empty());

    std::vector<ClusterObservation> zs{{{1, 0}, Matrix(2, 2, {1, 0, 1, 0})}};
    r = check_regularity(ClusteredDataset(zs, Family::BinaryLogit), logit);
    CHECK(r.design_eig_min == doctest::Approx(0.0));
    CHECK_FALSE(r.flags.empty());

    SimDesign design;
    double lowest = 1e300;
    for (std::size_t rep = 0; rep < 20; ++rep) {
        const auto sim = gen_dataset(design, rep);
        const auto f = fit_gee(sim.data, logit, StructureKind::Exchangeable);
        const auto rr = check_regularity(sim.data, logit, &f);
        lowest = std::min(lowest, rr.design_eig_min);
        CHECK(rr.prob_min.has_value());
        CHECK(rr.corr_eig_min.has_value());
    }
    MESSAGE("smallest design eigenvalue over 20 replications: " << lowest);
    CHECK(lowest > 0.01);
}

TEST_CASE("fit report lists every coefficient") {
    SimDesign design;
    design.n = 150;
    design.p_override = 4;
    const auto sim = gen_dataset(design, 0);
    const auto f = fit_gee(sim.data, logit, StructureKind::Exchangeable);
    std::ostringstream out;
    write_fit_report(out, f, sim.data, logit, StructureKind::Exchangeable, 0.05, check_regularity(sim.data, logit, &f));
    const auto text = out.str();
    CHECK(text.find("converged = true") != std::string::npos);
    CHECK(text.find("beta[4] =") != std::string::npos);
    CHECK(text.find("structure = CS") != std::string::npos);
}

TEST_CASE("studies are byte-identical across runs and worker counts") {
    for (auto kind : {StudyKind::MseTable, StudyKind::SandwichTable, StudyKind::WaldNull}) {
        auto c = small_study(kind);
        if (kind == StudyKind::WaldNull) {
            c.design.p_override = 8;
            c.design.beta = {BetaPatternKind::Custom, {0.4, -0.3, 0.2, -0.1, 0, 0, 0, 0}};
            c.structures = {StructureKind::Exchangeable};
        }
        std::string outputs[3];
        const std::size_t jobs[3] = {1, 8, 1};
        for (int i = 0; i < 3; ++i) {
            c.parallelism = jobs[i];
            c.output_path = scratch("study_" + std::to_string(int(kind)) + "_" + std::to_string(i) + ".csv").string();
            if (kind == StudyKind::MseTable) run_mse_study(c);
            if (kind == StudyKind::SandwichTable) run_sandwich_study(c);
            if (kind == StudyKind::WaldNull) run_wald_study(c);
            outputs[i] = slurp(c.output_path);
            if (kind == StudyKind::WaldNull) outputs[i] += slurp(c.output_path + ".summary");
        }
        CHECK_FALSE(outputs[0].empty());
        CHECK(outputs[0] == outputs[1]);
        CHECK(outputs[0] == outputs[2]);
    }
}

TEST_CASE("single replication study repeated") {
    auto c = small_study(StudyKind::MseTable);
    c.design.replications = 1;
    c.output_path = scratch("one_a.csv").string();
    run_mse_study(c);
    c.output_path = scratch("one_b.csv").string();
    run_mse_study(c);
    CHECK(slurp(scratch("one_a.csv")) == slurp(scratch("one_b.csv")));
}

TEST_CASE("sandwich study standard deviation uses reps - 1") {
    auto c = small_study(StudyKind::SandwichTable);
    c.design.replications = 2;
    c.structures = {StructureKind::Unstructured};
    const auto rows = run_sandwich_study(c);
    REQUIRE(rows.size() == 4);
    std::vector<ParamVector> b;
    for (std::size_t r = 0; r < 2; ++r) {
        auto d = c.design;
        const auto sim = gen_dataset(d, r);
        b.push_back(fit_gee(sim.data, logit, StructureKind::Unstructured).beta_hat);
    }
    for (const auto& row : rows) {
        const std::size_t j = row.coefficient - 1;
        CHECK(row.replications_used + row.excluded == 2);
        CHECK(row.sd == doctest::Approx(std::abs(b[0][j] - b[1][j]) / std::sqrt(2.0)).epsilon(1e-12));
        CHECK(std::isfinite(row.sd2));
    }
    CHECK(rows[0].coefficient == 1);
    CHECK(rows[3].coefficient == 6);
    const auto csv = sandwich_csv(rows);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}

TEST_CASE("exclusion accounting adds up") {
    auto c = small_study(StudyKind::MseTable);
    c.design.n = 40;
    c.design.replications = 10;
    c.max_exclusion_rate = 1.0;
    for (const auto& row : run_mse_study(c)) CHECK(row.replications_used + row.excluded == 10);
}

TEST_CASE("exclusion threshold aborts the study") {
    auto c = small_study(StudyKind::MseTable);
    c.design.n = 12;
    c.design.p_override = 8;
    c.design.replications = 10;
    c.structures = {StructureKind::Unstructured};
    CHECK_THROWS_AS(run_mse_study(c), StudyAborted);
}

TEST_CASE("study configuration files") {
    const auto c = parse_study_config(R"({"study": "mse", "grid": [{"n": 500}, {"n": 1000, "p": 24}],
        "replications": 20, "seed": 5, "structures": ["IN", "CS"], "jobs": 3, "output": "x.csv"})");
    CHECK(c.study == StudyKind::MseTable);
    REQUIRE(c.grid.size() == 2);
    CHECK(c.grid[1].p == std::optional<std::size_t>(24));
    CHECK(c.design.replications == 20);
    CHECK(c.design.seed == 5);
    CHECK(c.parallelism == 3);
    CHECK(c.structures.size() == 2);

    const auto w = parse_study_config(R"({"study": "wald", "wald_coordinates": [21, 22]})");
    CHECK(w.design.n == 1000);
    CHECK(w.design.p() == 24);
    CHECK(w.wald_coordinates == std::vector<std::size_t>{20, 21});

    CHECK_THROWS_AS(parse_study_config(R"({"study": "mse", "bogus": 1})"), ParseError);
    CHECK_THROWS(parse_study_config(R"({"study": "nope"})"));
    CHECK_THROWS(parse_study_config("{not json"));
    // flags may still override, so range checks run at validate time
    CHECK_THROWS_AS(parse_study_config(R"({"study": "mse", "replications": 0, "structures": ["CS"]})").validate(),
                    InvalidArgument);
}

TEST_CASE("rate slope of a synthetic p/n law") {
    std::vector<MseRow> rows;
    for (std::size_t n : {500u, 1000u, 2000u, 3000u}) {
        const std::size_t p = pn_rule(n);
        rows.push_back({StructureKind::Exchangeable, n, p, 0.0, 3.0 * double(p) / double(n), 10, 0, 0.0});
    }
    CHECK(rate_slope(rows, StructureKind::Exchangeable) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS(rate_slope(rows, StructureKind::Unstructured));
}

TEST_CASE("KS distance to a chi-square") {
    CHECK(ks_distance_chi_square({0.0}, 4) == doctest::Approx(1.0));
    // the median of chi-square(2) is 2 log 2
    CHECK(ks_distance_chi_square({2 * std::log(2.0)}, 2) == doctest::Approx(0.5).epsilon(1e-12));
}
