#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "hdgee/error.hpp"
#include "hdgee/estimator.hpp"
#include "hdgee/simulate.hpp"
#include "test_support.hpp"

using namespace hdgee;

namespace {

const MarginalModel logit(Family::BinaryLogit);
const MarginalModel poisson(Family::PoissonLog);

ClusteredDataset intercept_only(const std::vector<double>& y, std::size_t m) {
    std::vector<ClusterObservation> cs;
    for (std::size_t i = 0; i < y.size(); i += m)
        cs.push_back({Vector(y.begin() + i, y.begin() + i + m), Matrix(m, 1, 1.0)});
    return ClusteredDataset(cs, Family::BinaryLogit);
}

// Plain logistic IRLS on stacked rows, written against Eigen only.
Eigen::VectorXd irls_logistic(const ClusteredDataset& d) {
    const auto p = Eigen::Index(d.p());
    Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
    for (int it = 0; it < 100; ++it) {
        Eigen::MatrixXd info = Eigen::MatrixXd::Zero(p, p);
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(p);
        for (const auto& c : d.clusters())
            for (std::size_t j = 0; j < c.size(); ++j) {
                Eigen::VectorXd x(p);
                for (Eigen::Index k = 0; k < p; ++k) x[k] = c.x(j, std::size_t(k));
                const double mu = 1.0 / (1.0 + std::exp(-x.dot(b)));
                grad += (c.y[j] - mu) * x;
                info += mu * (1.0 - mu) * x * x.transpose();
            }
        const Eigen::VectorXd step = info.ldlt().solve(grad);
        b += step;
        if (step.cwiseAbs().maxCoeff() < 1e-14) break;
    }
    return b;
}

double rel_err(const Matrix& a, const Matrix& b) { return test::max_abs_diff(a, b) / std::max(max_abs(b), 1e-300); }

Matrix fd_jacobian(const ClusteredDataset& d, const MarginalModel& m, std::vector<double> beta,
                   const CorrelationStructure& s, double h = 1e-5) {
    const std::size_t p = beta.size();
    Matrix out(p, p);
    for (std::size_t k = 0; k < p; ++k) {
        auto up = beta, dn = beta;
        up[k] += h;
        dn[k] -= h;
        const auto su = score(d, m, up, s), sd = score(d, m, dn, s);
        for (std::size_t r = 0; r < p; ++r) out(r, k) = -(su[r] - sd[r]) / (2 * h);
    }
    return out;
}

}  // namespace

TEST_CASE("score and information at a single observation") {
    const auto d = intercept_only({1.0}, 1);
    CHECK(score(d, logit, std::vector<double>{0.0}, Independence{})[0] == 0.5);
    CHECK(fisher_information(d, logit, std::vector<double>{0.0}, Independence{})(0, 0) == 0.25);

    // X = I_2 in one cluster of two, A = 0.25 I
    const ClusteredDataset d2({{{1, 0}, Matrix::identity(2)}}, Family::BinaryLogit);
    const auto h = fisher_information(d2, logit, std::vector<double>{0.0, 0.0}, Independence{});
    CHECK(h.dense() == Matrix(2, 2, {0.25, 0, 0, 0.25}));
}

TEST_CASE("identity working correlation reduces the score to X^T (y - mu)") {
    std::mt19937_64 rng(31);
    for (auto fam : {Family::BinaryLogit, Family::PoissonLog}) {
        const auto d = test::random_dataset(rng, fam, 30, 3, 4, {0.1, 0.4, -0.2, 0.3});
        const MarginalModel m(fam);
        const std::vector<double> b{0.2, -0.1, 0.3, 0.05};
        const auto s = score(d, m, b, Independence{});
        std::vector<double> direct(4, 0.0);
        for (const auto& c : d.clusters()) {
            const auto mu = marginal_mean(m, linear_predictor(c, b));
            for (std::size_t j = 0; j < c.size(); ++j)
                for (std::size_t k = 0; k < 4; ++k) direct[k] += c.x(j, k) * (c.y[j] - mu[j]);
        }
        for (std::size_t k = 0; k < 4; ++k) CHECK(s[k] == doctest::Approx(direct[k]).epsilon(1e-12));
    }
}

TEST_CASE("exact Jacobian matches finite differences of the score") {
    std::mt19937_64 rng(32);
    std::normal_distribution<double> z(0.0, 0.3);
    int instances = 0;
    for (auto fam : {Family::BinaryLogit, Family::PoissonLog}) {
        const MarginalModel m(fam);
        for (std::size_t p : {2u, 3u, 5u}) {
            for (int rep = 0; rep < 3; ++rep) {
                std::vector<double> b0(p);
                for (double& v : b0) v = z(rng);
                const auto d = test::random_dataset(rng, fam, 20, 3, p, b0);
                std::vector<double> b(p);
                for (double& v : b) v = z(rng);
                for (const CorrelationStructure& s :
                     {CorrelationStructure{Exchangeable{0.35}}, CorrelationStructure{AutoRegressive1{-0.3}}}) {
                    const auto d_exact = exact_jacobian(d, m, b, s);
                    CHECK(rel_err(d_exact, fd_jacobian(d, m, b, s)) <= 1e-6);
                    ++instances;
                }
            }
        }
    }
    CHECK(instances == 36);
}

TEST_CASE("Jacobian correction terms vanish with zero residuals or symmetric logits") {
    // y equal to mu: E = G = 0 (Poisson permits non-integer y through the unchecked constructor)
    std::mt19937_64 rng(33);
    auto base = test::random_dataset(rng, Family::PoissonLog, 10, 3, 3, {0.2, 0.1, -0.1});
    const std::vector<double> b{0.3, -0.2, 0.1};
    std::vector<ClusterObservation> cs;
    for (const auto& c : base.clusters()) cs.push_back({marginal_mean(poisson, linear_predictor(c, b)), c.x});
    const ClusteredDataset exact(cs);
    const InverseCorrelationCache cache(Exchangeable{0.3}, exact.distinct_sizes());
    const auto parts = jacobian_parts(exact, poisson, b, cache);
    CHECK(max_abs(parts.e) <= 1e-12);
    CHECK(max_abs(parts.g) <= 1e-12);

    // beta = 0 for the logit: mu'' = 0 everywhere
    const auto bin = test::random_dataset(rng, Family::BinaryLogit, 10, 3, 3, {0.2, 0.1, -0.1});
    const InverseCorrelationCache c2(AutoRegressive1{0.4}, bin.distinct_sizes());
    const auto p0 = jacobian_parts(bin, logit, std::vector<double>{0, 0, 0}, c2);
    CHECK(max_abs(p0.e) == 0.0);
    CHECK(max_abs(p0.g) == 0.0);
    CHECK(p0.total() == p0.h);
}

TEST_CASE("intercept-only independence fits") {
    auto f = fit_independence(intercept_only({1, 0, 1, 0, 0, 1}, 2), logit);
    CHECK(f.converged);
    CHECK(std::abs(f.beta_hat[0]) <= 1e-12);
    f = fit_independence(intercept_only({1, 1, 1, 0, 1, 1, 0, 1}, 2), logit);
    CHECK(f.converged);
    CHECK(f.beta_hat[0] == doctest::Approx(std::log(3.0)).epsilon(1e-10));
}

TEST_CASE("fit on a small simulated design satisfies the root property") {
    SimDesign design;
    design.n = 200;
    design.p_override = 5;
    const auto sim = gen_dataset(design, 0);
    const auto f = fit_independence(sim.data, logit);
    REQUIRE(f.converged);
    const auto s = score(sim.data, logit, f.beta_hat, Independence{});
    CHECK(max_abs(s) <= 1e-8);
    for (double v : f.beta_hat) CHECK(std::isfinite(v));
}

TEST_CASE("cluster size one: every structure equals the logistic MLE") {
    std::mt19937_64 rng(34);
    const auto d = test::random_dataset(rng, Family::BinaryLogit, 300, 1, 4, {0.3, -0.6, 0.5, 0.2});
    const auto oracle = irls_logistic(d);
    for (auto kind : {StructureKind::Independence, StructureKind::Exchangeable, StructureKind::AutoRegressive1,
                      StructureKind::Unstructured}) {
        const auto f = fit_gee(d, logit, kind);
        REQUIRE(f.converged);
        for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(f.beta_hat[k] - oracle[Eigen::Index(k)]) <= 1e-8);
    }
}

TEST_CASE("converged fits are roots of the final estimating equation") {
    std::mt19937_64 rng(35);
    for (auto fam : {Family::BinaryLogit, Family::PoissonLog}) {
        const MarginalModel m(fam);
        const auto d = test::random_dataset(rng, fam, 120, 3, 4, {0.2, 0.4, -0.3, 0.1});
        for (auto kind : {StructureKind::Independence, StructureKind::Exchangeable, StructureKind::AutoRegressive1,
                          StructureKind::Unstructured}) {
            const auto f = fit_gee(d, m, kind);
            REQUIRE(f.converged);
            CHECK(f.final_score_norm <= 1e-8);
            CHECK(max_abs(score(d, m, f.beta_hat, f.structure_final)) <= 1e-8);
        }
    }
}

TEST_CASE("independence structure reproduces fit_independence") {
    std::mt19937_64 rng(36);
    const auto d = test::random_dataset(rng, Family::BinaryLogit, 100, 3, 3, {0.1, 0.5, -0.5});
    const auto a = fit_independence(d, logit);
    const auto b = fit_gee(d, logit, StructureKind::Independence);
    for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(a.beta_hat[k] - b.beta_hat[k]) <= 1e-10);
}

TEST_CASE("column scaling rescales the estimate") {
    std::mt19937_64 rng(37);
    const auto d = test::random_dataset(rng, Family::BinaryLogit, 150, 3, 3, {0.1, 0.6, -0.4});
    const std::vector<double> c{2.0, 0.5, 3.0};
    std::vector<ClusterObservation> cs;
    for (const auto& cl : d.clusters()) {
        Matrix x = cl.x;
        for (std::size_t j = 0; j < x.rows(); ++j)
            for (std::size_t k = 0; k < 3; ++k) x(j, k) *= c[k];
        cs.push_back({cl.y, x});
    }
    const ClusteredDataset scaled(cs, Family::BinaryLogit);
    for (auto kind : {StructureKind::Exchangeable, StructureKind::Unstructured}) {
        const auto a = fit_gee(d, logit, kind);
        const auto b = fit_gee(scaled, logit, kind);
        for (std::size_t k = 0; k < 3; ++k) CHECK(b.beta_hat[k] == doctest::Approx(a.beta_hat[k] / c[k]).epsilon(1e-6));
    }
}

TEST_CASE("accepted iterations never increase the score norm under independence") {
    std::mt19937_64 rng(38);
    const auto d = test::random_dataset(rng, Family::PoissonLog, 80, 3, 4, {1.0, 0.8, -0.6, 0.4});
    const auto f = fit_independence(d, poisson);
    REQUIRE(f.score_history.size() >= 2);
    for (std::size_t i = 1; i < f.score_history.size(); ++i) CHECK(f.score_history[i] <= f.score_history[i - 1]);
}

TEST_CASE("variable cluster sizes") {
    std::vector<ClusterObservation> cs;
    std::mt19937_64 rng(39);
    std::normal_distribution<double> z(0.0, 0.7);
    std::bernoulli_distribution coin(0.5);
    for (int i = 0; i < 80; ++i) {
        const std::size_t m = 1 + std::size_t(i % 4);
        Matrix x(m, 2);
        Vector y(m);
        for (std::size_t j = 0; j < m; ++j) {
            x(j, 0) = 1.0;
            x(j, 1) = z(rng);
            y[j] = coin(rng);
        }
        cs.push_back({y, x});
    }
    const ClusteredDataset d(cs, Family::BinaryLogit);
    CHECK(fit_gee(d, logit, StructureKind::Exchangeable).converged);
    CHECK(fit_gee(d, logit, StructureKind::AutoRegressive1).converged);
    CHECK_THROWS(fit_gee(d, logit, StructureKind::Unstructured));
}

TEST_CASE("complete separation is reported as non-convergence") {
    std::vector<ClusterObservation> cs;
    for (int i = 0; i < 6; ++i) {
        const double x = -2.5 + i;
        cs.push_back({{x > 0 ? 1.0 : 0.0}, Matrix(1, 2, {1.0, x})});
    }
    const auto f = fit_independence(ClusteredDataset(cs, Family::BinaryLogit), logit);
    CHECK_FALSE(f.converged);
    CHECK(f.message.find("separation") != std::string::npos);
}

TEST_CASE("fit options are validated") {
    FitOptions o;
    o.max_outer_iterations = 0;
    CHECK_THROWS_AS(o.validate(), InvalidArgument);
    o = {};
    o.score_tolerance = -1;
    CHECK_THROWS_AS(o.validate(), InvalidArgument);
}
