#include <doctest.h>

#include <cmath>
#include <limits>

#include "hdgee/error.hpp"
#include "hdgee/model.hpp"

using namespace hdgee;

namespace {

const MarginalModel logit(Family::BinaryLogit);
const MarginalModel poisson(Family::PoissonLog);

ClusterObservation cluster(Vector y, std::size_t p, std::vector<double> x) {
    const std::size_t rows = x.size() / p;
    return {std::move(y), Matrix(rows, p, std::move(x))};
}

}  // namespace

TEST_CASE("linear_predictor") {
    const auto c = cluster({0, 1}, 2, {1, 0, 0, 1});
    const auto t = linear_predictor(c, std::vector<double>{0.3, -0.8});
    CHECK(t == Vector{0.3, -0.8});
    CHECK(linear_predictor(cluster({1}, 3, {1, 2, 3}), std::vector<double>{0, 0, 0}) == Vector{0.0});
    CHECK(linear_predictor(cluster({1}, 2, {1, -1}), std::vector<double>{0.4, 0.2})[0] == doctest::Approx(0.2));
    CHECK_THROWS_AS(linear_predictor(c, std::vector<double>{1.0}), DimensionMismatch);
}

TEST_CASE("marginal mean and variance at known points") {
    const double l3 = std::log(3.0);
    CHECK(marginal_mean(logit, std::vector<double>{0.0})[0] == 0.5);
    CHECK(marginal_mean(logit, std::vector<double>{l3})[0] == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(marginal_mean(poisson, std::vector<double>{0.0})[0] == 1.0);
    CHECK(marginal_variance(logit, std::vector<double>{0.0})[0] == 0.25);
    CHECK(marginal_variance(logit, std::vector<double>{l3})[0] == doctest::Approx(0.1875).epsilon(1e-15));
    CHECK(marginal_variance(poisson, std::vector<double>{1.0})[0] == doctest::Approx(std::exp(1.0)).epsilon(1e-15));
}

TEST_CASE("logistic mean stays strictly inside (0,1) for large |theta|") {
    for (double t : {-700.0, -40.0, 40.0, 700.0}) {
        const double mu = logit.mean(t);
        CHECK(mu > 0.0);
        CHECK(mu < 1.0);
        CHECK(std::isfinite(logit.variance(t)));
    }
    CHECK(logit.mean(-1e308) > 0.0);
}

TEST_CASE("derivatives match central finite differences") {
    const double h = 1e-5;
    for (const auto* m : {&logit, &poisson}) {
        for (double t : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
            const double d1 = (m->mean(t + h) - m->mean(t - h)) / (2 * h);
            const double d2 = (m->dmean(t + h) - m->dmean(t - h)) / (2 * h);
            const double d3 = (m->d2mean(t + h) - m->d2mean(t - h)) / (2 * h);
            CHECK(std::abs(m->dmean(t) - d1) <= 1e-6 * std::abs(m->dmean(t)));
            // d2mean vanishes at 0 for the logit, so compare on an absolute scale there.
            CHECK(std::abs(m->d2mean(t) - d2) <= 1e-6 * std::max(std::abs(m->d2mean(t)), 1e-3));
            CHECK(std::abs(m->d3mean(t) - d3) <= 1e-6 * std::max(std::abs(m->d3mean(t)), 1e-3));
            CHECK(m->variance(t) == m->dmean(t));
        }
    }
}

TEST_CASE("marginal mean is increasing") {
    for (const auto* m : {&logit, &poisson}) {
        double prev = -1.0;
        for (double t = -6.0; t <= 6.0; t += 0.25) {
            CHECK(m->mean(t) > prev);
            prev = m->mean(t);
        }
    }
}

TEST_CASE("pearson residuals") {
    auto c = cluster({1, 0}, 1, {0, 0});
    const auto r = pearson_residuals(c, logit, std::vector<double>{0.0});
    CHECK(r == Vector{1.0, -1.0});

    const auto r1 = pearson_residuals(cluster({1}, 1, {1}), logit, std::vector<double>{std::log(3.0)});
    CHECK(r1[0] == doctest::Approx(0.25 / std::sqrt(0.1875)).epsilon(1e-14));

    // y equal to the fitted mean gives a zero residual (Poisson admits any y at the type level)
    for (double t : {-3.0, 0.4, 2.0}) {
        auto c2 = cluster({std::exp(t)}, 1, {1});
        CHECK(std::abs(pearson_residuals(c2, poisson, std::vector<double>{t})[0]) <= 1e-15);
    }
    CHECK_THROWS_AS(pearson_residuals(cluster({0}, 1, {1}), poisson, std::vector<double>{-800.0}), DegenerateFit);
}

TEST_CASE("dataset validation") {
    std::vector<ClusterObservation> cs{cluster({1, 0}, 2, {1, 0, 1, 1}), cluster({1}, 2, {1, 2})};
    const ClusteredDataset d(cs, Family::BinaryLogit);
    CHECK(d.n() == 2);
    CHECK(d.p() == 2);
    CHECK_FALSE(d.m_common().has_value());
    CHECK(d.max_cluster_size() == 2);
    CHECK(d.total_observations() == 3);
    CHECK(d.distinct_sizes() == std::vector<std::size_t>{1, 2});

    CHECK_THROWS_AS(ClusteredDataset({cluster({2}, 1, {1})}, Family::BinaryLogit), InvalidArgument);
    CHECK_THROWS_AS(ClusteredDataset({cluster({-1}, 1, {1})}, Family::PoissonLog), InvalidArgument);
    CHECK_THROWS_AS(ClusteredDataset({cluster({0.5}, 1, {1})}, Family::PoissonLog), InvalidArgument);
    CHECK_THROWS(ClusteredDataset({cluster({1}, 1, {1}), cluster({1}, 2, {1, 1})}));
    CHECK_THROWS(ClusteredDataset(std::vector<ClusterObservation>{}));
    CHECK_THROWS(require_finite(std::vector<double>{1.0, std::numeric_limits<double>::quiet_NaN()}, "beta"));
    CHECK(parse_family("poisson") == Family::PoissonLog);
    CHECK(parse_family("binary") == Family::BinaryLogit);
}
