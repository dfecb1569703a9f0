#pragma once

// Helpers shared by the unit suites. Random instances here use std::mt19937_64,
// independent of the library's own streams.

#include <cmath>
#include <random>
#include <vector>

#include "hdgee/model.hpp"
#include "hdgee/numerics.hpp"

namespace hdgee::test {

inline Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c, double scale = 1.0) {
    std::normal_distribution<double> z(0.0, scale);
    Matrix m(r, c);
    for (double& v : m.data()) v = z(rng);
    return m;
}

/// G^T G + I: well conditioned SPD.
inline SymmetricMatrix random_spd(std::mt19937_64& rng, std::size_t p) {
    const Matrix g = random_matrix(rng, p, p);
    Matrix a = g.transpose() * g;
    for (std::size_t i = 0; i < p; ++i) a(i, i) += 1.0;
    return SymmetricMatrix::symmetrized(a);
}

/// Random clustered data with responses drawn independently from the family.
inline ClusteredDataset random_dataset(std::mt19937_64& rng, Family family, std::size_t n, std::size_t m,
                                       std::size_t p, const std::vector<double>& beta) {
    std::normal_distribution<double> z(0.0, 0.5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<ClusterObservation> clusters;
    for (std::size_t i = 0; i < n; ++i) {
        Matrix x(m, p);
        Vector y(m);
        for (std::size_t j = 0; j < m; ++j) {
            double eta = 0.0;
            for (std::size_t k = 0; k < p; ++k) {
                x(j, k) = k == 0 ? 1.0 : z(rng);
                eta += x(j, k) * beta[k];
            }
            if (family == Family::BinaryLogit) {
                y[j] = u(rng) < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0;
            } else {
                std::poisson_distribution<int> pois(std::exp(eta));
                y[j] = pois(rng);
            }
        }
        clusters.push_back({y, x});
    }
    return ClusteredDataset(std::move(clusters), family);
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
    return d;
}

}  // namespace hdgee::test
