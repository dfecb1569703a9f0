#include "hdgee/working_correlation.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <limits>
#include <string>

#include <fmt/format.h>

#include "hdgee/error.hpp"
#include "hdgee/kernels.hpp"

namespace hdgee {
namespace {

TauEstimate clamp_tau(double raw, TauInterval interval) {
    const double lo = interval.lower + kTauClampMargin;
    const double hi = interval.upper - kTauClampMargin;
    const double value = std::clamp(raw, lo, hi);
    return {value, raw, value != raw};
}

std::size_t max_length(std::span<const Vector> residuals) {
    std::size_t m = 0;
    for (const auto& r : residuals) m = std::max(m, r.size());
    return m;
}

void check_tau(const CorrelationStructure& s, std::size_t m) {
    if (const auto* cs = std::get_if<Exchangeable>(&s)) {
        const auto iv = exchangeable_interval(m);
        if (!(cs->tau > iv.lower && cs->tau < iv.upper)) {
            throw InvalidArgument(
                fmt::format("exchangeable tau {} outside ({}, {}) for m = {}", cs->tau, iv.lower, iv.upper, m));
        }
    } else if (const auto* ar = std::get_if<AutoRegressive1>(&s)) {
        if (!(std::abs(ar->tau) < 1.0)) {
            throw InvalidArgument(fmt::format("AR-1 tau {} outside (-1, 1)", ar->tau));
        }
    }
}

}  // namespace

StructureKind kind_of(const CorrelationStructure& s) noexcept {
    return static_cast<StructureKind>(s.index());
}

std::string_view structure_label(StructureKind k) noexcept {
    switch (k) {
        case StructureKind::Independence: return "IN";
        case StructureKind::Exchangeable: return "CS";
        case StructureKind::AutoRegressive1: return "AR-1";
        case StructureKind::Unstructured: return "UN";
    }
    return "?";
}

StructureKind parse_structure(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "in" || lower == "independence") return StructureKind::Independence;
    if (lower == "cs" || lower == "exchangeable") return StructureKind::Exchangeable;
    if (lower == "ar-1" || lower == "ar1" || lower == "autoregressive") return StructureKind::AutoRegressive1;
    if (lower == "un" || lower == "unstructured") return StructureKind::Unstructured;
    throw InvalidArgument(fmt::format("unknown working correlation '{}' (expected IN, CS, AR-1 or UN)", name));
}

TauInterval exchangeable_interval(std::size_t m) {
    if (m <= 1) {
        return {-std::numeric_limits<double>::infinity(), 1.0};
    }
    return {-1.0 / static_cast<double>(m - 1), 1.0};
}

TauInterval ar1_interval() { return {-1.0, 1.0}; }

Matrix correlation_matrix(const CorrelationStructure& s, std::size_t m) {
    if (m == 0) {
        throw InvalidArgument("correlation matrix of size 0");
    }
    check_tau(s, m);
    Matrix r = Matrix::identity(m);
    if (const auto* cs = std::get_if<Exchangeable>(&s)) {
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t k = 0; k < m; ++k)
                if (j != k) r(j, k) = cs->tau;
    } else if (const auto* ar = std::get_if<AutoRegressive1>(&s)) {
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t k = 0; k < m; ++k)
                r(j, k) = std::pow(ar->tau, static_cast<double>(j > k ? j - k : k - j));
    } else if (const auto* un = std::get_if<Unstructured>(&s)) {
        if (un->r.dimension() != m) {
            throw DimensionMismatch(
                fmt::format("unstructured correlation is {0}x{0}, cluster size is {1}", un->r.dimension(), m));
        }
        r = un->r.dense();
    }
    return r;
}

Matrix inverse_correlation(const Matrix& r) {
    return Cholesky(SymmetricMatrix::from_symmetric(r)).inverse().dense();
}

TauEstimate estimate_exchangeable_tau(std::span<const Vector> residuals) {
    if (residuals.empty()) {
        throw InvalidArgument("exchangeable moment estimate needs at least one cluster");
    }
    double num = 0.0;
    double pairs = 0.0;
    for (const auto& e : residuals) {
        const std::size_t m = e.size();
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t k = j + 1; k < m; ++k)
                num += e[j] * e[k];
        pairs += 0.5 * static_cast<double>(m) * static_cast<double>(m > 0 ? m - 1 : 0);
    }
    const double raw = pairs > 0.0 ? num / pairs : 0.0;
    return clamp_tau(raw, exchangeable_interval(max_length(residuals)));
}

TauEstimate estimate_ar1_tau(std::span<const Vector> residuals) {
    if (residuals.empty()) {
        throw InvalidArgument("AR-1 moment estimate needs at least one cluster");
    }
    double num = 0.0;
    double lags = 0.0;
    for (const auto& e : residuals) {
        for (std::size_t j = 0; j + 1 < e.size(); ++j) {
            num += e[j] * e[j + 1];
            lags += 1.0;
        }
    }
    const double raw = lags > 0.0 ? num / lags : 0.0;
    return clamp_tau(raw, ar1_interval());
}

namespace {

double condition_number(const SymmetricMatrix& r) {
    const auto ev = eigen_extremes(r);
    if (!(ev.min > 0.0)) return std::numeric_limits<double>::infinity();
    return std::max(1.0, ev.max / ev.min);
}

CorrelationEstimate unstructured_from_residuals(std::span<const Vector> residuals, bool normalize) {
    if (residuals.empty()) {
        throw InvalidArgument("unstructured moment estimate needs at least one cluster");
    }
    const std::size_t m = residuals.front().size();
    Matrix acc(m, m);
    bool any_nonzero = false;
    for (const auto& e : residuals) {
        if (e.size() != m) {
            throw InvalidArgument("unstructured working correlation requires a common cluster size");
        }
        any_nonzero = any_nonzero || max_abs(e) > 0.0;
        kernels::rank1_lower(1.0, e, e, acc.data());
    }
    if (!any_nonzero) {
        throw DegenerateFit("all Pearson residuals are zero; unstructured correlation is undefined");
    }
    const double inv_n = 1.0 / static_cast<double>(residuals.size());
    SymmetricMatrix r(m);
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t k = 0; k <= j; ++k)
            r.set(j, k, acc(j, k) * inv_n);
    if (normalize) {
        SymmetricMatrix scaled(m);
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t k = 0; k <= j; ++k)
                scaled.set(j, k, r(j, k) / std::sqrt(r(j, j) * r(k, k)));
        r = scaled;
    }
    CorrelationEstimate est{Unstructured{r}, residuals.size(), condition_number(r)};
    for (std::size_t j = 0; j < m; ++j) {
        if (r(j, j) < 0.5 || r(j, j) > 2.0) est.diagonal_out_of_band = true;
    }
    return est;
}

}  // namespace

CorrelationEstimate estimate_unstructured(const ClusteredDataset& data, const MarginalModel& model,
                                          std::span<const double> beta, bool normalize) {
    if (!data.m_common()) {
        throw InvalidArgument("unstructured working correlation requires a common cluster size");
    }
    std::vector<Vector> residuals;
    residuals.reserve(data.n());
    for (const auto& c : data.clusters()) residuals.push_back(pearson_residuals(c, model, beta));
    return unstructured_from_residuals(residuals, normalize);
}

CorrelationEstimate estimate_from_residuals(StructureKind kind, std::span<const Vector> residuals) {
    switch (kind) {
        case StructureKind::Independence:
            return {Independence{}, residuals.size(), 1.0};
        case StructureKind::Exchangeable: {
            const auto tau = estimate_exchangeable_tau(residuals);
            const double m = static_cast<double>(std::max<std::size_t>(max_length(residuals), 1));
            const double lo = 1.0 - tau.value;
            const double hi = 1.0 + (m - 1.0) * tau.value;
            CorrelationEstimate est{Exchangeable{tau.value}, residuals.size(),
                                    std::max(1.0, std::max(lo, hi) / std::min(lo, hi))};
            if (m == 1.0) est.condition_number = 1.0;
            est.tau_clamped = tau.clamped;
            return est;
        }
        case StructureKind::AutoRegressive1: {
            const auto tau = estimate_ar1_tau(residuals);
            const std::size_t m = std::max<std::size_t>(max_length(residuals), 1);
            CorrelationEstimate est{AutoRegressive1{tau.value}, residuals.size(),
                                    condition_number(SymmetricMatrix::from_lower(
                                        correlation_matrix(AutoRegressive1{tau.value}, m)))};
            est.tau_clamped = tau.clamped;
            return est;
        }
        case StructureKind::Unstructured:
            return unstructured_from_residuals(residuals, false);
    }
    throw InvalidArgument("unknown structure kind");
}

CorrelationEstimate estimate_structure(StructureKind kind, const ClusteredDataset& data,
                                       const MarginalModel& model, std::span<const double> beta) {
    if (kind == StructureKind::Unstructured) {
        return estimate_unstructured(data, model, beta);
    }
    std::vector<Vector> residuals;
    residuals.reserve(data.n());
    for (const auto& c : data.clusters()) residuals.push_back(pearson_residuals(c, model, beta));
    return estimate_from_residuals(kind, residuals);
}

InverseCorrelationCache::InverseCorrelationCache(const CorrelationStructure& s,
                                                 std::span<const std::size_t> sizes) {
    for (std::size_t m : sizes) {
        if (by_size_.contains(m)) continue;
        if (std::holds_alternative<Independence>(s)) {
            by_size_.emplace(m, Matrix::identity(m));
        } else {
            by_size_.emplace(m, inverse_correlation(correlation_matrix(s, m)));
        }
    }
}

const Matrix& InverseCorrelationCache::operator()(std::size_t m) const {
    const auto it = by_size_.find(m);
    if (it == by_size_.end()) {
        throw DimensionMismatch(fmt::format("no inverse working correlation for cluster size {}", m));
    }
    return it->second;
}

}  // namespace hdgee
