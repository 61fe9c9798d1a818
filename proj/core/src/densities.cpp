#include "airls/densities.hpp"

#include <cmath>
#include <stdexcept>

namespace airls {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

double gnd_log_density(double q, double y) {
    require(q > 0.0 && std::isfinite(q), "gnd_log_density: q must be positive and finite");
    require(std::isfinite(y), "gnd_log_density: y must be finite");
    // log K(q) - q|y|^q with K(q) = q^{(1+q)/q} / (2 Gamma(1/q)).
    const double log_norm = (1.0 + q) / q * std::log(q) - std::log(2.0) - std::lgamma(1.0 / q);
    return log_norm - q * std::pow(std::abs(y), q);
}

void validate_density(const Density& d) {
    std::visit(
        [](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, StandardGND>) {
                require(v.q > 0.0 && std::isfinite(v.q), "StandardGND: q must be positive");
            } else if constexpr (std::is_same_v<T, ScaledGND>) {
                require(v.q > 0.0 && std::isfinite(v.q), "ScaledGND: q must be positive");
                require(v.scale > 0.0 && std::isfinite(v.scale), "ScaledGND: scale must be positive");
            } else if constexpr (std::is_same_v<T, AsymmetricLaplace>) {
                require(v.rate_pos > 0.0 && std::isfinite(v.rate_pos),
                        "AsymmetricLaplace: rate_pos must be positive");
                require(v.rate_neg > 0.0 && std::isfinite(v.rate_neg),
                        "AsymmetricLaplace: rate_neg must be positive");
            } else if constexpr (std::is_same_v<T, CustomDensity>) {
                require(static_cast<bool>(v.neg_log_ratio), "CustomDensity: neg_log_ratio not set");
            }
        },
        d);
}

double neg_log_ratio(const Density& d, double y) {
    require(std::isfinite(y), "neg_log_ratio: y must be finite");
    return std::visit(
        [y](const auto& v) -> double {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, StandardGND>) {
                return v.q * std::pow(std::abs(y), v.q);
            } else if constexpr (std::is_same_v<T, ScaledGND>) {
                return v.q * std::pow(std::abs(y) / v.scale, v.q);
            } else if constexpr (std::is_same_v<T, AsymmetricLaplace>) {
                return v.rate_pos * std::max(y, 0.0) + v.rate_neg * std::max(-y, 0.0);
            } else if constexpr (std::is_same_v<T, NonInformative>) {
                throw std::invalid_argument(
                    "neg_log_ratio: flat priors carry zero weight and are excluded upstream");
            } else {
                const double r = v.neg_log_ratio(y);
                if (!(r >= 0.0))
                    throw std::invalid_argument("CustomDensity: neg_log_ratio must be >= 0");
                return r;
            }
        },
        d);
}

double log_density_at_zero(const Density& d) {
    return std::visit(
        [](const auto& v) -> double {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, StandardGND>) {
                return gnd_log_density(v.q, 0.0);
            } else if constexpr (std::is_same_v<T, ScaledGND>) {
                return gnd_log_density(v.q, 0.0) - std::log(v.scale);
            } else if constexpr (std::is_same_v<T, AsymmetricLaplace>) {
                // Normalizing an exponential on each side: p(0) = ab/(a+b).
                return std::log(v.rate_pos * v.rate_neg / (v.rate_pos + v.rate_neg));
            } else if constexpr (std::is_same_v<T, NonInformative>) {
                throw std::invalid_argument("log_density_at_zero: flat prior has no density");
            } else {
                return 0.0;  // custom densities are reported relative to p(0)=1
            }
        },
        d);
}

double modified_residual(double r, double alpha, double qbar) {
    require(std::isfinite(r), "modified_residual: r must be finite");
    require(alpha > 0.0 && std::isfinite(alpha), "modified_residual: alpha must be positive");
    require(qbar >= 1.0 && std::isfinite(qbar), "modified_residual: qbar must be >= 1");
    const double sign = (r < 0.0) ? -1.0 : 1.0;  // sgn(0) = +1
    return sign * std::pow(r * r + alpha, 1.0 / qbar);
}

double irls_weight(const Density& d, double rho_hat, double qbar) {
    require(qbar >= 1.0 && std::isfinite(qbar), "irls_weight: qbar must be >= 1");
    if (std::holds_alternative<NonInformative>(d)) return 0.0;
    require(rho_hat != 0.0 && std::isfinite(rho_hat),
            "irls_weight: rho_hat must be nonzero (modified residuals never vanish)");
    const double w = neg_log_ratio(d, rho_hat) / std::pow(std::abs(rho_hat), qbar);
    if (!std::isfinite(w) || w < 0.0)
        throw std::invalid_argument("irls_weight: weight must be finite and nonnegative");
    return w;
}

bool is_gnd(const Density& d) {
    return std::holds_alternative<StandardGND>(d) || std::holds_alternative<ScaledGND>(d);
}

double density_degree(const Density& d) {
    if (const auto* s = std::get_if<StandardGND>(&d)) return s->q;
    if (const auto* s = std::get_if<ScaledGND>(&d)) return s->q;
    return 1.0;
}

}  // namespace airls
