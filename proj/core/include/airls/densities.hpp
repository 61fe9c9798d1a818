#pragma once

#include <functional>
#include <variant>

namespace airls {

// Noise densities attachable to a residual. All are "zero mode" densities:
// the negative log ratio -log p(y)/p(0) is nonnegative and vanishes at y=0.

// p(y) = q^{(1+q)/q} / (2 Gamma(1/q)) * exp(-q |y|^q), q > 0.
// q=2 is Gaussian (variance 1/4), q=1 is Laplace, q->inf tends to uniform on [-1,1].
struct StandardGND {
    double q = 2.0;
};

// y/scale follows StandardGND(q); density picks up a 1/scale Jacobian.
struct ScaledGND {
    double q = 2.0;
    double scale = 1.0;
};

// p(y) ∝ exp(-(rate_pos*max(y,0) + rate_neg*max(-y,0))), both rates > 0.
struct AsymmetricLaplace {
    double rate_pos = 1.0;
    double rate_neg = 1.0;
};

// Flat prior: carries zero weight and is excluded from objectives and updates.
struct NonInformative {};

// User-supplied zero-mode density given by its negative log ratio
// y -> -log p(y)/p(0), which must be >= 0 everywhere and 0 at y=0.
// The normalization is unknown, so log-density values are reported
// relative to p(0)=1.
struct CustomDensity {
    std::function<double(double)> neg_log_ratio;
};

using Density = std::variant<StandardGND, ScaledGND, AsymmetricLaplace,
                             NonInformative, CustomDensity>;

// log p(y) of StandardGND(q). Throws if q <= 0 or y is not finite.
double gnd_log_density(double q, double y);

// -log p(y)/p(0). Nonnegative, zero at y=0. Throws for NonInformative
// (flat priors are excluded upstream) and for invalid parameters.
double neg_log_ratio(const Density& d, double y);

// log p(0) where the normalization is known (GND variants, asymmetric
// Laplace); 0 for CustomDensity. Throws for NonInformative.
double log_density_at_zero(const Density& d);

// sgn(r) * (r^2 + alpha)^{1/qbar} with sgn(0) = +1. alpha > 0, qbar >= 1.
double modified_residual(double r, double alpha, double qbar);

// IRLS weight of one residual row: neg_log_ratio(d, rho_hat) / |rho_hat|^qbar.
// For StandardGND this equals q * (r^2 + alpha)^{q/qbar - 1} when rho_hat is
// the modified residual of r. Returns 0 for NonInformative.
double irls_weight(const Density& d, double rho_hat, double qbar);

// True iff d is a StandardGND or ScaledGND.
bool is_gnd(const Density& d);

// Tail exponent used for qbar inference and surrogate bookkeeping:
// q for GND variants, 1 otherwise.
double density_degree(const Density& d);

// Throws std::invalid_argument if parameters are out of range
// (q <= 0, scale <= 0, rates <= 0, missing custom callback).
void validate_density(const Density& d);

}  // namespace airls
