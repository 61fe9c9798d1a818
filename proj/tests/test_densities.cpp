#include <doctest.h>

#include <cmath>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "airls/densities.hpp"

using namespace airls;

namespace {

// Total mass and second moment of exp(gnd_log_density(q, .)), computed by
// double-exponential quadrature after the substitution u = y^q (which removes
// both the cusp at zero and the sub-exponential tail): with y = u^{1/q},
//   integral f(y) dy = (1/q) integral f(u^{1/q}) u^{1/q - 1} du.
double gnd_moment(double q, int power, double quad_tol = 1e-12) {
    boost::math::quadrature::tanh_sinh<double> inner;
    boost::math::quadrature::exp_sinh<double> outer;
    const auto g = [&](double u) {
        // Assembled in log space so the vanishing density never meets the
        // growing power factor as a 0 * inf at extreme quadrature nodes.
        const double y = std::pow(u, 1.0 / q);
        const double log_value = gnd_log_density(q, y) +
                                 (power == 0 ? 0.0 : power * std::log(y)) +
                                 (1.0 / q - 1.0) * std::log(u) - std::log(q);
        const double value = std::exp(log_value);
        return std::isfinite(value) ? value : 0.0;
    };
    const double head = inner.integrate(g, 0.0, 1.0, quad_tol);
    const double tail = outer.integrate([&](double u) { return g(1.0 + u); }, quad_tol);
    return 2.0 * (head + tail);  // even integrand
}

}  // namespace

TEST_CASE("generalized normal log-density matches independently computed values") {
    // Reference values computed with 50-digit arithmetic from
    // log p(y) = (1+q)/q log q - log 2 - lgamma(1/q) - q |y|^q.
    CHECK(gnd_log_density(1.0, 0.0) == doctest::Approx(-0.69314718055994531).epsilon(1e-15));
    CHECK(gnd_log_density(2.0, 0.0) == doctest::Approx(-0.22579135264472743).epsilon(1e-15));
    CHECK(gnd_log_density(2.0, 1.0) == doctest::Approx(-2.2257913526447274).epsilon(1e-15));
    CHECK(gnd_log_density(2.0, 0.5) == doctest::Approx(-0.72579135264472743).epsilon(1e-15));
    CHECK(gnd_log_density(1.0, -3.0) == doctest::Approx(-3.6931471805599453).epsilon(1e-15));
    CHECK(gnd_log_density(0.5, 0.7) == doctest::Approx(-3.190918735506819).epsilon(1e-14));
    CHECK(gnd_log_density(1.5, 1.3) == doctest::Approx(-2.5438643544705141).epsilon(1e-14));
    CHECK(gnd_log_density(4.0, 0.9) == doctest::Approx(-2.8727017538581598).epsilon(1e-14));
    CHECK_THROWS(gnd_log_density(0.0, 1.0));
    CHECK_THROWS(gnd_log_density(-1.0, 1.0));
    CHECK_THROWS(gnd_log_density(2.0, std::nan("")));
}

TEST_CASE("generalized normal density integrates to one") {
    for (const double q : {0.5, 1.0, 1.5, 2.0, 4.0}) {
        CAPTURE(q);
        CHECK(gnd_moment(q, 0) == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("generalized normal variance matches closed form") {
    // Var = Gamma(3/q) / (q^{2/q} Gamma(1/q)).
    CHECK(gnd_moment(1.0, 2) == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(gnd_moment(2.0, 2) == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(gnd_moment(0.5, 2) == doctest::Approx(1920.0).epsilon(1e-6));
}

TEST_CASE("negative log ratio per density type") {
    CHECK(neg_log_ratio(StandardGND{2.0}, 1.5) == doctest::Approx(4.5).epsilon(1e-15));
    CHECK(neg_log_ratio(StandardGND{1.0}, -2.0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(neg_log_ratio(ScaledGND{2.0, 0.5}, 1.0) == doctest::Approx(8.0).epsilon(1e-15));
    CHECK(neg_log_ratio(AsymmetricLaplace{205.0, 5.0}, 0.1) ==
          doctest::Approx(20.5).epsilon(1e-15));
    CHECK(neg_log_ratio(AsymmetricLaplace{205.0, 5.0}, -0.1) ==
          doctest::Approx(0.5).epsilon(1e-15));
    CHECK(neg_log_ratio(AsymmetricLaplace{205.0, 5.0}, 0.0) == 0.0);
    CHECK_THROWS(neg_log_ratio(NonInformative{}, 1.0));
    CustomDensity huber;
    huber.neg_log_ratio = [](double y) {
        const double a = std::abs(y);
        return a <= 1.0 ? 0.5 * a * a : a - 0.5;
    };
    CHECK(neg_log_ratio(Density{huber}, 3.0) == doctest::Approx(2.5).epsilon(1e-15));
    CustomDensity negative;
    negative.neg_log_ratio = [](double) { return -1.0; };
    CHECK_THROWS(neg_log_ratio(Density{negative}, 1.0));
}

TEST_CASE("log density at zero") {
    CHECK(log_density_at_zero(StandardGND{2.0}) ==
          doctest::Approx(-0.22579135264472743).epsilon(1e-15));
    // Scaling by s shifts the log-density by -log s.
    CHECK(log_density_at_zero(ScaledGND{2.0, 0.2}) ==
          doctest::Approx(1.3836465597893729).epsilon(1e-15));
    // Two exponential tails with rates a, b normalize to p(0) = ab/(a+b).
    CHECK(log_density_at_zero(AsymmetricLaplace{205.0, 5.0}) ==
          doctest::Approx(1.5853403608550399).epsilon(1e-15));
    CustomDensity c;
    c.neg_log_ratio = [](double y) { return std::abs(y); };
    CHECK(log_density_at_zero(Density{c}) == 0.0);
    CHECK_THROWS(log_density_at_zero(NonInformative{}));
}

TEST_CASE("modified residual") {
    CHECK(modified_residual(0.0, 1e-3, 2.0) ==
          doctest::Approx(0.031622776601683793).epsilon(1e-15));
    CHECK(modified_residual(-2.0, 1e-3, 2.0) ==
          doctest::Approx(-2.0002499843769528).epsilon(1e-15));
    CHECK(modified_residual(1.5, 1e-2, 4.0) ==
          doctest::Approx(1.2261034368426225).epsilon(1e-15));
    // The zero-residual convention: sgn(0) = +1, so the value is positive.
    CHECK(modified_residual(0.0, 1e-8, 2.0) > 0.0);
    CHECK(modified_residual(-1e-300, 1e-8, 2.0) < 0.0);
    CHECK_THROWS(modified_residual(1.0, 0.0, 2.0));
    CHECK_THROWS(modified_residual(1.0, 1e-3, 0.5));
}

TEST_CASE("reweighting values") {
    // A quadratic density has constant weight regardless of the residual.
    for (const double r : {-5.0, 0.0, 0.3, 100.0}) {
        const double rho = modified_residual(r, 1e-3, 2.0);
        CHECK(irls_weight(StandardGND{2.0}, rho, 2.0) == doctest::Approx(2.0).epsilon(1e-15));
    }
    CHECK(irls_weight(StandardGND{1.0}, modified_residual(3.0, 1e-3, 2.0), 2.0) ==
          doctest::Approx(0.33331481635788182).epsilon(1e-15));
    CHECK(irls_weight(StandardGND{1.0}, modified_residual(0.0, 1e-3, 2.0), 2.0) ==
          doctest::Approx(31.622776601683793).epsilon(1e-15));
    CHECK(irls_weight(StandardGND{0.5}, modified_residual(1.2, 1e-3, 2.0), 2.0) ==
          doctest::Approx(0.38016490178610204).epsilon(1e-15));
    // Flat priors never contribute weight.
    CHECK(irls_weight(NonInformative{}, 0.123, 2.0) == 0.0);
    CHECK_THROWS(irls_weight(StandardGND{1.0}, 0.0, 2.0));
}

TEST_CASE("weight times |rho|^qbar reproduces the negative log ratio") {
    // This identity is what makes each least-squares pass match the objective
    // at the current point.
    const std::vector<Density> densities = {StandardGND{0.5},       StandardGND{1.0},
                                            StandardGND{2.0},       StandardGND{3.7},
                                            ScaledGND{1.3, 0.4},    AsymmetricLaplace{2.0, 5.0}};
    for (const Density& d : densities) {
        for (const double r : {-3.0, -0.1, 0.0, 0.7, 42.0}) {
            for (const double alpha : {1e-2, 1e-4}) {
                for (const double qbar : {2.0, 4.0}) {
                    const double rho = modified_residual(r, alpha, qbar);
                    const double w = irls_weight(d, rho, qbar);
                    const double lhs = w * std::pow(std::abs(rho), qbar);
                    const double rhs = neg_log_ratio(d, rho);
                    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
                }
            }
        }
    }
}

TEST_CASE("density validation") {
    CHECK_THROWS(validate_density(StandardGND{0.0}));
    CHECK_THROWS(validate_density(StandardGND{-1.0}));
    CHECK_THROWS(validate_density(ScaledGND{2.0, 0.0}));
    CHECK_THROWS(validate_density(ScaledGND{0.0, 1.0}));
    CHECK_THROWS(validate_density(AsymmetricLaplace{0.0, 1.0}));
    CHECK_THROWS(validate_density(AsymmetricLaplace{1.0, -1.0}));
    CHECK_THROWS(validate_density(CustomDensity{}));
    CHECK_NOTHROW(validate_density(NonInformative{}));
    CHECK_NOTHROW(validate_density(StandardGND{0.4}));
}

TEST_CASE("density classification") {
    CHECK(is_gnd(StandardGND{1.0}));
    CHECK(is_gnd(ScaledGND{2.0, 0.3}));
    CHECK_FALSE(is_gnd(AsymmetricLaplace{1.0, 1.0}));
    CHECK_FALSE(is_gnd(NonInformative{}));
    CHECK(density_degree(StandardGND{0.5}) == 0.5);
    CHECK(density_degree(ScaledGND{4.0, 1.0}) == 4.0);
    CHECK(density_degree(AsymmetricLaplace{1.0, 2.0}) == 1.0);
    CHECK(density_degree(NonInformative{}) == 1.0);
}
