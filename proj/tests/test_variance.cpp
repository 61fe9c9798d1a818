#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <vector>

#include "airls/densities.hpp"
#include "airls/rng.hpp"
#include "airls/solver.hpp"
#include "airls/variance.hpp"
#include "test_support.hpp"

using namespace airls;
using airls::testing::linear_model;
using airls::testing::random_vector;

namespace {

// Two-block bilinear model: residuals a_i b_j - z_ij.
MultiaffineModel bilinear_model(const Eigen::MatrixXd& Z, const Density& density) {
    MultiaffineModel model;
    model.blocks = {{"a", static_cast<int>(Z.rows())}, {"b", static_cast<int>(Z.cols())}};
    for (Eigen::Index i = 0; i < Z.rows(); ++i) {
        for (Eigen::Index j = 0; j < Z.cols(); ++j) {
            ModelFactor f;
            ResidualTerm bil;
            bil.coeff = 1.0;
            bil.factors.push_back({0, Eigen::VectorXd::Unit(Z.rows(), i)});
            bil.factors.push_back({1, Eigen::VectorXd::Unit(Z.cols(), j)});
            f.terms.push_back(std::move(bil));
            ResidualTerm obs;
            obs.coeff = -Z(i, j);
            f.terms.push_back(std::move(obs));
            f.density = density;
            model.factors.push_back(std::move(f));
        }
    }
    return model;
}

}  // namespace

TEST_CASE("fast estimator coincides with the sampled one as the scale vanishes") {
    Rng rng(501);
    const Eigen::VectorXd a = random_vector(rng, 2, 0.5, 1.5);
    const Eigen::VectorXd b = random_vector(rng, 3, 0.5, 1.5);
    Eigen::MatrixXd Z = a * b.transpose();
    for (Eigen::Index i = 0; i < Z.rows(); ++i)
        for (Eigen::Index j = 0; j < Z.cols(); ++j) Z(i, j) += 0.01 * rng.normal();
    const MultiaffineModel model = bilinear_model(Z, StandardGND{2.0});

    Eigen::VectorXd x0(5);
    x0 << 1.0, 1.0, 1.0, 1.0, 1.0;
    const SolveResult res = airls_solve(model, x0, SolverConfig{});

    SamplerConfig cfg;
    cfg.n_samples = 6;
    cfg.seed = 7;

    SUBCASE("zero scale: bit-level agreement") {
        cfg.scale = Eigen::VectorXd::Zero(5);
        const CovarianceEstimate slow = estimate_covariance(model, res.x_hat, 0, cfg);
        const CovarianceEstimate fast = estimate_covariance_fast(model, res.x_hat, 0, cfg);
        CHECK((slow.sigma - fast.sigma).norm() <= 1e-12 * (1.0 + slow.sigma.norm()));
    }
    SUBCASE("tiny scale: first-order agreement") {
        cfg.scale = Eigen::VectorXd::Constant(5, 1e-8);
        const CovarianceEstimate slow = estimate_covariance(model, res.x_hat, 0, cfg);
        const CovarianceEstimate fast = estimate_covariance_fast(model, res.x_hat, 0, cfg);
        CHECK((slow.sigma - fast.sigma).norm() <= 1e-6 * (1.0 + slow.sigma.norm()));
    }
}

TEST_CASE("single-block quadratic model reproduces the least-squares covariance") {
    // y = F x* + sigma e with Gaussian factors of matching scale: the
    // local covariance should approximate sigma^2 (F^T F)^{-1}.
    Rng rng(502);
    const int n = 60, p = 2;
    const Eigen::MatrixXd F = Eigen::MatrixXd::NullaryExpr(
        n, p, [&](Eigen::Index, Eigen::Index) { return rng.normal(); });
    const Eigen::VectorXd x_star = random_vector(rng, p);
    const double sigma = 0.1;
    Eigen::VectorXd y = F * x_star;
    for (int i = 0; i < n; ++i) y[i] += sigma * rng.normal();
    const MultiaffineModel model = linear_model(F, y, ScaledGND{2.0, 2.0 * sigma});

    const SolveResult res = airls_solve(model, Eigen::VectorXd::Zero(p), SolverConfig{});

    SamplerConfig cfg;
    cfg.scale = Eigen::VectorXd::Zero(p);  // single block: nothing to perturb
    cfg.n_samples = 4;
    const CovarianceEstimate est = estimate_covariance(model, res.x_hat, 0, cfg);

    const Eigen::MatrixXd reference = sigma * sigma * (F.transpose() * F).inverse();
    // A single noise realization only pins the scale loosely.
    const double ratio = est.sigma.trace() / reference.trace();
    CHECK(ratio > 0.3);
    CHECK(ratio < 3.0);
    CHECK(est.effective_weight_sum == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("covariance estimates are symmetric positive semidefinite") {
    Rng rng(503);
    const Eigen::VectorXd a = random_vector(rng, 3, 0.5, 1.5);
    const Eigen::VectorXd b = random_vector(rng, 2, 0.5, 1.5);
    Eigen::MatrixXd Z = a * b.transpose();
    const MultiaffineModel model = bilinear_model(Z, StandardGND{1.0});
    Eigen::VectorXd x0 = Eigen::VectorXd::Ones(5);
    const SolveResult res = airls_solve(model, x0, SolverConfig{});

    SamplerConfig cfg;
    cfg.scale = Eigen::VectorXd::Constant(5, 0.05);
    cfg.n_samples = 32;
    const CovarianceEstimate est = estimate_covariance(model, res.x_hat, 1, cfg);
    CHECK((est.sigma - est.sigma.transpose()).norm() < 1e-14);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(est.sigma);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-14);
}

TEST_CASE("thread count does not change the estimate") {
    Rng rng(504);
    const Eigen::VectorXd a = random_vector(rng, 2, 0.5, 1.5);
    const Eigen::VectorXd b = random_vector(rng, 2, 0.5, 1.5);
    const Eigen::MatrixXd Z = a * b.transpose();
    const MultiaffineModel model = bilinear_model(Z, StandardGND{2.0});
    const Eigen::VectorXd x_hat = Eigen::VectorXd::Ones(4);

    SamplerConfig cfg;
    cfg.scale = Eigen::VectorXd::Constant(4, 0.02);
    cfg.n_samples = 24;

    setenv("AIRLS_THREADS", "1", 1);
    const CovarianceEstimate serial = estimate_covariance(model, x_hat, 0, cfg);
    setenv("AIRLS_THREADS", "4", 1);
    const CovarianceEstimate parallel = estimate_covariance(model, x_hat, 0, cfg);
    unsetenv("AIRLS_THREADS");
    CHECK(serial.sigma == parallel.sigma);  // per-sample streams, ordered reduction
}

TEST_CASE("sampler input validation") {
    Rng rng(505);
    const Eigen::MatrixXd Z = Eigen::MatrixXd::Ones(2, 2);
    const MultiaffineModel model = bilinear_model(Z, StandardGND{2.0});
    const Eigen::VectorXd x_hat = Eigen::VectorXd::Ones(4);

    SamplerConfig cfg;
    cfg.scale = Eigen::VectorXd::Constant(4, 0.1);
    cfg.n_samples = 1;
    CHECK_THROWS((void)estimate_covariance(model, x_hat, 0, cfg));
    cfg.n_samples = 4;
    cfg.scale = Eigen::VectorXd::Constant(3, 0.1);
    CHECK_THROWS((void)estimate_covariance(model, x_hat, 0, cfg));
    cfg.scale = Eigen::VectorXd::Constant(4, -1.0);
    CHECK_THROWS((void)estimate_covariance(model, x_hat, 0, cfg));
    cfg.scale = Eigen::VectorXd::Constant(4, 0.1);
    CHECK_THROWS((void)estimate_covariance(model, x_hat, 7, cfg));
    CHECK_THROWS((void)estimate_covariance(model, Eigen::VectorXd::Ones(3), 0, cfg));
}

TEST_CASE("likelihood underflow is reported instead of returning garbage") {
    // A razor-thin density and an enormous sampler scale push every sample's
    // likelihood to zero relative to the estimate.
    Eigen::MatrixXd Z(1, 1);
    Z << 1.0;
    const MultiaffineModel model = bilinear_model(Z, ScaledGND{2.0, 1e-3});
    Eigen::VectorXd x_hat(2);
    x_hat << 1.0, 1.0;
    SamplerConfig cfg;
    Eigen::VectorXd scale(2);
    scale << 0.0, 1e6;  // block "a" is the target; block "b" gets blasted
    cfg.scale = scale;
    cfg.n_samples = 8;
    CHECK_THROWS_AS((void)estimate_covariance(model, x_hat, 0, cfg), std::runtime_error);
}

TEST_CASE("resampling covariance over hand-picked replicates") {
    const std::vector<Eigen::VectorXd> reps = [] {
        std::vector<Eigen::VectorXd> v;
        Eigen::VectorXd r(3);
        r << 1.0, 0.0, 9.0;
        v.push_back(r);
        r << -1.0, 0.0, 9.0;
        v.push_back(r);
        r << 0.0, 2.0, 9.0;
        v.push_back(r);
        r << 0.0, -2.0, 9.0;
        v.push_back(r);
        return v;
    }();
    const Eigen::MatrixXd sigma = resampling_covariance(
        [&](int k) { return reps[static_cast<std::size_t>(k)]; }, 4, 0, 2);
    REQUIRE(sigma.rows() == 2);
    CHECK(sigma(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(sigma(1, 1) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(std::abs(sigma(0, 1)) < 1e-15);

    CHECK_THROWS((void)resampling_covariance([&](int) { return reps[0]; }, 1, 0, 2));
    CHECK_THROWS((void)resampling_covariance([&](int) { return reps[0]; }, 4, 2, 2));
}

TEST_CASE("thread budget respects the environment cap") {
    setenv("AIRLS_THREADS", "1", 1);
    CHECK(thread_budget() == 1);
    setenv("AIRLS_THREADS", "2", 1);
    CHECK(thread_budget() <= 2);
    unsetenv("AIRLS_THREADS");
    CHECK(thread_budget() >= 1);
}
