#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include <Eigen/Dense>

namespace airls {

struct ZogdConfig {
    double step0 = 1.0;       // initial step size
    double decay = 0.99995;   // per-iteration geometric step decay
    double mu0 = 1e-4;        // finite-difference radius scale: mu = mu0 * (1 + ||x||)
    long max_iters = 100000;
    std::optional<double> max_seconds;  // wall-clock budget; checked every iteration
    std::uint64_t seed = 0;
    // Invoked after each iteration with (iteration, current x, current f).
    std::function<void(long, const Eigen::VectorXd&, double)> trace;
};

struct ZogdResult {
    Eigen::VectorXd x;       // final iterate
    Eigen::VectorXd x_best;  // lowest objective value seen
    double f_best = 0.0;
    long iters = 0;
    long evals = 0;
};

// Two-point zeroth-order gradient descent: at each iteration a direction u is
// drawn uniformly from the unit sphere and x moves along
// -(f(x + mu u) - f(x - mu u)) / (2 mu) * u with a geometrically decaying step.
ZogdResult zogd_minimize(const std::function<double(const Eigen::VectorXd&)>& objective,
                         const Eigen::VectorXd& x_init, const ZogdConfig& cfg = {});

struct GridSearchResult {
    Eigen::VectorXd x;
    double f = 0.0;
};

// Exhaustive evaluation on the axis-aligned grid with the given spacing over
// [lo, hi] in every coordinate (endpoints included). Throws if the grid
// exceeds 1e8 nodes.
GridSearchResult grid_search_minimize(const std::function<double(const Eigen::VectorXd&)>& objective,
                                      const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                      double spacing);

// Minimum-norm ordinary least squares solution of F x = C.
Eigen::VectorXd ols_solve(const Eigen::MatrixXd& F, const Eigen::VectorXd& C);

}  // namespace airls
