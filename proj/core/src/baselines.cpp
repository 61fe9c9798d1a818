#include "airls/baselines.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "airls/rng.hpp"
#include "airls/solver.hpp"

namespace airls {

ZogdResult zogd_minimize(const std::function<double(const Eigen::VectorXd&)>& objective,
                         const Eigen::VectorXd& x_init, const ZogdConfig& cfg) {
    if (x_init.size() == 0) throw std::invalid_argument("zogd_minimize: empty initial point");
    if (!(cfg.step0 > 0.0) || !(cfg.decay > 0.0) || cfg.decay > 1.0 || !(cfg.mu0 > 0.0)) {
        throw std::invalid_argument("zogd_minimize: step0, decay and mu0 must be positive "
                                    "(decay at most 1)");
    }
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(cfg.seed);
    const Eigen::Index dim = x_init.size();

    ZogdResult result;
    result.x = x_init;
    result.x_best = x_init;
    result.f_best = objective(x_init);
    result.evals = 1;

    double step = cfg.step0;
    Eigen::VectorXd u(dim);
    for (long k = 0; k < cfg.max_iters; ++k) {
        if (cfg.max_seconds &&
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() >=
                *cfg.max_seconds) {
            break;
        }
        // Uniform direction on the sphere via a normalized Gaussian draw.
        double norm2 = 0.0;
        do {
            for (Eigen::Index j = 0; j < dim; ++j) u[j] = rng.normal();
            norm2 = u.squaredNorm();
        } while (norm2 == 0.0);
        u /= std::sqrt(norm2);

        const double mu = cfg.mu0 * (1.0 + result.x.norm());
        const Eigen::VectorXd x_plus = result.x + mu * u;
        const Eigen::VectorXd x_minus = result.x - mu * u;
        const double f_plus = objective(x_plus);
        const double f_minus = objective(x_minus);
        result.evals += 2;
        if (std::isfinite(f_plus) && f_plus < result.f_best) {
            result.f_best = f_plus;
            result.x_best = x_plus;
        }
        if (std::isfinite(f_minus) && f_minus < result.f_best) {
            result.f_best = f_minus;
            result.x_best = x_minus;
        }
        const double directional = (f_plus - f_minus) / (2.0 * mu);
        result.x -= step * directional * u;
        step *= cfg.decay;
        ++result.iters;
        if (cfg.trace) cfg.trace(result.iters, result.x, std::min(f_plus, f_minus));
    }
    return result;
}

GridSearchResult grid_search_minimize(
    const std::function<double(const Eigen::VectorXd&)>& objective, const Eigen::VectorXd& lo,
    const Eigen::VectorXd& hi, double spacing) {
    if (lo.size() != hi.size() || lo.size() == 0) {
        throw std::invalid_argument("grid_search_minimize: lo and hi must be nonempty and agree");
    }
    if (!(spacing > 0.0)) {
        throw std::invalid_argument("grid_search_minimize: spacing must be positive");
    }
    const Eigen::Index dim = lo.size();
    std::vector<long> counts(static_cast<std::size_t>(dim));
    double total = 1.0;
    for (Eigen::Index d = 0; d < dim; ++d) {
        if (!(hi[d] >= lo[d])) {
            throw std::invalid_argument("grid_search_minimize: hi must be >= lo");
        }
        counts[static_cast<std::size_t>(d)] =
            static_cast<long>(std::floor((hi[d] - lo[d]) / spacing)) + 1;
        total *= static_cast<double>(counts[static_cast<std::size_t>(d)]);
    }
    if (total > 1e8) {
        throw std::invalid_argument("grid_search_minimize: grid exceeds 1e8 nodes; widen the "
                                    "spacing or narrow the bounds");
    }

    GridSearchResult best;
    best.f = std::numeric_limits<double>::infinity();
    std::vector<long> idx(static_cast<std::size_t>(dim), 0);
    Eigen::VectorXd x(dim);
    for (;;) {
        for (Eigen::Index d = 0; d < dim; ++d) {
            x[d] = lo[d] + spacing * static_cast<double>(idx[static_cast<std::size_t>(d)]);
        }
        const double f = objective(x);
        if (f < best.f) {
            best.f = f;
            best.x = x;
        }
        Eigen::Index d = 0;
        while (d < dim) {
            if (++idx[static_cast<std::size_t>(d)] < counts[static_cast<std::size_t>(d)]) break;
            idx[static_cast<std::size_t>(d)] = 0;
            ++d;
        }
        if (d == dim) break;
    }
    return best;
}

Eigen::VectorXd ols_solve(const Eigen::MatrixXd& F, const Eigen::VectorXd& C) {
    return weighted_ls_update(F, C, Eigen::VectorXd::Ones(F.rows()));
}

}  // namespace airls
