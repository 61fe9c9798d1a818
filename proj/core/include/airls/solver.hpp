#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "airls/model.hpp"

namespace airls {

enum class BlockOrder { Ascending, Custom, Shuffled };

struct SolverConfig {
    double alpha = 1e-3;  // residual smoothing constant
    double tol = 1e-8;    // relative threshold on the per-sweep likelihood decrease
    int max_sweeps = 1000;
    BlockOrder order = BlockOrder::Ascending;
    std::vector<int> custom_order;   // permutation of blocks, used with BlockOrder::Custom
    std::uint64_t seed = 0;          // sweep order shuffling, used with BlockOrder::Shuffled
    std::optional<double> svd_rtol;  // pseudoinverse cutoff override (relative to sigma_max)
    bool record_trace = true;
};

struct SweepRecord {
    int sweep = 0;    // 1-based
    double L = 0;     // smoothed negative log-likelihood -sum_h log p_h(rho_hat_h)
    double Ghat = 0;  // surrogate objective at the solve's alpha
    double G = 0;     // exact negative log-likelihood
    double max_block_delta = 0;
    double elapsed_s = 0;
};

enum class Termination { Converged, MaxSweeps, Stalled };

const char* to_string(Termination t);

struct SolveResult {
    Eigen::VectorXd x_hat;
    std::vector<SweepRecord> trace;
    int sweeps = 0;
    Termination termination = Termination::Converged;
    // Guaranteed gap to the unsmoothed surrogate optimum; present only when
    // qbar == 2 and every factor is a GND.
    std::optional<double> epsilon_bound;
    // True when asymmetric-Laplace or custom factors are present: the
    // reweighting extends beyond the densities the descent guarantee covers.
    bool heuristic_mode = false;
    std::vector<std::string> diagnostics;
};

// Minimum-norm solution of min_x ||F x - C||_W^2 with W = diag(w), i.e.
// (F^T W F)^+ F^T W C, computed from the SVD of sqrt(W) F with singular
// values below rtol * sigma_max treated as zero. Default rtol is
// max(rows, cols) * machine epsilon.
Eigen::VectorXd weighted_ls_update(const Eigen::MatrixXd& F, const Eigen::VectorXd& C,
                                   const Eigen::VectorXd& w,
                                   std::optional<double> rtol = std::nullopt);

// Row weights for a linearized system at the point it was built from:
// w_h = neg_log_ratio(d_h, rho_hat_h) / |rho_hat_h|^qbar with rho_hat_h the
// modified residual of r_h = (F x_i - C)_h.
Eigen::VectorXd irls_row_weights(const MultiaffineModel& model, const LinearizedSystem& sys,
                                 const Eigen::VectorXd& x_block, double alpha, double qbar);

// One block-coordinate pass in the configured order; weights are refreshed
// from the current x before every block update. Returns the largest block
// update norm of the pass.
double airls_sweep(const MultiaffineModel& model, Eigen::VectorXd& x, const SolverConfig& cfg);

// Alternating iteratively reweighted least squares until the smoothed
// likelihood decrease falls below tol * (1 + |L|), max_sweeps is reached, or
// block updates stall below 1e-14 for three consecutive sweeps.
SolveResult airls_solve(const MultiaffineModel& model, const Eigen::VectorXd& x_init,
                        const SolverConfig& cfg = {});

// Exact negative log-likelihood -sum_h log p_h(r_h(x)). Flat priors
// contribute 0; custom densities are normalized to p(0) = 1.
double eval_G(const MultiaffineModel& model, const Eigen::VectorXd& x);

// Surrogate objective: -sum_h log p_h(0) + sum_h neg_log_ratio_h(rho_hat_h)/deg_h
// with deg_h the GND tail exponent (1 otherwise). For plain GND factors the
// h-th term is (r_h(x)^2 + alpha)^{q_h/qbar}. Nonincreasing along sweeps for
// all-GND models; alpha = 0 evaluates the unsmoothed limit that the
// suboptimality bound refers to.
double eval_Ghat(const MultiaffineModel& model, const Eigen::VectorXd& x, double alpha);

// Width of the surrogate sandwich, sum_h alpha^{q_h/2} / s_h^{q_h}
// (s_h = 1 for plain GND), when qbar == 2 and every factor is a GND;
// nullopt otherwise.
std::optional<double> suboptimality_bound(const MultiaffineModel& model, double alpha);

}  // namespace airls
