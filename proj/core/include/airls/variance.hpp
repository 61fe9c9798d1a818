#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include <Eigen/Dense>

#include "airls/model.hpp"

namespace airls {

struct SamplerConfig {
    // Per-coordinate standard deviation of the Gaussian sampler that perturbs
    // every coordinate OUTSIDE the target block around its estimate. Must
    // have one entry per model coordinate; entries inside the target block
    // are ignored.
    Eigen::VectorXd scale;
    int n_samples = 100;
    std::uint64_t seed = 0;
    double alpha = 1e-3;             // smoothing used in the reweighting
    std::optional<double> svd_rtol;  // pseudoinverse cutoff override
};

struct CovarianceEstimate {
    Eigen::MatrixXd sigma;
    // Sum of the normalized importance weights (the largest is 1); values
    // close to 1 indicate a degenerate average dominated by a single sample.
    double effective_weight_sum = 0.0;
};

// Likelihood-weighted covariance of the target block around x_hat: nuisance
// coordinates are sampled around their estimates, and each sample contributes
// a local weighted-least-squares covariance plus a bias outer product,
// averaged with importance weights proportional to the model likelihood.
// The per-sample residual spans every informative factor of the model (rows
// without unknowns included); flat densities are ignored.
CovarianceEstimate estimate_covariance(const MultiaffineModel& model,
                                       const Eigen::VectorXd& x_hat, int block,
                                       const SamplerConfig& cfg);

// Same estimator with the per-sample matrix inverse replaced by a first-order
// expansion around the unperturbed system: P_hat - (F_k^T W_k F_k - H_hat).
// Coincides with estimate_covariance as the sampler scale shrinks to zero.
CovarianceEstimate estimate_covariance_fast(const MultiaffineModel& model,
                                            const Eigen::VectorXd& x_hat, int block,
                                            const SamplerConfig& cfg);

// Ground-truth empirical covariance over independently re-noised replicates:
// replicate(k) must return a full solution vector for the k-th replicate, and
// the covariance of coordinates [offset, offset + size) is returned.
Eigen::MatrixXd resampling_covariance(const std::function<Eigen::VectorXd(int)>& replicate,
                                      int n_replicates, int offset, int size);

// Number of worker threads: hardware concurrency capped by the AIRLS_THREADS
// environment variable (at least 1).
int thread_budget();

// Runs body(0..n-1) on up to thread_budget() threads. Results must be written
// to disjoint slots; exceptions are rethrown on the calling thread.
void parallel_for(int n, const std::function<void(int)>& body);

}  // namespace airls
