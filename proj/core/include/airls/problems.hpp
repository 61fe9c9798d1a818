#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "airls/model.hpp"

namespace airls {

// A generated estimation problem: the model, the ground truth for every
// unknown coordinate, a starting point (observed quantities at their measured
// values, latent ones at zero unless a zero init is degenerate), and
// reproducibility metadata. Generators draw the ground truth from a stream
// derived from `seed` and the measurement noise from a stream derived from
// `noise_seed`, so re-noised replicates of the same truth are obtained by
// varying noise_seed alone.
struct ProblemInstance {
    MultiaffineModel model;
    Eigen::VectorXd x_true;
    Eigen::VectorXd x_init;
    std::string generator;
    std::string params_json;
    std::uint64_t seed = 0;
    std::uint64_t noise_seed = 0;
};

// Market equilibrium model: T supply observations, n_T producers; unknown
// per-period prices P_t (blocks of size n_T) and producer margins tau (one
// block). Supplies carry a heavy-tailed prior (exponent 2/5), the price
// balance is Gaussian, the demand response is Laplace, and tau has a flat
// prior. noise_ratio multiplies relative perturbations of the observations.
ProblemInstance gen_supply_demand(int T, int n_T, double noise_ratio, std::uint64_t seed,
                                  std::optional<std::uint64_t> noise_seed = {});

// Network admittance identification: a sparse symmetric conductance-like
// matrix Y (n_nodes x n_nodes, connected, diagonally dominated) and n_samples
// correlated voltage profiles near 1. Unknown blocks: the columns of Y and
// every voltage sample; Gaussian likelihoods on current and voltage readings
// plus an entrywise Laplace sparsity prior on Y whose rate is multiplied by
// prior_weight (0 removes the prior entirely).
ProblemInstance gen_admittance(int n_nodes, int n_samples, double noise_level, std::uint64_t seed,
                               double prior_weight = 1.0,
                               std::optional<std::uint64_t> noise_seed = {});

// Errors-in-variables system identification from exponentially-weighted
// autocorrelation statistics. The trajectory x_{t+1} = A x_t + B u_t is
// measured with Laplace noise of relative size noise_level, and a fraction
// outlier_ratio of the raw measurements is corrupted by uniform outliers as
// large as the signal itself. (n_x, n_u) = (2, 0) gives the drifting
// integrator chain; (2, 1) the integrator chain driven by a white
// acceleration input; anything else a random stable system. Every channel is
// standardized by its measured mean magnitude before the statistics are
// built, so the unknown blocks are Theta~ = Sx^-1 [A B] Sz and the
// standardized statistics Z~; the scales are recorded in the instance
// parameters and in SysidData, letting callers map estimates back to
// physical units. All factors are unit-rate Laplace.
ProblemInstance gen_eiv_sysid(int n_x, int n_u, int T, double outlier_ratio, std::uint64_t seed,
                              double noise_level = 0.01, double beta = 1.0,
                              std::optional<std::uint64_t> noise_seed = {});

// Agricultural water-use network over T days: observed pressure P, humidity
// H, release W and day-of-year transform D; unknown rain R and irradiance I
// (two blocks of size T). Densities: Gaussian humidity/release chains, an
// asymmetric Laplace irradiance response, and a rain law split into a Laplace
// deviation around 3 P (1 - D) plus a steep one-sided penalty on negative
// rain. noise_ratio scales every conditional draw away from its mode.
ProblemInstance gen_water(int T, double noise_ratio, std::uint64_t seed,
                          std::optional<std::uint64_t> noise_seed = {});

// Generalized principal component analysis: n_points points near a union of
// n_subspaces hyperplanes in R^dim; the product of the normals' inner
// products with each point is GND(q) distributed. One block per normal
// vector, plus a Gaussian anchor factor per block that fixes scale and sign
// against a noisy copy of the true normal.
ProblemInstance gen_gpca(int n_subspaces, int dim, int n_points, double q, std::uint64_t seed,
                         std::optional<std::uint64_t> noise_seed = {});

// Rank-1 tensor (matrix) regression: Z_th = <Phi_t, x1> x2_h + GND(q) noise,
// with optional uniform outliers on a fraction outlier_ratio of the entries.
// Blocks x1, x2; the factorization is identifiable only up to scale, so
// errors should be measured on the outer product. The initial point is a
// random nonzero draw because x = 0 is a fixed point of the updates.
ProblemInstance gen_tensor_regression(int n1, int n2, int n_samples, double q, std::uint64_t seed,
                                      double outlier_ratio = 0.0,
                                      std::optional<std::uint64_t> noise_seed = {});

// Dispatch by generator name with key=value parameters (stringly typed, as
// accepted by the command line). Unknown names or keys throw.
ProblemInstance make_problem(const std::string& name,
                             const std::map<std::string, std::string>& params);

// Measured statistics of an eiv_sysid instance, read back out of the factor
// constants: Y is n_x x n_c (regression targets), Z is n_z x n_c (anchored
// filtered statistics), both in standardized channel coordinates. x_scale
// and u_scale are the per-channel standardization factors; a parameter
// estimate maps back to physical units via
// Theta(l, j) = Theta~(l, j) * x_scale[l] / z_scale[j] with z_scale =
// [x_scale; u_scale]. Lets baselines run on exactly the data the model saw.
// Throws if the instance was not produced by gen_eiv_sysid.
struct SysidData {
    Eigen::MatrixXd Y;
    Eigen::MatrixXd Z;
    int n_x = 0;
    int n_u = 0;
    Eigen::VectorXd x_scale;
    Eigen::VectorXd u_scale;
};
SysidData sysid_data(const ProblemInstance& instance);

// Relative root-mean-square error ||estimate - truth|| / ||truth||.
double rrms(const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth);

// Same restricted to one named block of the model.
double block_rrms(const MultiaffineModel& model, const std::string& block_name,
                  const Eigen::VectorXd& x_hat, const Eigen::VectorXd& x_true);

}  // namespace airls
