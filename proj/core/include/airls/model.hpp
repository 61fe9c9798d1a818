#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "airls/densities.hpp"

namespace airls {

// A named group of unknowns. The full unknown vector x is the concatenation
// of all blocks in declaration order.
struct Block {
    std::string name;
    int size = 0;
};

// One linear form <vector, x_block> inside a product term.
struct LinearFactor {
    int block = 0;
    Eigen::VectorXd vector;
};

// coeff * prod_m <vector_m, x_{block_m}>. An empty factor list is a constant
// term. A term may reference each block at most once (multiaffinity).
struct ResidualTerm {
    double coeff = 1.0;
    std::vector<LinearFactor> factors;
};

// One residual r_h(x) = sum of terms, with the density its value follows.
struct ModelFactor {
    std::vector<ResidualTerm> terms;
    Density density = StandardGND{2.0};
};

// Multiaffine residual model: every r_h is affine in each block separately.
// qbar = 0 means "infer": the smallest integer >= max tail exponent.
struct MultiaffineModel {
    std::vector<Block> blocks;
    std::vector<ModelFactor> factors;
    double qbar = 0.0;
};

struct ModelInfo {
    std::vector<std::string> warnings;  // e.g. constant factors carried for bookkeeping only
};

// Structural validation: unique nonempty block names, positive sizes, factor
// vectors matching block sizes, at most one linear factor per block per term,
// valid densities, and explicit qbar >= max tail exponent when set.
// Throws std::invalid_argument on violations; returns non-fatal notes.
ModelInfo validate_model(const MultiaffineModel& model);

int total_dim(const MultiaffineModel& model);
std::vector<int> block_offsets(const MultiaffineModel& model);  // size n_B + 1
int block_index(const MultiaffineModel& model, const std::string& name);

// Explicit qbar if set, otherwise ceil(max density_degree) (at least 1).
double effective_qbar(const MultiaffineModel& model);

// True iff every factor is a (possibly scaled) GND.
bool all_gnd(const MultiaffineModel& model);

// r_h(x) for one factor / all factors (including flat-prior and constant ones).
double eval_residual(const MultiaffineModel& model, int factor, const Eigen::VectorXd& x);
// Allocation-free flavour for hot loops: offsets/blocks as precomputed by the caller.
double eval_residual(const ModelFactor& factor, const Eigen::VectorXd& x,
                     const std::vector<int>& offsets, const std::vector<Block>& blocks);
Eigen::VectorXd eval_residuals(const MultiaffineModel& model, const Eigen::VectorXd& x);

// Linearization of the residuals in one block: for every eligible row h,
// r_h(x) = (F x_i - C)_h exactly at the linearization point. Eligible rows are
// factors that are neither flat priors nor constants; factor_rows maps row ->
// factor index. Rows of factors that do not touch the block have F_row = 0.
struct LinearizedSystem {
    Eigen::MatrixXd F;
    Eigen::VectorXd C;
    std::vector<int> factor_rows;
};

LinearizedSystem linearize_block(const MultiaffineModel& model, const Eigen::VectorXd& x,
                                 int block);

// Same, restricted to the given factor indices (preserving their order).
LinearizedSystem linearize_block(const MultiaffineModel& model, const Eigen::VectorXd& x,
                                 int block, const std::vector<int>& factor_indices);

// factor h references block i (some term contains a linear factor on i).
bool factor_touches_block(const ModelFactor& f, int block);

// For each block, the factor indices referencing it.
std::vector<std::vector<int>> factors_by_block(const MultiaffineModel& model);

// Factor indices eligible for linearized rows (non-flat, non-constant).
std::vector<int> eligible_rows(const MultiaffineModel& model);

}  // namespace airls
