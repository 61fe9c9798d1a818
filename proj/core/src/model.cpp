#include "airls/model.hpp"

#include <cmath>
#include <set>
#include <stdexcept>
#include <unordered_set>

namespace airls {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

bool is_constant_factor(const ModelFactor& f) {
    for (const auto& t : f.terms)
        if (!t.factors.empty()) return false;
    return true;
}

// Product over the term's linear factors, skipping block `skip` (pass -1 to
// skip none). Returns coeff * prod <v, x_s>.
double term_value_skipping(const ResidualTerm& t, const Eigen::VectorXd& x,
                           const std::vector<int>& offsets, const std::vector<Block>& blocks,
                           int skip) {
    double v = t.coeff;
    for (const auto& lf : t.factors) {
        if (lf.block == skip) continue;
        v *= lf.vector.dot(x.segment(offsets[lf.block], blocks[lf.block].size));
    }
    return v;
}

}  // namespace

ModelInfo validate_model(const MultiaffineModel& model) {
    ModelInfo info;
    require(!model.blocks.empty(), "model: at least one block required");
    std::unordered_set<std::string> names;
    for (const auto& b : model.blocks) {
        require(!b.name.empty(), "model: block names must be nonempty");
        require(b.size >= 1, "model: block '" + b.name + "' must have size >= 1");
        require(names.insert(b.name).second, "model: duplicate block name '" + b.name + "'");
    }
    require(!model.factors.empty(), "model: at least one factor required");

    const int n_blocks = static_cast<int>(model.blocks.size());
    double max_degree = 1.0;
    int n_constant = 0;
    for (size_t h = 0; h < model.factors.size(); ++h) {
        const auto& f = model.factors[h];
        const std::string where = "factor " + std::to_string(h);
        require(!f.terms.empty(), "model: " + where + " has no terms");
        validate_density(f.density);
        max_degree = std::max(max_degree, density_degree(f.density));
        for (const auto& t : f.terms) {
            require(std::isfinite(t.coeff), "model: " + where + " has a non-finite coefficient");
            std::set<int> seen;
            for (const auto& lf : t.factors) {
                require(lf.block >= 0 && lf.block < n_blocks,
                        "model: " + where + " references block out of range");
                require(seen.insert(lf.block).second,
                        "model: " + where +
                            " has a term referencing one block twice (degree > 1)");
                require(lf.vector.size() == model.blocks[lf.block].size,
                        "model: " + where + " has a vector not matching block '" +
                            model.blocks[lf.block].name + "' size");
                require(lf.vector.allFinite(), "model: " + where + " has a non-finite vector");
            }
        }
        if (is_constant_factor(f)) ++n_constant;
    }

    if (model.qbar != 0.0) {
        require(std::isfinite(model.qbar) && model.qbar >= 1.0, "model: qbar must be >= 1");
        require(model.qbar >= max_degree,
                "model: qbar must be >= the largest density tail exponent");
    }
    if (n_constant > 0)
        info.warnings.push_back(std::to_string(n_constant) +
                                " factor(s) reference no unknowns; they only shift the "
                                "likelihood and are excluded from linearized systems");
    return info;
}

int total_dim(const MultiaffineModel& model) {
    int n = 0;
    for (const auto& b : model.blocks) n += b.size;
    return n;
}

std::vector<int> block_offsets(const MultiaffineModel& model) {
    std::vector<int> off(model.blocks.size() + 1, 0);
    for (size_t i = 0; i < model.blocks.size(); ++i) off[i + 1] = off[i] + model.blocks[i].size;
    return off;
}

int block_index(const MultiaffineModel& model, const std::string& name) {
    for (size_t i = 0; i < model.blocks.size(); ++i)
        if (model.blocks[i].name == name) return static_cast<int>(i);
    throw std::invalid_argument("model: no block named '" + name + "'");
}

double effective_qbar(const MultiaffineModel& model) {
    if (model.qbar != 0.0) return model.qbar;
    double max_degree = 1.0;
    for (const auto& f : model.factors) max_degree = std::max(max_degree, density_degree(f.density));
    return std::ceil(max_degree);
}

bool all_gnd(const MultiaffineModel& model) {
    // Flat priors carry no information and do not count against the
    // GND-only guarantees; anything else non-GND does.
    for (const auto& f : model.factors)
        if (!is_gnd(f.density) && !std::holds_alternative<NonInformative>(f.density)) return false;
    return true;
}

double eval_residual(const ModelFactor& factor, const Eigen::VectorXd& x,
                     const std::vector<int>& offsets, const std::vector<Block>& blocks) {
    double r = 0.0;
    for (const auto& t : factor.terms) r += term_value_skipping(t, x, offsets, blocks, -1);
    return r;
}

double eval_residual(const MultiaffineModel& model, int factor, const Eigen::VectorXd& x) {
    const auto offsets = block_offsets(model);
    require(x.size() == offsets.back(), "eval_residual: x has wrong dimension");
    require(factor >= 0 && factor < static_cast<int>(model.factors.size()),
            "eval_residual: factor index out of range");
    return eval_residual(model.factors[static_cast<size_t>(factor)], x, offsets, model.blocks);
}

Eigen::VectorXd eval_residuals(const MultiaffineModel& model, const Eigen::VectorXd& x) {
    const auto offsets = block_offsets(model);
    require(x.size() == offsets.back(), "eval_residuals: x has wrong dimension");
    Eigen::VectorXd r(model.factors.size());
    for (size_t h = 0; h < model.factors.size(); ++h) {
        double v = 0.0;
        for (const auto& t : model.factors[h].terms)
            v += term_value_skipping(t, x, offsets, model.blocks, -1);
        r[static_cast<int>(h)] = v;
    }
    return r;
}

bool factor_touches_block(const ModelFactor& f, int block) {
    for (const auto& t : f.terms)
        for (const auto& lf : t.factors)
            if (lf.block == block) return true;
    return false;
}

std::vector<std::vector<int>> factors_by_block(const MultiaffineModel& model) {
    std::vector<std::vector<int>> by_block(model.blocks.size());
    for (size_t h = 0; h < model.factors.size(); ++h)
        for (size_t i = 0; i < model.blocks.size(); ++i)
            if (factor_touches_block(model.factors[h], static_cast<int>(i)))
                by_block[i].push_back(static_cast<int>(h));
    return by_block;
}

std::vector<int> eligible_rows(const MultiaffineModel& model) {
    std::vector<int> rows;
    rows.reserve(model.factors.size());
    for (size_t h = 0; h < model.factors.size(); ++h) {
        const auto& f = model.factors[h];
        if (std::holds_alternative<NonInformative>(f.density)) continue;
        if (is_constant_factor(f)) continue;
        rows.push_back(static_cast<int>(h));
    }
    return rows;
}

LinearizedSystem linearize_block(const MultiaffineModel& model, const Eigen::VectorXd& x,
                                 int block, const std::vector<int>& factor_indices) {
    const auto offsets = block_offsets(model);
    require(x.size() == offsets.back(), "linearize_block: x has wrong dimension");
    require(block >= 0 && block < static_cast<int>(model.blocks.size()),
            "linearize_block: block index out of range");
    const int n_i = model.blocks[block].size;

    LinearizedSystem sys;
    sys.F = Eigen::MatrixXd::Zero(static_cast<int>(factor_indices.size()), n_i);
    sys.C = Eigen::VectorXd::Zero(static_cast<int>(factor_indices.size()));
    sys.factor_rows = factor_indices;

    for (size_t row = 0; row < factor_indices.size(); ++row) {
        const int h = factor_indices[row];
        require(h >= 0 && h < static_cast<int>(model.factors.size()),
                "linearize_block: factor index out of range");
        for (const auto& t : model.factors[h].terms) {
            const LinearFactor* on_block = nullptr;
            for (const auto& lf : t.factors)
                if (lf.block == block) on_block = &lf;
            if (on_block) {
                const double rest = term_value_skipping(t, x, offsets, model.blocks, block);
                sys.F.row(static_cast<int>(row)) += rest * on_block->vector.transpose();
            } else {
                sys.C[static_cast<int>(row)] -=
                    term_value_skipping(t, x, offsets, model.blocks, -1);
            }
        }
    }
    return sys;
}

LinearizedSystem linearize_block(const MultiaffineModel& model, const Eigen::VectorXd& x,
                                 int block) {
    return linearize_block(model, x, block, eligible_rows(model));
}

}  // namespace airls
