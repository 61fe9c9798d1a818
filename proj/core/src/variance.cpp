#include "airls/variance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <variant>
#include <vector>

#include "airls/densities.hpp"
#include "airls/rng.hpp"
#include "airls/solver.hpp"

namespace airls {

namespace {

struct SampleTerm {
    double logp = 0.0;
    double sigma2 = 0.0;      // whitened-residual variance
    Eigen::VectorXd m;        // bias of the local weighted LS update
    Eigen::MatrixXd pinv;     // (F^T W F)^+ or its first-order surrogate
};

Eigen::MatrixXd symmetrize_floor(const Eigen::MatrixXd& a) {
    const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    const Eigen::VectorXd lam = eig.eigenvalues().cwiseMax(0.0);
    return eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
}

CovarianceEstimate estimate_impl(const MultiaffineModel& model, const Eigen::VectorXd& x_hat,
                                 int block, const SamplerConfig& cfg, bool fast) {
    validate_model(model);
    const int dim = total_dim(model);
    const int n_blocks = static_cast<int>(model.blocks.size());
    if (block < 0 || block >= n_blocks) {
        throw std::invalid_argument("estimate_covariance: block index out of range");
    }
    if (x_hat.size() != dim || !x_hat.allFinite()) {
        throw std::invalid_argument("estimate_covariance: x_hat must be finite with one entry "
                                    "per model coordinate");
    }
    if (cfg.scale.size() != dim) {
        throw std::invalid_argument("estimate_covariance: sampler scale must have one entry per "
                                    "model coordinate");
    }
    for (Eigen::Index j = 0; j < cfg.scale.size(); ++j) {
        if (!std::isfinite(cfg.scale[j]) || cfg.scale[j] < 0.0) {
            throw std::invalid_argument("estimate_covariance: sampler scale entries must be "
                                        "finite and >= 0");
        }
    }
    if (cfg.n_samples < 2) {
        throw std::invalid_argument("estimate_covariance: at least 2 samples are required");
    }
    if (!(cfg.alpha > 0.0) || !std::isfinite(cfg.alpha)) {
        throw std::invalid_argument("estimate_covariance: alpha must be positive and finite");
    }

    const double qbar = effective_qbar(model);
    const std::vector<int> offsets = block_offsets(model);
    const int offset_i = offsets[static_cast<std::size_t>(block)];
    const int n_i = model.blocks[static_cast<std::size_t>(block)].size;
    const Eigen::VectorXd x_hat_i = x_hat.segment(offset_i, n_i);

    // The whitened residual spans every informative factor, including rows
    // with no unknowns left (e.g. priors on observed quantities): they carry
    // no slope for the target block but still contribute to the residual
    // spread and mean that drive the estimate. Only flat rows are dropped.
    std::vector<int> rows;
    rows.reserve(model.factors.size());
    bool touches = false;
    for (std::size_t h = 0; h < model.factors.size(); ++h) {
        const ModelFactor& f = model.factors[h];
        if (std::holds_alternative<NonInformative>(f.density)) continue;
        rows.push_back(static_cast<int>(h));
        touches = touches || factor_touches_block(f, block);
    }
    if (!touches) {
        throw std::invalid_argument("estimate_covariance: no informative factor touches the "
                                    "target block");
    }

    const LinearizedSystem sys0 = linearize_block(model, x_hat, block, rows);
    const double cutoff =
        cfg.svd_rtol.value_or(static_cast<double>(std::max<Eigen::Index>(sys0.F.rows(), n_i)) *
                              std::numeric_limits<double>::epsilon());

    // Unperturbed system quantities used by the fast expansion.
    Eigen::MatrixXd H_hat, P_hat;
    if (fast) {
        const Eigen::VectorXd w0 = irls_row_weights(model, sys0, x_hat_i, cfg.alpha, qbar);
        const Eigen::MatrixXd A0 = w0.cwiseSqrt().asDiagonal() * sys0.F;
        H_hat = A0.transpose() * A0;
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(A0, Eigen::ComputeThinV);
        P_hat = Eigen::MatrixXd::Zero(n_i, n_i);
        const double smax = svd.singularValues().size() > 0 ? svd.singularValues()[0] : 0.0;
        for (Eigen::Index j = 0; j < svd.singularValues().size(); ++j) {
            const double s = svd.singularValues()[j];
            if (s > cutoff * smax) {
                P_hat += svd.matrixV().col(j) * svd.matrixV().col(j).transpose() / (s * s);
            }
        }
    }

    const double logp_center = -eval_G(model, x_hat);

    std::vector<SampleTerm> terms(static_cast<std::size_t>(cfg.n_samples));
    parallel_for(cfg.n_samples, [&](int k) {
        Rng rng = Rng::stream(cfg.seed, static_cast<std::uint64_t>(k));
        Eigen::VectorXd x = x_hat;
        for (int j = 0; j < dim; ++j) {
            if (j >= offset_i && j < offset_i + n_i) continue;  // target block stays put
            x[j] += cfg.scale[j] * rng.normal();
        }
        const LinearizedSystem sys = linearize_block(model, x, block, rows);
        const Eigen::VectorXd w = irls_row_weights(model, sys, x_hat_i, cfg.alpha, qbar);
        const Eigen::MatrixXd A = w.cwiseSqrt().asDiagonal() * sys.F;
        const Eigen::VectorXd b = w.cwiseSqrt().cwiseProduct(sys.C);
        const Eigen::VectorXd v = A * x_hat_i - b;
        const double rows = static_cast<double>(v.size());
        const double v_mean = v.mean();
        const double sigma2 = v.squaredNorm() / rows - v_mean * v_mean;

        SampleTerm& term = terms[static_cast<std::size_t>(k)];
        term.logp = -eval_G(model, x);
        term.sigma2 = sigma2;
        if (fast) {
            term.pinv = P_hat - (A.transpose() * A - H_hat);
            term.m = v_mean * (term.pinv * (A.transpose() * Eigen::VectorXd::Ones(v.size())));
        } else {
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
            const double smax = svd.singularValues().size() > 0 ? svd.singularValues()[0] : 0.0;
            Eigen::MatrixXd pinv = Eigen::MatrixXd::Zero(n_i, n_i);
            Eigen::VectorXd dagger_ones = Eigen::VectorXd::Zero(n_i);
            const Eigen::VectorXd u_ones = svd.matrixU().transpose() * Eigen::VectorXd::Ones(v.size());
            for (Eigen::Index j = 0; j < svd.singularValues().size(); ++j) {
                const double s = svd.singularValues()[j];
                if (s > cutoff * smax) {
                    pinv += svd.matrixV().col(j) * svd.matrixV().col(j).transpose() / (s * s);
                    dagger_ones += svd.matrixV().col(j) * (u_ones[j] / s);
                }
            }
            term.pinv = std::move(pinv);
            term.m = v_mean * dagger_ones;
        }
    });

    double logp_max = -std::numeric_limits<double>::infinity();
    for (const SampleTerm& t : terms) logp_max = std::max(logp_max, t.logp);
    if (!(logp_max - logp_center >= std::log(1e-300))) {
        throw std::runtime_error(
            "estimate_covariance: every sample's likelihood underflows relative to the "
            "estimate; reduce the sampler scale");
    }

    double z = 0.0;
    Eigen::MatrixXd num = Eigen::MatrixXd::Zero(n_i, n_i);
    Eigen::VectorXd m_sum = Eigen::VectorXd::Zero(n_i);
    for (const SampleTerm& t : terms) {
        const double p = std::exp(t.logp - logp_max);
        z += p;
        num += p * (t.sigma2 * t.pinv + t.m * t.m.transpose());
        m_sum += p * t.m;
    }
    const Eigen::VectorXd m_bar = m_sum / z;

    CovarianceEstimate out;
    out.sigma = symmetrize_floor(num / z - m_bar * m_bar.transpose());
    out.effective_weight_sum = z;
    return out;
}

}  // namespace

CovarianceEstimate estimate_covariance(const MultiaffineModel& model, const Eigen::VectorXd& x_hat,
                                       int block, const SamplerConfig& cfg) {
    return estimate_impl(model, x_hat, block, cfg, false);
}

CovarianceEstimate estimate_covariance_fast(const MultiaffineModel& model,
                                            const Eigen::VectorXd& x_hat, int block,
                                            const SamplerConfig& cfg) {
    return estimate_impl(model, x_hat, block, cfg, true);
}

Eigen::MatrixXd resampling_covariance(const std::function<Eigen::VectorXd(int)>& replicate,
                                      int n_replicates, int offset, int size) {
    if (n_replicates < 2) {
        throw std::invalid_argument("resampling_covariance: at least 2 replicates are required");
    }
    if (offset < 0 || size < 1) {
        throw std::invalid_argument("resampling_covariance: invalid block window");
    }
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(size);
    Eigen::MatrixXd outer = Eigen::MatrixXd::Zero(size, size);
    for (int k = 0; k < n_replicates; ++k) {
        const Eigen::VectorXd x = replicate(k);
        if (x.size() < offset + size) {
            throw std::invalid_argument("resampling_covariance: replicate vector is too short");
        }
        const Eigen::VectorXd seg = x.segment(offset, size);
        mean += seg;
        outer += seg * seg.transpose();
    }
    mean /= static_cast<double>(n_replicates);
    Eigen::MatrixXd sigma = outer / static_cast<double>(n_replicates) - mean * mean.transpose();
    return 0.5 * (sigma + sigma.transpose());
}

int thread_budget() {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    if (const char* env = std::getenv("AIRLS_THREADS")) {
        char* end = nullptr;
        const long parsed = std::strtol(env, &end, 10);
        if (end != env && parsed >= 1) n = static_cast<int>(std::min<long>(n, parsed));
    }
    return n;
}

void parallel_for(int n, const std::function<void(int)>& body) {
    if (n <= 0) return;
    const int workers = std::min(thread_budget(), n);
    if (workers <= 1) {
        for (int k = 0; k < n; ++k) body(k);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (int t = 0; t < workers; ++t) {
        pool.emplace_back([&, t]() {
            try {
                for (int k = t; k < n; k += workers) body(k);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (std::thread& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace airls
