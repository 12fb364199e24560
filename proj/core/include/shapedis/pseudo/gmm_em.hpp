#pragma once

#include "shapedis/common/tensor.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace shapedis::pseudo {

/// Diagonal Gaussian mixture: weights [K], means and variances [K, d].
struct GaussianMixture {
    Eigen::VectorXd weights;
    RowMatrix means;
    RowMatrix variances;

    int components() const { return static_cast<int>(weights.size()); }
    int dim() const { return static_cast<int>(means.cols()); }
};

struct EmOptions {
    int components = 2;
    int max_iter = 300;
    double tol = 1e-8;  // on the mean per-sample log-likelihood
    std::uint64_t seed = 0;
    int restarts = 10;
    double variance_floor = 1e-6;
};

struct EmResult {
    GaussianMixture mixture;
    /// Mean per-sample log-likelihood after each E-step of the winning restart.
    std::vector<double> log_likelihood;
    int iterations = 0;
    int best_restart = 0;
    /// A component lost all support (or shrank onto the variance floor in
    /// every dimension) again after its single reinitialization.
    bool collapsed = false;
};

/// EM for a diagonal mixture with several random restarts; the restart with
/// the highest final log-likelihood wins. Throws InputError if N < 2K or the
/// codes contain non-finite values.
EmResult fit_gmm_em(const RowMatrix& codes, const EmOptions& options = {});

/// Log of w_m N(x | mu_m, var_m) for every row, [N, K].
RowMatrix log_joint(const GaussianMixture& mixture, const RowMatrix& codes);

/// Posterior responsibilities [N, K]; rows sum to one.
RowMatrix responsibilities(const GaussianMixture& mixture, const RowMatrix& codes);

/// Mean per-sample log-likelihood.
double mean_log_likelihood(const GaussianMixture& mixture, const RowMatrix& codes);

}  // namespace shapedis::pseudo
