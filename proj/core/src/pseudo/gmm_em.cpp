#include "shapedis/pseudo/gmm_em.hpp"

#include "shapedis/common/error.hpp"
#include "shapedis/common/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace shapedis::pseudo {

namespace {

double logsumexp_row(const RowMatrix& m, Eigen::Index r) {
    const double mx = m.row(r).maxCoeff();
    if (!std::isfinite(mx)) return mx;
    return mx + std::log((m.row(r).array() - mx).exp().sum());
}

struct Moments {
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd var;
};

Moments global_moments(const RowMatrix& x, double floor) {
    Moments m;
    m.mean = x.colwise().mean();
    m.var = ((x.rowwise() - m.mean).array().square().colwise().sum() / static_cast<double>(x.rows())).matrix();
    m.var = m.var.cwiseMax(floor);
    return m;
}

// Weight below 1/N, or every variance on the floor.
bool degenerate(const GaussianMixture& g, const Eigen::VectorXd& mass, int m, double floor) {
    if (mass(m) < 1.0) return true;
    return (g.variances.row(m).array() <= floor * (1.0 + 1e-9)).all();
}

void reinit_component(GaussianMixture& g, int m, const RowMatrix& x, const Moments& mom, Rng& rng) {
    g.means.row(m) = x.row(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(x.rows()))));
    g.variances.row(m) = mom.var;
    g.weights.setConstant(1.0 / static_cast<double>(g.components()));
}

struct RunResult {
    GaussianMixture mixture;
    std::vector<double> trace;
    bool collapsed = false;
};

RunResult run_em(const RowMatrix& x, const EmOptions& opt, const Moments& mom, Rng& rng) {
    const auto n = x.rows();
    const auto d = x.cols();
    const int k = opt.components;
    RunResult r;
    auto& g = r.mixture;
    g.weights = Eigen::VectorXd::Constant(k, 1.0 / k);
    g.means.resize(k, d);
    g.variances.resize(k, d);
    std::vector<std::size_t> picks;
    while (static_cast<int>(picks.size()) < k) {
        const auto i = rng.index(static_cast<std::size_t>(n));
        bool dup = false;
        for (auto p : picks) dup = dup || p == i;
        if (!dup) picks.push_back(i);
    }
    for (int m = 0; m < k; ++m) {
        g.means.row(m) = x.row(static_cast<Eigen::Index>(picks[static_cast<std::size_t>(m)]));
        g.variances.row(m) = mom.var;
    }

    std::vector<bool> reinitialized(static_cast<std::size_t>(k), false);
    for (int it = 0; it < opt.max_iter; ++it) {
        // E-step
        const RowMatrix lj = log_joint(g, x);
        RowMatrix resp(n, k);
        double ll = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double lse = logsumexp_row(lj, i);
            ll += lse;
            resp.row(i) = (lj.row(i).array() - lse).exp();
        }
        ll /= static_cast<double>(n);
        const bool converged = !r.trace.empty() && ll - r.trace.back() < opt.tol;
        r.trace.push_back(ll);
        if (converged) break;

        // M-step
        const Eigen::VectorXd mass = resp.colwise().sum().transpose();
        for (int m = 0; m < k; ++m) {
            const double nm = std::max(mass(m), std::numeric_limits<double>::min());
            g.weights(m) = mass(m) / static_cast<double>(n);
            g.means.row(m) = (resp.col(m).transpose() * x) / nm;
            const RowMatrix diff = x.rowwise() - g.means.row(m);
            g.variances.row(m) =
                ((resp.col(m).transpose() * diff.array().square().matrix()) / nm).cwiseMax(opt.variance_floor);
        }

        bool restarted = false;
        for (int m = 0; m < k; ++m) {
            if (!degenerate(g, mass, m, opt.variance_floor)) continue;
            if (reinitialized[static_cast<std::size_t>(m)]) {
                r.collapsed = true;
                continue;
            }
            reinitialized[static_cast<std::size_t>(m)] = true;
            reinit_component(g, m, x, mom, rng);
            restarted = true;
        }
        if (r.collapsed) break;
        // A reinitialization starts a fresh ascent; keep the trace monotone.
        if (restarted) r.trace.clear();
    }
    if (r.trace.empty()) r.trace.push_back(mean_log_likelihood(g, x));
    return r;
}

}  // namespace

RowMatrix log_joint(const GaussianMixture& g, const RowMatrix& x) {
    if (x.cols() != g.dim()) {
        throw InputError("mixture dimension does not match codes");
    }
    const double log2pi = std::log(2.0 * std::numbers::pi);
    RowMatrix out(x.rows(), g.components());
    for (int m = 0; m < g.components(); ++m) {
        const Eigen::RowVectorXd var = g.variances.row(m);
        const double log_det = var.array().log().sum();
        const double lw = std::log(g.weights(m));
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const double maha = ((x.row(i) - g.means.row(m)).array().square() / var.array()).sum();
            out(i, m) = lw - 0.5 * (static_cast<double>(x.cols()) * log2pi + log_det + maha);
        }
    }
    return out;
}

RowMatrix responsibilities(const GaussianMixture& g, const RowMatrix& x) {
    RowMatrix lj = log_joint(g, x);
    for (Eigen::Index i = 0; i < lj.rows(); ++i) {
        const double lse = logsumexp_row(lj, i);
        lj.row(i) = (lj.row(i).array() - lse).exp();
    }
    return lj;
}

double mean_log_likelihood(const GaussianMixture& g, const RowMatrix& x) {
    const RowMatrix lj = log_joint(g, x);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < lj.rows(); ++i) ll += logsumexp_row(lj, i);
    return ll / static_cast<double>(x.rows());
}

EmResult fit_gmm_em(const RowMatrix& codes, const EmOptions& opt) {
    if (opt.components < 1 || opt.restarts < 1 || opt.max_iter < 1) {
        throw ConfigError("fit_gmm_em: components, restarts and max_iter must be >= 1");
    }
    if (codes.rows() < 2 * opt.components) {
        throw InputError("fit_gmm_em needs N >= 2K codes");
    }
    if (!codes.allFinite()) {
        throw InputError("fit_gmm_em: non-finite code values");
    }
    const Moments mom = global_moments(codes, opt.variance_floor);
    EmResult best;
    double best_ll = -std::numeric_limits<double>::infinity();
    for (int r = 0; r < opt.restarts; ++r) {
        Rng rng(mix_seed(opt.seed, static_cast<std::uint64_t>(r)));
        auto run = run_em(codes, opt, mom, rng);
        const double ll = run.trace.back();
        if (r == 0 || ll > best_ll) {
            best_ll = ll;
            best.mixture = std::move(run.mixture);
            best.log_likelihood = std::move(run.trace);
            best.iterations = static_cast<int>(best.log_likelihood.size());
            best.best_restart = r;
            best.collapsed = run.collapsed;
        }
    }
    return best;
}

}  // namespace shapedis::pseudo
