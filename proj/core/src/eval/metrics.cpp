#include "shapedis/eval/metrics.hpp"

#include "shapedis/common/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace shapedis::eval {

double threshold_accuracy(const std::vector<double>& values, const std::vector<int>& labels) {
    const std::size_t n = values.size();
    if (n == 0 || labels.size() != n) throw InputError("threshold_accuracy: empty or mismatched input");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
    std::size_t pos_total = 0;
    for (int l : labels) pos_total += l != 0 ? 1 : 0;
    // Prediction "value > t -> 1": correct = negatives at or below t + positives above t.
    std::size_t neg_below = 0, pos_below = 0;
    std::size_t best = std::max(pos_total, n - pos_total);  // threshold below all values
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[order[i]] != 0) ++pos_below; else ++neg_below;
        if (i + 1 < n && values[order[i + 1]] == values[order[i]]) continue;
        const std::size_t correct = neg_below + (pos_total - pos_below);
        best = std::max({best, correct, n - correct});
    }
    return static_cast<double>(best) / static_cast<double>(n);
}

double linear_r2(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) throw InputError("linear_r2: need >= 2 matched samples");
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return 0.0;
    return std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0);
}

SapResult sap_score(const RowMatrix& latents, const std::vector<double>& factor, FactorKind kind) {
    const auto n = static_cast<std::size_t>(latents.rows());
    if (factor.size() != n) throw InputError("sap_score: factor length differs from latent rows");
    if (latents.cols() < 2) throw InputError("sap_score needs at least two latent dimensions");
    if (std::set<double>(factor.begin(), factor.end()).size() < 2) {
        throw InputError("sap_score: factor is constant");
    }
    std::vector<int> labels;
    if (kind == FactorKind::Binary) {
        for (double f : factor) labels.push_back(f > 0.5 ? 1 : 0);
    }
    SapResult r;
    for (Eigen::Index d = 0; d < latents.cols(); ++d) {
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = latents(static_cast<Eigen::Index>(i), d);
        r.scores.push_back(kind == FactorKind::Binary ? threshold_accuracy(col, labels) : linear_r2(col, factor));
    }
    std::vector<double> sorted = r.scores;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    r.sap = sorted[0] - sorted[1];
    r.top_dim = static_cast<int>(std::max_element(r.scores.begin(), r.scores.end()) - r.scores.begin());
    return r;
}

double pearson_corr(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) throw InputError("pearson_corr: need >= 2 matched samples");
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) throw InputError("pearson_corr: zero variance input");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman_corr(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson_corr(average_ranks(x), average_ranks(y));
}

KnnResult knn_predict(const std::vector<double>& train_x, const std::vector<double>& train_y,
                      const std::vector<double>& test_x, const std::vector<double>& test_y, KnnMode mode,
                      int k_neighbors) {
    if (train_x.empty()) throw InputError("knn_predict: empty training set");
    if (train_x.size() != train_y.size() || test_x.size() != test_y.size()) {
        throw InputError("knn_predict: size mismatch");
    }
    if (k_neighbors < 1) throw InputError("knn_predict: k_neighbors must be >= 1");
    KnnResult r;
    r.k_used = std::min<int>(k_neighbors, static_cast<int>(train_x.size()));
    r.k_clamped = r.k_used < k_neighbors;
    const auto k = static_cast<std::size_t>(r.k_used);

    std::vector<std::size_t> order(train_x.size());
    double err = 0.0;
    std::size_t correct = 0;
    for (std::size_t t = 0; t < test_x.size(); ++t) {
        std::iota(order.begin(), order.end(), 0);
        const double q = test_x[t];
        std::partial_sort(order.begin(), order.begin() + static_cast<long>(k), order.end(), [&](auto a, auto b) {
            const double da = std::abs(train_x[a] - q), db = std::abs(train_x[b] - q);
            return da < db || (da == db && a < b);
        });
        double pred = 0.0;
        if (mode == KnnMode::Regress) {
            for (std::size_t i = 0; i < k; ++i) pred += train_y[order[i]];
            pred /= static_cast<double>(k);
            err += (pred - test_y[t]) * (pred - test_y[t]);
        } else {
            std::map<double, int> votes;
            for (std::size_t i = 0; i < k; ++i) ++votes[train_y[order[i]]];
            int best = 0;
            for (const auto& [label, c] : votes) best = std::max(best, c);
            // Nearest neighbor whose label is among the most voted.
            for (std::size_t i = 0; i < k; ++i) {
                if (votes[train_y[order[i]]] == best) {
                    pred = train_y[order[i]];
                    break;
                }
            }
            if (pred == test_y[t]) ++correct;
        }
        r.predictions.push_back(pred);
    }
    if (!test_x.empty()) {
        r.score = mode == KnnMode::Regress ? std::sqrt(err / static_cast<double>(test_x.size()))
                                           : 100.0 * static_cast<double>(correct) / static_cast<double>(test_x.size());
    }
    return r;
}

}  // namespace shapedis::eval
