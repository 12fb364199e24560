#pragma once

// Independent reference helpers shared by the unit suites. Nothing here calls
// into the library code it is used to check.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <vector>

namespace shapedis::testref {

inline std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * (i + j) + 1.0;
        i = j + 1;
    }
    return r;
}

inline double pearson_reference(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double cxy = 0, cxx = 0, cyy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        cxy += (x[i] - mx) * (y[i] - my);
        cxx += (x[i] - mx) * (x[i] - mx);
        cyy += (y[i] - my) * (y[i] - my);
    }
    return cxy / std::sqrt(cxx * cyy);
}

inline double spearman_reference(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson_reference(average_ranks(x), average_ranks(y));
}

using Batch = std::vector<std::vector<double>>;

inline double kl_reference(const Batch& mu, const Batch& logvar) {
    double total = 0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        for (std::size_t j = 0; j < mu[i].size(); ++j) {
            total += 0.5 * (mu[i][j] * mu[i][j] + std::exp(logvar[i][j]) - 1.0 - logvar[i][j]);
        }
    }
    return total / mu.size();
}

inline double mse_reference(const Batch& a, const Batch& b) {
    double total = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < a[i].size(); ++j, ++n) total += (a[i][j] - b[i][j]) * (a[i][j] - b[i][j]);
    }
    return total / n;
}

// Plain double loops over the labeled rows.
inline double snnl_reference(const Batch& z, const std::vector<double>& y, const std::vector<bool>& mask, int c,
                             double th, double l1, double l2, double t) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (mask[i]) rows.push_back(i);
    }
    if (rows.size() < 2) return 0.0;
    const std::size_t k = z[0].size();
    double total = 0;
    for (auto i : rows) {
        double num = 0, all_c = 0, pos_other = 0;
        bool any = false;
        for (auto j : rows) {
            if (j == i) continue;
            const double dc = (z[i][c] - z[j][c]) * (z[i][c] - z[j][c]);
            double dother = 0;
            for (std::size_t q = 0; q < k; ++q) {
                if (static_cast<int>(q) != c) dother += (z[i][q] - z[j][q]) * (z[i][q] - z[j][q]);
            }
            dother /= static_cast<double>(k - 1);
            all_c += std::exp(-dc / t);
            if (std::abs(y[i] - y[j]) <= th + 1e-12) {  // boundary pairs count as positives
                any = true;
                num += std::exp(-dc / t);
                pos_other += std::exp(-dother / t);
            }
        }
        if (any) total -= std::log(num / (l1 * all_c + l2 * pos_other));
    }
    return total / rows.size();
}

inline double cov_reference(const Batch& z) {
    const std::size_t b = z.size(), k = z[0].size();
    std::vector<double> mean(k, 0.0);
    for (const auto& r : z) {
        for (std::size_t j = 0; j < k; ++j) mean[j] += r[j] / b;
    }
    double total = 0;
    for (std::size_t p = 0; p < k; ++p) {
        for (std::size_t q = 0; q < k; ++q) {
            if (p == q) continue;
            double c = 0;
            for (const auto& r : z) c += (r[p] - mean[p]) * (r[q] - mean[q]);
            c /= static_cast<double>(b - 1);
            total += c * c;
        }
    }
    return total;
}

inline double std_reference(const Batch& z, std::size_t col) {
    double m = 0;
    for (const auto& r : z) m += r[col] / z.size();
    double v = 0;
    for (const auto& r : z) v += (r[col] - m) * (r[col] - m);
    return std::sqrt(v / (z.size() - 1));
}

using VecMap = std::function<std::vector<double>(const std::vector<double>&)>;

inline double dis_sen_reference(const Batch& z, const VecMap& decode, int c, double eps, double eta) {
    const std::size_t k = z[0].size();
    const double sc = std_reference(z, c);
    double so = 0;
    for (std::size_t q = 0; q < k; ++q) {
        if (static_cast<int>(q) != c) so += std_reference(z, q);
    }
    so /= static_cast<double>(k - 1);
    double alpha = 0;
    for (const auto& r : z) {
        auto up = r, down = r;
        up[c] += eps;
        down[c] -= eps;
        const auto a = decode(up), b = decode(down);
        double n2 = 0;
        for (std::size_t q = 0; q < a.size(); ++q) n2 += (a[q] - b[q]) * (a[q] - b[q]);
        alpha += std::sqrt(n2) / z.size();
    }
    const double gap = std::max(0.0, eta - alpha) / eta;
    return (sc - so) * (sc - so) + gap * gap;
}

inline double gmm_nll_reference(const Batch& z, const std::vector<double>& w, const Batch& mu, const Batch& var) {
    double total = 0;
    for (const auto& r : z) {
        double lik = 0;
        for (std::size_t m = 0; m < w.size(); ++m) {
            double log_n = 0;
            for (std::size_t q = 0; q < r.size(); ++q) {
                const double d = r[q] - mu[m][q];
                log_n += -0.5 * (std::log(2 * std::numbers::pi * var[m][q]) + d * d / var[m][q]);
            }
            lik += w[m] * std::exp(log_n);
        }
        total -= std::log(lik);
    }
    return total / z.size();
}

inline double purity_reference(const std::vector<int>& pseudo, const std::vector<int>& truth) {
    double sum = 0;
    int used = 0;
    for (int c = 0; c < 2; ++c) {
        int n = 0, ones = 0;
        for (std::size_t i = 0; i < pseudo.size(); ++i) {
            if (pseudo[i] != c) continue;
            ++n;
            ones += truth[i];
        }
        if (n == 0) continue;
        sum += 100.0 * std::max(ones, n - ones) / n;
        ++used;
    }
    return sum / used;
}

// Squared-distance chamfer with O(n m) nearest searches.
inline double chamfer_reference(const std::vector<std::array<double, 3>>& a, const std::vector<std::array<double, 3>>& b) {
    auto one_way = [](const auto& x, const auto& y) {
        double total = 0;
        for (const auto& p : x) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& q : y) {
                const double d = (p[0] - q[0]) * (p[0] - q[0]) + (p[1] - q[1]) * (p[1] - q[1]) + (p[2] - q[2]) * (p[2] - q[2]);
                best = std::min(best, d);
            }
            total += best;
        }
        return total / x.size();
    };
    return 0.5 * (one_way(a, b) + one_way(b, a));
}

// Brute-force 1-D kNN: sort by (distance, index), majority vote with the
// nearest tied label winning, or neighbor mean.
inline std::vector<double> knn_reference(const std::vector<double>& tx, const std::vector<double>& ty,
                                         const std::vector<double>& qx, int k, bool classify) {
    std::vector<double> out;
    const int kk = std::min<int>(k, tx.size());
    for (double q : qx) {
        std::vector<std::pair<double, std::size_t>> d;
        for (std::size_t i = 0; i < tx.size(); ++i) d.push_back({std::abs(tx[i] - q), i});
        std::sort(d.begin(), d.end());
        if (!classify) {
            double s = 0;
            for (int j = 0; j < kk; ++j) s += ty[d[j].second];
            out.push_back(s / kk);
            continue;
        }
        std::vector<std::pair<double, int>> counts;  // label, count
        for (int j = 0; j < kk; ++j) {
            const double lab = ty[d[j].second];
            auto it = std::find_if(counts.begin(), counts.end(), [&](auto& p) { return p.first == lab; });
            if (it == counts.end()) counts.push_back({lab, 1});
            else ++it->second;
        }
        // counts is in order of first appearance, i.e. nearest first.
        auto best = counts.front();
        for (const auto& p : counts) {
            if (p.second > best.second) best = p;
        }
        out.push_back(best.first);
    }
    return out;
}

inline double threshold_accuracy_reference(const std::vector<double>& v, const std::vector<int>& y) {
    double best = 0;
    std::vector<double> cuts(v);
    cuts.push_back(-std::numeric_limits<double>::infinity());
    for (double t : cuts) {
        int hit = 0;
        for (std::size_t i = 0; i < v.size(); ++i) hit += (v[i] > t) == (y[i] == 1);
        best = std::max({best, double(hit) / v.size(), double(v.size() - hit) / v.size()});
    }
    return best;
}

}  // namespace shapedis::testref
