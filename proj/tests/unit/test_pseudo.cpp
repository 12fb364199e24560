#include "shapedis/common/error.hpp"
#include "shapedis/pseudo/gmm_em.hpp"
#include "shapedis/pseudo/labeling.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

using namespace shapedis;
using namespace shapedis::pseudo;

namespace {

RowMatrix blobs(int n, double center, double sigma, std::uint64_t seed, int dim = 2) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd(0.0, sigma);
    RowMatrix x(n, dim);
    for (int i = 0; i < n; ++i) {
        const double c = i < n / 2 ? center : -center;
        for (int j = 0; j < dim; ++j) x(i, j) = c + nd(gen);
    }
    return x;
}

RowMatrix random_codes(std::mt19937_64& gen, int n, int d) {
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> scale(0.1, 3.0);
    RowMatrix x(n, d);
    for (int j = 0; j < d; ++j) {
        const double s = scale(gen);
        for (int i = 0; i < n; ++i) x(i, j) = s * nd(gen) + (i % 3 == 0 ? 2.0 : 0.0);
    }
    return x;
}

GaussianMixture two_unit_components(double sep) {
    GaussianMixture g;
    g.weights = Eigen::VectorXd::Constant(2, 0.5);
    g.means = RowMatrix::Zero(2, 2);
    g.means(1, 0) = sep;
    g.variances = RowMatrix::Ones(2, 2);
    return g;
}

}  // namespace

TEST(GmmEm, RecoversSeparatedBlobs) {
    const auto x = blobs(200, 3.0, 0.5, 5);
    EmOptions o;
    o.seed = 1;
    const auto r = fit_gmm_em(x, o);
    const int hi = r.mixture.means(0, 0) > r.mixture.means(1, 0) ? 0 : 1;
    for (int j = 0; j < 2; ++j) {
        EXPECT_NEAR(r.mixture.means(hi, j), 3.0, 0.2);
        EXPECT_NEAR(r.mixture.means(1 - hi, j), -3.0, 0.2);
    }
    EXPECT_NEAR(r.mixture.weights.sum(), 1.0, 1e-12);
    EXPECT_FALSE(r.collapsed);
}

TEST(GmmEm, LogLikelihoodMonotoneOnRandomInputs) {
    std::mt19937_64 gen(99);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 10 + static_cast<int>(gen() % 60);
        const int d = 1 + static_cast<int>(gen() % 8);
        const auto x = random_codes(gen, n, d);
        EmOptions o;
        o.seed = trial;
        o.restarts = 2;
        const auto r = fit_gmm_em(x, o);
        for (std::size_t i = 1; i < r.log_likelihood.size(); ++i) {
            EXPECT_GE(r.log_likelihood[i], r.log_likelihood[i - 1] - 1e-9) << "trial " << trial << " iter " << i;
        }
        EXPECT_NEAR(r.mixture.weights.sum(), 1.0, 1e-9);
        EXPECT_GE(r.mixture.weights.minCoeff(), 0.0);
        EXPECT_GE(r.mixture.variances.minCoeff(), o.variance_floor);
    }
}

TEST(GmmEm, IdenticalPointsFlagCollapse) {
    RowMatrix x = RowMatrix::Constant(20, 3, 0.7);
    const auto r = fit_gmm_em(x);
    EXPECT_TRUE(r.collapsed);
    EXPECT_GE(r.mixture.variances.minCoeff(), 1e-6);
}

TEST(GmmEm, RejectsTooFewOrNonFinite) {
    EXPECT_THROW(fit_gmm_em(RowMatrix::Zero(3, 2)), InputError);
    RowMatrix x = blobs(10, 1.0, 0.3, 2);
    x(4, 1) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(fit_gmm_em(x), InputError);
}

TEST(GmmEm, DeterministicGivenSeed) {
    const auto x = blobs(60, 1.0, 0.8, 3, 4);
    EmOptions o;
    o.seed = 12;
    const auto a = fit_gmm_em(x, o);
    const auto b = fit_gmm_em(x, o);
    EXPECT_EQ(a.log_likelihood, b.log_likelihood);
    EXPECT_TRUE(a.mixture.means == b.mixture.means);
}

TEST(GmmEm, LogJointMatchesDirectDensity) {
    std::mt19937_64 gen(4);
    const auto x = random_codes(gen, 12, 5);
    const auto r = fit_gmm_em(x);
    const auto lj = log_joint(r.mixture, x);
    testref::Batch z, mu, var;
    for (int i = 0; i < x.rows(); ++i) z.push_back({x.row(i).data(), x.row(i).data() + x.cols()});
    for (int m = 0; m < 2; ++m) {
        mu.push_back({r.mixture.means.row(m).data(), r.mixture.means.row(m).data() + 5});
        var.push_back({r.mixture.variances.row(m).data(), r.mixture.variances.row(m).data() + 5});
    }
    for (int i = 0; i < x.rows(); ++i) {
        for (int m = 0; m < 2; ++m) {
            double lp = std::log(r.mixture.weights[m]);
            for (int j = 0; j < 5; ++j) {
                const double dd = z[i][j] - mu[m][j];
                lp += -0.5 * (std::log(2 * std::numbers::pi * var[m][j]) + dd * dd / var[m][j]);
            }
            EXPECT_NEAR(lj(i, m), lp, 1e-9);
        }
    }
    EXPECT_NEAR(-mean_log_likelihood(r.mixture, x),
                testref::gmm_nll_reference(z, {r.mixture.weights[0], r.mixture.weights[1]}, mu, var), 1e-9);
    const auto resp = responsibilities(r.mixture, x);
    for (int i = 0; i < x.rows(); ++i) EXPECT_NEAR(resp.row(i).sum(), 1.0, 1e-12);
}

TEST(PseudoLabels, TieGoesToComponentZero) {
    const auto g = two_unit_components(2.0);
    RowMatrix x(1, 2);
    x << 1.0, 0.0;
    const auto l = assign_pseudo_labels(g, x, {"a"});
    EXPECT_EQ(l.labels[0], 0);
    EXPECT_DOUBLE_EQ(l.posteriors[0], 0.5);
}

TEST(PseudoLabels, CodeAtSecondMean) {
    const auto g = two_unit_components(8.0);
    RowMatrix x(1, 2);
    x << 8.0, 0.0;
    const auto l = assign_pseudo_labels(g, x, {"a"});
    EXPECT_EQ(l.labels[0], 1);
    EXPECT_GT(l.posteriors[0], 0.99);
    EXPECT_LE(l.posteriors[0], 1.0);
}

TEST(PseudoLabels, SmallerVolumeClusterIsDiseased) {
    const auto g = two_unit_components(8.0);
    RowMatrix x(4, 2);
    x << 0, 0, 0.1, 0, 8, 0, 7.9, 0;
    // component 0 has mean volume 10, component 1 mean volume 5
    const auto l = assign_pseudo_labels(g, x, {"a", "b", "c", "d"}, std::vector<double>{10, 10, 5, 5});
    EXPECT_EQ(l.labels, (std::vector<int>{0, 0, 1, 1}));
    const auto flipped = assign_pseudo_labels(g, x, {"a", "b", "c", "d"}, std::vector<double>{5, 5, 10, 10});
    EXPECT_EQ(flipped.labels, (std::vector<int>{1, 1, 0, 0}));
    ASSERT_TRUE(flipped.cluster_to_class);
    EXPECT_EQ((*flipped.cluster_to_class)[0], 1);
}

TEST(PseudoLabels, PermutationInvariant) {
    std::mt19937_64 gen(8);
    const auto x = blobs(40, 1.0, 1.0, 6, 3);
    const auto r = fit_gmm_em(x);
    std::vector<std::string> ids;
    for (int i = 0; i < 40; ++i) ids.push_back("s" + std::to_string(i));
    const auto base = assign_pseudo_labels(r.mixture, x, ids);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<int> perm(40);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), gen);
        RowMatrix xp(40, 3);
        std::vector<std::string> idp;
        for (int i = 0; i < 40; ++i) {
            xp.row(i) = x.row(perm[i]);
            idp.push_back(ids[perm[i]]);
        }
        const auto l = assign_pseudo_labels(r.mixture, xp, idp);
        for (int i = 0; i < 40; ++i) {
            EXPECT_EQ(l.labels[i], base.labels[perm[i]]);
            EXPECT_EQ(l.posteriors[i], base.posteriors[perm[i]]);
        }
    }
}

TEST(Purity, Examples) {
    EXPECT_DOUBLE_EQ(cluster_purity({0, 0, 1, 1}, {0, 0, 1, 1}).percent, 100.0);
    EXPECT_DOUBLE_EQ(cluster_purity({0, 1, 0, 1}, {0, 0, 1, 1}).percent, 50.0);
    const auto one = cluster_purity({0, 0, 0}, {0, 1, 1});
    EXPECT_EQ(one.empty_clusters, std::vector<int>{1});
    EXPECT_NEAR(one.percent, 200.0 / 3.0, 1e-12);
    EXPECT_THROW(cluster_purity({0, 1}, {0}), InputError);
}

TEST(Purity, MatchesOracleAndSwapInvariant) {
    std::mt19937_64 gen(31);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 2 + static_cast<int>(gen() % 40);
        std::vector<int> p(n), t(n), swapped(n);
        for (int i = 0; i < n; ++i) {
            p[i] = static_cast<int>(gen() % 2);
            t[i] = static_cast<int>(gen() % 2);
            swapped[i] = 1 - p[i];
        }
        const double got = cluster_purity(p, t).percent;
        EXPECT_NEAR(got, testref::purity_reference(p, t), 1e-12);
        EXPECT_DOUBLE_EQ(got, cluster_purity(swapped, t).percent);
    }
}

TEST(VolumeGap, SpheresAndErrors) {
    const double v1 = 4.0 / 3.0 * std::numbers::pi, v2 = 8.0 * v1;
    EXPECT_NEAR(mean_volume_gap({0, 0, 1}, {v1, v1, v2}), 29.3215, 1e-4);
    EXPECT_DOUBLE_EQ(mean_volume_gap({0, 1}, {3.0, 3.0}), 0.0);
    EXPECT_THROW(mean_volume_gap({0, 0}, {1.0, 2.0}), InputError);
}

TEST(PseudoLabels, CsvRoundTrip) {
    PseudoLabeling l;
    l.shape_ids = {"a", "b_1", "d"};
    l.labels = {0, 1, 1};
    l.posteriors = {0.51, 0.999999, 1.0};
    const auto path = std::filesystem::temp_directory_path() / "shapedis_pl.csv";
    write_pseudo_labels(path, l);
    const auto back = read_pseudo_labels(path);
    EXPECT_EQ(back.shape_ids, l.shape_ids);
    EXPECT_EQ(back.labels, l.labels);
    EXPECT_EQ(back.posteriors, l.posteriors);
    {
        std::ofstream out(path);
        out << "id,label\na,0\n";
    }
    EXPECT_THROW(read_pseudo_labels(path), FormatError);
    std::filesystem::remove(path);
}
