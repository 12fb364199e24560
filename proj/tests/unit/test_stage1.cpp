#include "shapedis/common/error.hpp"
#include "shapedis/common/tensor.hpp"
#include "shapedis/geometry/chamfer.hpp"
#include "shapedis/geometry/mesh_ops.hpp"
#include "shapedis/stage1/checkpoint.hpp"
#include "shapedis/stage1/decoder.hpp"
#include "shapedis/stage1/losses.hpp"
#include "shapedis/stage1/trainer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

using namespace shapedis;
using namespace shapedis::stage1;

namespace {

DecoderConfig small_decoder(int d = 8) {
    DecoderConfig c;
    c.latent_dim = d;
    c.hidden = {32, 32, 32};
    c.skip_layer = 1;
    return c;
}

std::vector<geometry::SampleSet> sphere_samples(std::vector<double> radii, std::size_t count = 4096) {
    std::vector<geometry::SampleSet> out;
    for (std::size_t i = 0; i < radii.size(); ++i) {
        geometry::AnalyticShape s;
        s.base_radius = radii[i];
        geometry::SamplingOptions o;
        o.count = count;
        o.surface_resolution = 48;
        o.seed = 11 + i;
        auto set = geometry::sample_shape(s, o);
        set.shape_id = "s" + std::to_string(i);
        out.push_back(std::move(set));
    }
    return out;
}

double max_rel_error(const torch::Tensor& a, const torch::Tensor& b) {
    const auto scale = b.abs().max().item<double>();
    return (a - b).abs().max().item<double>() / std::max(scale, 1e-12);
}

}  // namespace

TEST(Decoder, ZeroWeightsGiveFinalBias) {
    torch::manual_seed(0);
    auto cfg = small_decoder();
    SdfDecoder dec(cfg);
    {
        torch::NoGradGuard g;
        for (auto& l : dec->layers()) {
            l->weight.zero_();
            l->bias.zero_();
        }
        dec->layers().back()->bias.fill_(0.37);
    }
    const auto out = dec->forward(torch::randn({50, 3}), torch::randn({cfg.latent_dim}));
    EXPECT_TRUE(torch::allclose(out, torch::full({50}, 0.37f)));
}

TEST(Decoder, BatchedForward) {
    SdfDecoder dec(DecoderConfig{});
    const auto out = dec->forward(torch::rand({16384, 3}), torch::zeros({64}));
    EXPECT_EQ(out.dim(), 1);
    EXPECT_EQ(out.size(0), 16384);
}

TEST(Decoder, RejectsMismatchedShapes) {
    SdfDecoder dec(small_decoder());
    EXPECT_THROW(dec->forward(torch::rand({4, 2}), torch::zeros({8})), InputError);
    EXPECT_THROW(dec->forward(torch::rand({4, 3}), torch::zeros({7})), InputError);
    EXPECT_THROW(dec->forward(torch::rand({4, 3}), torch::zeros({5, 8})), InputError);
}

TEST(Decoder, PointGradientMatchesFiniteDifferences) {
    torch::manual_seed(3);
    auto cfg = small_decoder();
    cfg.softplus_beta = 10.0;
    SdfDecoder dec(cfg);
    dec->to(torch::kFloat64);
    const auto p = torch::rand({20, 3}, torch::kFloat64) * 2 - 1;
    const auto z = torch::randn({cfg.latent_dim}, torch::kFloat64) * 0.3;
    const auto g = points_gradient(dec, p, z, false);
    const double h = 1e-3;
    auto fd = torch::zeros_like(p);
    torch::NoGradGuard guard;
    for (int a = 0; a < 3; ++a) {
        auto e = torch::zeros({1, 3}, torch::kFloat64);
        e[0][a] = h;
        fd.select(1, a).copy_((dec->forward(p + e, z) - dec->forward(p - e, z)) / (2 * h));
    }
    EXPECT_LT(max_rel_error(g, fd), 1e-3);
}

TEST(Decoder, GeometricInitApproximatesSphere) {
    torch::manual_seed(0);
    SdfDecoder dec(DecoderConfig{});
    torch::NoGradGuard g;
    const auto dirs = torch::nn::functional::normalize(torch::randn({100, 3}));
    const auto z = torch::zeros({64});
    const double centre = dec->forward(torch::zeros({1, 3}), z).item<double>();
    const double mid = dec->forward(dirs * 0.5, z).mean().item<double>();
    const double outer = dec->forward(dirs * 0.95, z).mean().item<double>();
    EXPECT_LT(centre, 0.0);
    EXPECT_LT(centre, mid);
    EXPECT_LT(mid, outer);
    EXPECT_GT(outer, 0.0);
}

TEST(Decoder, ReconstructionIsDeterministicAndSurvivesWildCodes) {
    torch::manual_seed(0);
    SdfDecoder dec(small_decoder());
    auto opts = geometry::MeshingOptions::for_metrics(32);
    const auto z = torch::randn({8}) * 0.1;
    const auto a = reconstruct_shape(dec, z, opts);
    const auto b = reconstruct_shape(dec, z, opts);
    ASSERT_FALSE(a.empty());
    EXPECT_EQ(a.vertices, b.vertices);
    EXPECT_EQ(a.faces, b.faces);
    EXPECT_NO_THROW(reconstruct_shape(dec, torch::randn({8}) * 1e4, opts));
    EXPECT_THROW(reconstruct_shape(dec, z, geometry::MeshingOptions::for_metrics(4)), InputError);
}

TEST(Losses, ClampedL1Examples) {
    const auto one = [](double v) { return torch::full({1}, v, torch::kFloat64); };
    EXPECT_NEAR(sdf_recon_loss(one(0.5), one(0.3), torch::Tensor(), 0.1, 0.0).item<double>(), 0.0, 1e-15);
    EXPECT_NEAR(sdf_recon_loss(one(0.05), one(0.0), torch::Tensor(), 0.1, 0.0).item<double>(), 0.05, 1e-15);
    const auto t = torch::randn({30}, torch::kFloat64);
    EXPECT_EQ(sdf_recon_loss(t, t, torch::zeros({4, 8}), 0.1, 1e-4).item<double>(), 0.0);
}

TEST(Losses, ReconLossMatchesElementwiseOracle) {
    std::mt19937_64 gen(5);
    std::normal_distribution<double> nd(0.0, 0.2);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 37, b = 3, d = 5;
        std::vector<double> pv(n), tv(n), zv(b * d);
        for (auto& v : pv) v = nd(gen);
        for (auto& v : tv) v = nd(gen);
        for (auto& v : zv) v = nd(gen);
        double l1 = 0;
        for (int i = 0; i < n; ++i) {
            const auto c = [](double v) { return std::max(-0.1, std::min(0.1, v)); };
            l1 += std::abs(c(pv[i]) - c(tv[i]));
        }
        double reg = 0;
        for (auto v : zv) reg += v * v;
        const double expected = l1 / n + 1e-2 * reg / b;
        const auto got = sdf_recon_loss(torch::tensor(pv, torch::kFloat64), torch::tensor(tv, torch::kFloat64),
                                        torch::tensor(zv, torch::kFloat64).reshape({b, d}), 0.1, 1e-2);
        EXPECT_NEAR(got.item<double>(), expected, 1e-12);
    }
}

TEST(Losses, EikonalOfLinearMaps) {
    const auto p = torch::randn({25, 3}, torch::kFloat64).requires_grad_(true);
    for (double norm : {1.0, 2.0}) {
        auto w = torch::tensor({0.6, 0.0, 0.8}, torch::kFloat64) * norm;
        const auto out = torch::mv(p, w) + 0.3;
        const auto g = torch::autograd::grad({out}, {p}, {torch::ones_like(out)})[0];
        EXPECT_NEAR(eikonal_from_gradient(g).item<double>(), (norm - 1) * (norm - 1), 1e-12);
    }
}

TEST(Losses, EikonalMatchesFiniteDifferenceNorms) {
    torch::manual_seed(9);
    auto cfg = small_decoder();
    cfg.softplus_beta = 10.0;
    SdfDecoder dec(cfg);
    dec->to(torch::kFloat64);
    const auto p = torch::rand({30, 3}, torch::kFloat64) * 2 - 1;
    const auto z = torch::randn({8}, torch::kFloat64) * 0.2;
    const double got = eikonal_loss(dec, p, z).item<double>();
    torch::NoGradGuard guard;
    auto fd = torch::zeros_like(p);
    const double h = 1e-4;
    for (int a = 0; a < 3; ++a) {
        auto e = torch::zeros({1, 3}, torch::kFloat64);
        e[0][a] = h;
        fd.select(1, a).copy_((dec->forward(p + e, z) - dec->forward(p - e, z)) / (2 * h));
    }
    const double oracle = (fd.norm(2, 1) - 1).pow(2).mean().item<double>();
    EXPECT_NEAR(got, oracle, 1e-3);
}

TEST(Losses, GmmSingleComponentAtMean) {
    const auto z = torch::tensor({{1.5, -0.5}}, torch::kFloat64);
    const auto w = torch::tensor({1.0, 0.0}, torch::kFloat64);
    const auto mu = torch::tensor({{1.5, -0.5}, {4.0, 4.0}}, torch::kFloat64);
    const auto var = torch::ones({2, 2}, torch::kFloat64);
    EXPECT_NEAR(gmm_prior_loss(z, w, mu, var).item<double>(), std::log(2 * std::numbers::pi), 1e-12);
    EXPECT_NEAR(std::log(2 * std::numbers::pi), 1.83788, 1e-5);
}

TEST(Losses, GmmGrowsWithVarianceScale) {
    const auto z = torch::randn({6, 4}, torch::kFloat64);
    const auto w = torch::tensor({0.3, 0.7}, torch::kFloat64);
    const auto mu = torch::randn({2, 4}, torch::kFloat64);
    double prev = -1e300;
    for (double s : {10.0, 1e2, 1e4, 1e8}) {
        const double v = gmm_prior_loss(z, w, mu, torch::ones({2, 4}, torch::kFloat64) * s * s).item<double>();
        EXPECT_GT(v, prev);
        prev = v;
    }
    EXPECT_GT(prev, 50.0);
}

TEST(Losses, GmmMatchesNaiveLogSumExp) {
    std::mt19937_64 gen(17);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(0.2, 2.0);
    const int b = 10, d = 6;
    std::vector<double> z(b * d), mu(2 * d), var(2 * d);
    for (auto& v : z) v = nd(gen);
    for (auto& v : mu) v = nd(gen);
    for (auto& v : var) v = ud(gen);
    const double pi0 = 0.35;
    double expected = 0;
    for (int i = 0; i < b; ++i) {
        double lik = 0;
        for (int m = 0; m < 2; ++m) {
            double log_n = 0;
            for (int k = 0; k < d; ++k) {
                const double diff = z[i * d + k] - mu[m * d + k];
                log_n += -0.5 * (std::log(2 * std::numbers::pi * var[m * d + k]) + diff * diff / var[m * d + k]);
            }
            lik += (m == 0 ? pi0 : 1 - pi0) * std::exp(log_n);
        }
        expected -= std::log(lik);
    }
    expected /= b;
    const auto got = gmm_prior_loss(torch::tensor(z, torch::kFloat64).reshape({b, d}),
                                    torch::tensor({pi0, 1 - pi0}, torch::kFloat64),
                                    torch::tensor(mu, torch::kFloat64).reshape({2, d}),
                                    torch::tensor(var, torch::kFloat64).reshape({2, d}));
    EXPECT_NEAR(got.item<double>(), expected, 1e-9);
}

TEST(MixturePrior, WeightsSumToOneAndVarianceFloor) {
    MixturePrior prior(4, 2);
    prior->initialize(torch::randn({2, 4}));
    EXPECT_NEAR(prior->weights().sum().item<double>(), 1.0, 1e-6);
    {
        torch::NoGradGuard g;
        prior->named_parameters()["log_var"].fill_(-40.0);
    }
    prior->forward(torch::randn({3, 4}));
    EXPECT_TRUE(prior->variance_floor_hit());
    EXPECT_GE(prior->variances().min().item<double>(), kVarianceFloor * (1 - 1e-6));
}

TEST(Stage1Trainer, ZeroEpochsReturnsInitialState) {
    Stage1Config cfg;
    cfg.decoder = small_decoder();
    cfg.epochs = 0;
    auto r = train_stage1(sphere_samples({0.5, 0.9}, 256), cfg);
    EXPECT_TRUE(r.history.empty());
    EXPECT_EQ(r.model.codes.size(0), 2);
    EXPECT_EQ(r.model.codes.size(1), 8);
}

TEST(Stage1Trainer, RejectsDegenerateInput) {
    Stage1Config cfg;
    cfg.decoder = small_decoder();
    EXPECT_THROW(train_stage1(sphere_samples({0.5}, 64), cfg), InputError);
    auto s = sphere_samples({0.5, 0.7}, 64);
    s[1].rows.resize(0, 4);
    EXPECT_THROW(train_stage1(s, cfg), InputError);
}

TEST(Stage1Trainer, DeterministicUnderFixedSeed) {
    set_deterministic(0);
    Stage1Config cfg;
    cfg.decoder = small_decoder();
    cfg.epochs = 5;
    cfg.points_per_step = 128;
    cfg.seed = 21;
    const auto samples = sphere_samples({0.5, 0.9, 0.7}, 512);
    const auto a = train_stage1(samples, cfg);
    const auto b = train_stage1(samples, cfg);
    ASSERT_EQ(a.history.size(), 5u);
    EXPECT_EQ(a.history.back().total, b.history.back().total);
    EXPECT_TRUE(torch::equal(a.model.codes, b.model.codes));
}

TEST(Stage1Trainer, AblationReducesToClampedL1) {
    Stage1Config cfg;
    cfg.decoder = small_decoder();
    cfg.lambda_eik = 0;
    cfg.lambda_gmm = 0;
    cfg.lambda_reg = 0;
    Stage1Trainer t(sphere_samples({0.5, 0.9}, 512), cfg);
    const auto batch = t.make_batch({0, 1}, 4);
    const auto terms = t.objective(batch, true);
    const auto pred = t.model().decoder->forward(batch.points, t.model().codes.index_select(0, batch.owner));
    EXPECT_DOUBLE_EQ(terms.total.item<double>(), clamped_l1(pred, batch.sdf, 0.1).item<double>());
    EXPECT_GE(terms.sdf.item<double>(), 0.0);
    EXPECT_GE(terms.eikonal.item<double>(), 0.0);
}

TEST(Stage1Trainer, CodeGradientMatchesFiniteDifferences) {
    Stage1Config cfg;
    cfg.decoder = small_decoder();
    cfg.decoder.softplus_beta = 10.0;
    cfg.lambda_eik = 0.1;
    cfg.lambda_reg = 0.01;
    cfg.lambda_gmm = 0.01;
    cfg.code_init_std = 0.3;
    cfg.points_per_step = 256;
    Stage1Trainer t(sphere_samples({0.5, 0.9}, 512), cfg);
    // Perturb the code-input weights so codes influence the field.
    {
        torch::NoGradGuard g;
        for (auto& p : t.model().decoder->parameters()) p.add_(torch::randn_like(p) * 0.05);
    }
    const auto batch = t.make_batch({0, 1}, 8);
    auto& codes = t.model().codes;
    codes.mutable_grad() = torch::Tensor();
    t.objective(batch, true).total.backward();
    const auto analytic = codes.grad().clone();
    int checked = 0;
    for (int row = 0; row < 2; ++row) {
        for (int k = 0; k < 8; ++k) {
            const double a = analytic[row][k].item<double>();
            if (std::abs(a) < 1e-4) continue;
            const float h = 1e-2f;
            double up, down;
            {
                torch::NoGradGuard g;
                codes[row][k] += h;
            }
            up = t.objective(batch, true).total.item<double>();
            {
                torch::NoGradGuard g;
                codes[row][k] -= 2 * h;
            }
            down = t.objective(batch, true).total.item<double>();
            {
                torch::NoGradGuard g;
                codes[row][k] += h;
            }
            const double fd = (up - down) / (2 * h);
            EXPECT_NEAR(fd, a, 1e-2 * std::abs(a) + 2e-5) << row << "," << k;
            ++checked;
        }
    }
    EXPECT_GT(checked, 4);
}

TEST(Stage1Trainer, TwoSphereToyReconstructs) {
    set_deterministic(0);
    Stage1Config cfg;
    cfg.decoder = small_decoder();
    cfg.decoder.hidden = {64, 64, 64, 64};
    cfg.decoder.skip_layer = 2;
    cfg.epochs = 200;
    cfg.points_per_step = 1024;
    cfg.seed = 1;
    const auto samples = sphere_samples({0.5, 0.9}, 4096);
    auto r = train_stage1(samples, cfg);
    const double radii[2] = {0.5, 0.9};
    for (int i = 0; i < 2; ++i) {
        const auto mesh = reconstruct_shape(r.model.decoder, r.model.codes[i], geometry::MeshingOptions::for_metrics(64));
        ASSERT_FALSE(mesh.empty());
        geometry::AnalyticShape s;
        s.base_radius = radii[i];
        const auto truth = geometry::extract_mesh(
            [f = geometry::AnalyticField(s)](const geometry::PointSet& p, std::span<double> out) { f.evaluate(p, out); },
            geometry::MeshingOptions::for_metrics(64));
        EXPECT_LE(geometry::chamfer_distance(mesh, truth, 5000), 0.005) << i;
        const double v = geometry::mesh_volume(mesh).volume;
        const double v_true = 4.0 / 3.0 * std::numbers::pi * std::pow(radii[i], 3);
        EXPECT_NEAR(v, v_true, 0.1 * v_true) << i;
    }
    EXPECT_LT(r.history.back().sdf, r.history.front().sdf);
}

TEST(Stage1Checkpoint, RoundTripAndResume) {
    set_deterministic(0);
    const auto dir = std::filesystem::temp_directory_path() / "shapedis_s1ckpt_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "stage1.ckpt";
    Stage1Config cfg;
    cfg.decoder = small_decoder();
    cfg.epochs = 6;
    cfg.points_per_step = 64;
    const auto samples = sphere_samples({0.5, 0.9}, 256);

    Stage1Trainer full(samples, cfg);
    full.train();

    Stage1Trainer partial(samples, cfg);
    for (int e = 0; e < 3; ++e) partial.run_epoch();
    partial.save_checkpoint(path);
    auto loaded = load_stage1_checkpoint(path);
    EXPECT_EQ(loaded.model.epoch, 3);
    EXPECT_EQ(loaded.history.size(), 3u);
    EXPECT_TRUE(torch::equal(loaded.model.codes, partial.model().codes.detach()));
    EXPECT_EQ(parameter_hash(*loaded.model.decoder), parameter_hash(*partial.model().decoder));

    auto resumed = Stage1Trainer::resume(path, samples);
    resumed->train();
    EXPECT_EQ(resumed->history().back().total, full.history().back().total);
    EXPECT_TRUE(torch::equal(resumed->model().codes, full.model().codes));

    {
        std::ofstream out(dir / "bad.ckpt", std::ios::binary);
        out << "NOTACKPT";
    }
    EXPECT_THROW(load_stage1_checkpoint(dir / "bad.ckpt"), FormatError);
    std::filesystem::remove_all(dir);
}
