#include "shapedis/geometry/analytic_shape.hpp"
#include "shapedis/geometry/chamfer.hpp"
#include "shapedis/geometry/marching_cubes.hpp"
#include "shapedis/pseudo/gmm_em.hpp"
#include "shapedis/stage1/decoder.hpp"
#include "shapedis/stage2/losses.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace shapedis;

namespace {

geometry::PointSet random_points(Eigen::Index n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    geometry::PointSet p(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) p.row(i) << u(gen), u(gen), u(gen);
    return p;
}

void BM_DecoderForward(benchmark::State& state) {
    torch::NoGradGuard g;
    torch::manual_seed(0);
    stage1::DecoderConfig cfg;
    stage1::SdfDecoder dec(cfg);
    const auto points = torch::rand({state.range(0), 3});
    const auto code = torch::zeros({cfg.latent_dim});
    for (auto _ : state) benchmark::DoNotOptimize(dec->forward(points, code));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DecoderForward)->Arg(4096)->Arg(32768);

void BM_DecoderPointsGradient(benchmark::State& state) {
    torch::manual_seed(0);
    stage1::SdfDecoder dec(stage1::DecoderConfig{});
    const auto points = torch::rand({state.range(0), 3});
    const auto codes = torch::zeros({state.range(0), 64});
    for (auto _ : state) benchmark::DoNotOptimize(stage1::points_gradient(dec, points, codes, true));
}
BENCHMARK(BM_DecoderPointsGradient)->Arg(1024);

void BM_MarchingCubesSphere(benchmark::State& state) {
    geometry::AnalyticShape s;
    s.base_radius = 0.7;
    const geometry::AnalyticField field(s);
    const geometry::BatchField batch = [&](const geometry::PointSet& p, std::span<double> out) {
        field.evaluate(p, out);
    };
    const auto opts = geometry::MeshingOptions::for_metrics(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(geometry::extract_mesh(batch, opts));
}
BENCHMARK(BM_MarchingCubesSphere)->Arg(48)->Arg(96);

void BM_Chamfer(benchmark::State& state) {
    const auto a = random_points(state.range(0), 1), b = random_points(state.range(0), 2);
    for (auto _ : state) benchmark::DoNotOptimize(geometry::chamfer_distance(a, b));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Chamfer)->RangeMultiplier(4)->Range(1000, 64000)->Complexity();

void BM_GmmEm(benchmark::State& state) {
    std::mt19937_64 gen(3);
    std::normal_distribution<double> nd;
    RowMatrix x(state.range(0), 64);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = nd(gen) + (i % 2 ? 1.0 : 0.0);
    }
    for (auto _ : state) benchmark::DoNotOptimize(pseudo::fit_gmm_em(x));
}
BENCHMARK(BM_GmmEm)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_SnnlForwardBackward(benchmark::State& state) {
    torch::manual_seed(0);
    const auto b = state.range(0);
    const auto labels = torch::randint(0, 2, {b}).to(torch::kFloat32);
    const auto mask = torch::ones({b}, torch::kBool);
    stage2::SnnlOptions o;
    for (auto _ : state) {
        auto z = torch::randn({b, 8}).requires_grad_(true);
        const auto t = stage2::adaptive_temperature(z.select(1, 0));
        stage2::snnl_loss(z, labels, mask, o, t).backward();
        benchmark::DoNotOptimize(z.grad());
    }
}
BENCHMARK(BM_SnnlForwardBackward)->Arg(32)->Arg(256);

}  // namespace
BENCHMARK_MAIN();
