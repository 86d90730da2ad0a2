#include "facecap/hash_grid.hpp"
#include "facecap/mesh.hpp"
#include "facecap/mlp.hpp"
#include "facecap/raster.hpp"
#include "facecap/remesh.hpp"
#include "facecap/synth.hpp"

#include <benchmark/benchmark.h>

using namespace facecap;

static void BM_Rasterize(benchmark::State& state) {
    const TriMesh s = make_icosphere(4);
    const Camera cam = Camera::perspective(300.0, 128.0, 128.0, Vec3::Zero(), Vec3(0, 0, 3));
    RasterOptions o;
    o.threads = static_cast<unsigned>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(rasterize(s.faces(), s.vertices(), cam, 256, 256, o));
}
BENCHMARK(BM_Rasterize)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

static void BM_MlpForward(benchmark::State& state) {
    const Mlp net = Mlp::kaiming({{63, 128, 128, 128, 128, 24}, Activation::Softplus, Activation::Linear, 100.0}, 1);
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(63, state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MlpForward)->Arg(256)->Arg(2048)->Unit(benchmark::kMicrosecond);

static void BM_MlpGradients(benchmark::State& state) {
    const Mlp net = Mlp::kaiming({{63, 128, 128, 128, 128, 24}, Activation::Softplus, Activation::Linear, 100.0}, 1);
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(63, 642), y = Eigen::MatrixXd::Random(24, 642);
    for (auto _ : state) benchmark::DoNotOptimize(mlp_gradients(net, x, y, 1));
}
BENCHMARK(BM_MlpGradients)->Unit(benchmark::kMillisecond);

static void BM_HashEncode(benchmark::State& state) {
    HashGrid grid(HashGridConfig{});
    grid.set_active(16);
    Vec3 p(0.1, 0.2, 0.3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(grid.encode(p));
        p = (p + Vec3(0.013, 0.007, 0.011)).unaryExpr([](double v) { return v > 1.0 ? v - 1.0 : v; });
    }
}
BENCHMARK(BM_HashEncode);

static void BM_Remesh(benchmark::State& state) {
    const DeformModel head = make_toy_head();
    const TriMesh mesh = head.canonical_mesh();
    const double l = mean_edge_length(mesh);
    for (auto _ : state) benchmark::DoNotOptimize(remesh(mesh, l, {5, 0.5}));
}
BENCHMARK(BM_Remesh)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
