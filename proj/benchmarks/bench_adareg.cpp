#include <vector>

#include <benchmark/benchmark.h>

#include "adareg/data.hpp"
#include "adareg/diagnostics.hpp"
#include "adareg/net.hpp"
#include "adareg/optimizer.hpp"
#include "adareg/rng.hpp"
#include "adareg/spectral.hpp"

using namespace adareg;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed)
{
    Rng rng(seed);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
    }
    return m;
}

SymMatrix gram(Eigen::Index n, std::uint64_t seed)
{
    const Eigen::MatrixXd g = gaussian(n, n + 5, seed);
    return SymMatrix(g * g.transpose());
}

Dataset digits(Eigen::Index n)
{
    Rng rng(3);
    Dataset ds;
    ds.kind = TaskKind::Classification;
    ds.num_classes = 10;
    ds.inputs = gaussian(n, 784, 4).cwiseAbs().cwiseMin(1.0);
    for (Eigen::Index i = 0; i < n; ++i) ds.labels.push_back(static_cast<int>(rng.below(10)));
    return ds;
}

}  // namespace

static void BM_Eigh(benchmark::State& state)
{
    const SymMatrix a = gram(state.range(0), 1);
    for (auto _ : state) benchmark::DoNotOptimize(eigh(a));
}
BENCHMARK(BM_Eigh)->Arg(10)->Arg(50)->Arg(100);

static void BM_InvThreshold(benchmark::State& state)
{
    const SymMatrix delta = gram(state.range(0), 2);
    const auto bounds = SpectralBounds::from_upper(10.0);
    for (auto _ : state) benchmark::DoNotOptimize(inv_threshold(delta, 50, bounds));
}
BENCHMARK(BM_InvThreshold)->Arg(10)->Arg(50);

static void BM_SpectralNorm(benchmark::State& state)
{
    const Eigen::MatrixXd w = gaussian(10, 50, 5);
    for (auto _ : state) benchmark::DoNotOptimize(spectral_norm(w));
}
BENCHMARK(BM_SpectralNorm);

static void BM_ForwardBackward(benchmark::State& state)
{
    const Network net = Network::mlp(std::vector<Eigen::Index>{784, 50, 10}, Activation::ReLU,
                                     LossKind::SoftmaxCrossEntropy, 1);
    const Dataset batch = digits(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(backward(net, batch));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBackward)->Arg(64)->Arg(256);

static void BM_AdaRegEpoch(benchmark::State& state)
{
    const Network net = Network::mlp(std::vector<Eigen::Index>{784, 50, 10}, Activation::ReLU,
                                     LossKind::SoftmaxCrossEntropy, 1);
    const Dataset train = digits(6000);
    BcdSchedule sch;
    sch.outer_loops = 1;
    sch.epochs_per_block = 1;
    sch.batch_size = 256;
    const auto initial = AdaRegState::initial(net, {1}, SpectralBounds::from_upper(10.0), default_lambda(10, 50));
    for (auto _ : state) {
        AdaRegState s = train_block(initial, sch, train, 7);
        benchmark::DoNotOptimize(update_precisions(std::move(s)));
    }
}
BENCHMARK(BM_AdaRegEpoch)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
