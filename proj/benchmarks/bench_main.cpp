#include <benchmark/benchmark.h>

#include "clbench/buffer.hpp"
#include "clbench/model.hpp"
#include "clbench/projection.hpp"

namespace clbench {
namespace {

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = standard_normal(rng);
    return m;
}

void BM_HerdingSelect(benchmark::State& state) {
    const Matrix features = gaussian(state.range(0), 64, 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(herding_select(features, state.range(0) / 10));
    }
}
BENCHMARK(BM_HerdingSelect)->Arg(200)->Arg(1000);

void BM_GpmUpdateSubspace(benchmark::State& state) {
    const Matrix acts = gaussian(state.range(0), 300, 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(gpm_update_subspace(Matrix(state.range(0), 0), acts, 0.965));
    }
}
BENCHMARK(BM_GpmUpdateSubspace)->Arg(64)->Arg(256);

void BM_Mlp2Forward(benchmark::State& state) {
    BackboneConfig cfg;
    cfg.hidden = {100, 100};
    Model model(Backbone::build(Arch::mlp2, {32, 32, 3}, cfg, 3), 3);
    model.expand_head(10);
    const Matrix x = gaussian(state.range(0), 3072, 4).cwiseAbs();
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.logits(x));
    }
}
BENCHMARK(BM_Mlp2Forward)->Arg(10)->Arg(256);

void BM_ReservoirUpdate(benchmark::State& state) {
    std::vector<BufferEntry> stream(static_cast<std::size_t>(state.range(0)));
    for (std::size_t i = 0; i < stream.size(); ++i) {
        stream[i].pixels.assign(3072, static_cast<std::uint8_t>(i));
        stream[i].label = static_cast<std::int64_t>(i % 10);
        stream[i].ref = i;
    }
    for (auto _ : state) {
        ExemplarBuffer buffer(500, BufferStrategy::reservoir, 5);
        buffer.update(stream);
        benchmark::DoNotOptimize(buffer.size());
    }
}
BENCHMARK(BM_ReservoirUpdate)->Arg(2000);

}  // namespace
}  // namespace clbench

BENCHMARK_MAIN();
