#include <benchmark/benchmark.h>

#include "vcq/experiments.hpp"
#include "vcq/pomdp.hpp"
#include "vcq/sim.hpp"

namespace {

void BM_ErasureLawGilbertElliott(benchmark::State& state) {
  const auto model = vcq::make_gilbert_elliott(0.2, 0.3, 114, 0.5, 0.125);
  for (auto _ : state) {
    benchmark::DoNotOptimize(vcq::erasure_joint_distribution(model, 114));
  }
}
BENCHMARK(BM_ErasureLawGilbertElliott);

void BM_ErasureLawRayleigh8(benchmark::State& state) {
  const auto model = vcq::make_rayleigh8_preset(40.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(vcq::erasure_joint_distribution(model, 114));
  }
}
BENCHMARK(BM_ErasureLawRayleigh8);

void BM_QbdSolveRayleigh8(benchmark::State& state) {
  const auto model = vcq::make_rayleigh8_preset(40.0);
  const auto law = vcq::erasure_joint_distribution(model, 114);
  const auto decode = vcq::decode_matrices(law, 80);
  const auto seg = vcq::segment_params(0.2, 1.0 / 195.0, 80);
  const auto policy = vcq::SwitchingPolicy::below(4);
  const auto blocks = vcq::build_blocks(model, decode, seg, policy);
  for (auto _ : state) {
    benchmark::DoNotOptimize(vcq::solve_qbd(blocks));
  }
}
BENCHMARK(BM_QbdSolveRayleigh8);

void BM_OptimizeInfoBits(benchmark::State& state) {
  const auto model = vcq::make_gilbert_elliott(0.2, 0.3, 114, 0.5, 0.125);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        vcq::optimal_throughput(model, vcq::SwitchingPolicy::below(2), 114));
  }
}
BENCHMARK(BM_OptimizeInfoBits);

void BM_ValueIterationSweep(benchmark::State& state) {
  const auto model = vcq::make_gilbert_elliott(0.2, 0.3, 114, 1.0, 0.0);
  const auto pomdp = vcq::PomdpModel::build(model, 114, 0.9, true, 8);
  for (auto _ : state) {
    benchmark::DoNotOptimize(vcq::value_iteration(pomdp, vcq::GridSpec{500}));
  }
}
BENCHMARK(BM_ValueIterationSweep);

void BM_SimulateCycles(benchmark::State& state) {
  const auto model = vcq::make_gilbert_elliott(0.2, 0.3, 114, 0.5, 0.125);
  const auto seg = vcq::segment_params(0.2, 1.0 / 195.0, 80);
  for (auto _ : state) {
    vcq::SimConfig config{model, 114, 80, seg, vcq::SwitchingPolicy::fixed(),
                          20000,  1,   vcq::DecodeMode::Formula, 1000};
    benchmark::DoNotOptimize(vcq::simulate(config));
  }
  state.SetItemsProcessed(state.iterations() * 20000);
}
BENCHMARK(BM_SimulateCycles);

}  // namespace

BENCHMARK_MAIN();
