// Serial vs OpenMP timings of the per-particle kernels. The second benchmark
// argument selects the path (0 serial, 1 parallel).

#include <benchmark/benchmark.h>

#include "rbslam/inference.hpp"
#include "rbslam/simulation.hpp"

namespace {

using namespace rbslam;

ExecPolicy policy_of(const benchmark::State& state) {
  return state.range(1) == 0 ? ExecPolicy::serial : ExecPolicy::parallel;
}

const RadioRun& square_run() {
  static const RadioRun run = gen_radio_square(RadioScenario{}, SeedStream(3));
  return run;
}

const MagneticRun& magnetic_run() {
  static const MagneticRun run = [] {
    MagneticScenario cfg;
    cfg.steps = 40;
    return gen_magnetic(cfg, SeedStream(3));
  }();
  return run;
}

template <class Problem, class Poses>
void weight_and_update_bench(benchmark::State& state, const Problem& prob, const Poses& truth) {
  const int N = static_cast<int>(state.range(0));
  const Poses poses(N, truth[1]);
  for (auto _ : state) {
    state.PauseTiming();
    std::vector<GaussianMapBelief> beliefs(N, prob.prior);
    state.ResumeTiming();
    int dropped = 0;
    benchmark::DoNotOptimize(detail::weight_and_update(prob, 1, poses, beliefs, policy_of(state), dropped));
  }
  state.SetItemsProcessed(state.iterations() * N);
}

void BM_WeightAndUpdateRadio(benchmark::State& state) {
  weight_and_update_bench(state, square_run().problem, square_run().truth);
}

void BM_WeightAndUpdateMagnetic(benchmark::State& state) {
  weight_and_update_bench(state, magnetic_run().problem, magnetic_run().truth);
}

// Ancestor weights of the reference at mid-path against N filter particles
// that sit on the true path with their map conditioned on the first measurement.
void BM_AncestorLogWeights(benchmark::State& state) {
  const auto& prob = magnetic_run().problem;
  const auto& ref = magnetic_run().truth;
  const int N = static_cast<int>(state.range(0));
  const int t = static_cast<int>(ref.size()) / 2;
  std::vector<Pose3D> prev(N, ref[t - 1]);
  std::vector<GaussianMapBelief> beliefs(N, prob.prior);
  int dropped = 0;
  detail::weight_and_update(prob, 0, prev, beliefs, ExecPolicy::serial, dropped);
  const Eigen::VectorXd w = Eigen::VectorXd::Constant(N, 1.0 / N);
  const std::vector<double> bounds = future_bounds(prob);
  const FutureCache cache = build_future_cache(prob, ref);
  FilterOptions opt;
  opt.policy = policy_of(state);
  opt.prune_log_ratio = 800.0;  // evaluate every candidate
  for (auto _ : state)
    benchmark::DoNotOptimize(ancestor_log_weights(prob, t, prev, beliefs, w, ref, &cache, bounds, opt));
  state.SetItemsProcessed(state.iterations() * N);
}

void BM_RbpfRadio(benchmark::State& state) {
  FilterOptions opt;
  opt.policy = policy_of(state);
  for (auto _ : state)
    benchmark::DoNotOptimize(run_rbpf(square_run().problem, static_cast<int>(state.range(0)), SeedStream(1), nullptr, opt));
}

const std::vector<std::vector<std::int64_t>> kArgs{{32, 128}, {0, 1}};

}  // namespace

BENCHMARK(BM_WeightAndUpdateRadio)->ArgsProduct(kArgs)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_WeightAndUpdateMagnetic)->ArgsProduct(kArgs)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_AncestorLogWeights)->ArgsProduct(kArgs)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_RbpfRadio)->ArgsProduct({{32}, {0, 1}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
