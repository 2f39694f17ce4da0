#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

#include "fpirt/consensus.hpp"
#include "fpirt/irtree.hpp"
#include "fpirt/log_density.hpp"
#include "fpirt/nuts.hpp"
#include "fpirt/rasch.hpp"
#include "fpirt/simulator.hpp"

namespace {

using namespace fpirt;

// Full-size design: 170 examiners answering 100 of 744 items.
const std::vector<ResponseRecord>& records(ModelKind k) {
  static std::vector<std::vector<ResponseRecord>> cache(7);
  auto& r = cache[static_cast<std::size_t>(k)];
  if (r.empty()) r = simulate(k, DesignSpec{}).records;
  return r;
}

std::unique_ptr<PosteriorModel> make(ModelKind k) {
  const auto& r = records(k);
  switch (k) {
    case ModelKind::Rasch: return std::make_unique<RaschPosterior>(build_matrix(r, ScoringScheme::InconclusiveMCAR));
    case ModelKind::IRTree:
      return std::make_unique<IRTreePosterior>(build_sequential_data(r), TreeSpec::decision_process());
    default:
      return std::make_unique<ConsensusPosterior>(build_conclusiveness_data(r), ConsensusVariant::LTRM);
  }
}

void gradient(benchmark::State& state, ModelKind k) {
  const auto model = make(k);
  std::vector<double> x(model->dimension(), 0.1), g(model->dimension());
  for (auto _ : state) benchmark::DoNotOptimize(model->log_density(x, g));
  state.counters["dim"] = static_cast<double>(model->dimension());
}
BENCHMARK_CAPTURE(gradient, rasch, ModelKind::Rasch);
BENCHMARK_CAPTURE(gradient, irtree, ModelKind::IRTree);
BENCHMARK_CAPTURE(gradient, ltrm, ModelKind::LTRM);

void nuts_iterations(benchmark::State& state) {
  const auto model = make(ModelKind::Rasch);
  SamplerConfig cfg;
  cfg.chains = 1;
  cfg.warmup = 25;
  cfg.samples = 25;
  for (auto _ : state) benchmark::DoNotOptimize(sample_nuts(*model, cfg));
}
// Chains run on worker threads, so wall time is the meaningful measure.
BENCHMARK(nuts_iterations)->Unit(benchmark::kMillisecond)->Iterations(1)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
