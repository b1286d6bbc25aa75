#include <map>

#include <benchmark/benchmark.h>

#include "cnhpp/network.hpp"
#include "cnhpp/simulate.hpp"
#include "cnhpp/timing.hpp"

namespace {

struct Setup {
  cnhpp::LinearNetwork net;
  cnhpp::WeightMatrix w;
  cnhpp::CovariatePanel panel;
  cnhpp::ModelParams params;
};

// Same shape as the CLI bench: lattice, T = 30, q = 4, history for K up to 7.
const Setup& setup(cnhpp::Index n) {
  static std::map<cnhpp::Index, Setup> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    auto net = cnhpp::gen_network(cnhpp::Topology::lattice, n);
    auto w = cnhpp::build_weights(net, cnhpp::NeighborConfig{});
    auto panel = cnhpp::gen_covariates(n, 37, 7, 4, 0.5, 1.0, 1);
    Eigen::VectorXd beta = Eigen::VectorXd::Constant(5, 0.1);
    beta(0) = -5.0;
    it = cache.emplace(n, Setup{std::move(net), std::move(w), std::move(panel), {0.5, beta}}).first;
  }
  return it->second;
}

void BM_Series(benchmark::State& state) {
  const auto& s = setup(static_cast<cnhpp::Index>(state.range(0)));
  const int K = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(cnhpp::series_route(s.params, s.panel, s.w, K));
}

void BM_Recurrence(benchmark::State& state) {
  const auto& s = setup(static_cast<cnhpp::Index>(state.range(0)));
  const int K = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(cnhpp::recurrence_route(s.params, s.panel, s.w, K));
}

BENCHMARK(BM_Series)->ArgsProduct({{500, 5000}, {0, 1, 3, 7}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Recurrence)->ArgsProduct({{500, 5000}, {0, 1, 3, 7}})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
