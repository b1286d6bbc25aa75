#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <nlohmann/json.hpp>

#include "cnhpp/convolution.hpp"
#include "cnhpp/model.hpp"
#include "cnhpp/network.hpp"

namespace cnhpp {

struct BenchConfig {
  Index n_segments = 5000;
  int window_steps = 30;
  int K_min = 0;
  int K_max = 7;
  int q = 4;
  int repeats = 3;
  std::uint64_t seed = 1;
  double xi = 0.5;

  void validate() const;
};

struct TimingRow {
  int K = 0;
  double series_seconds = 0.0;     // X~(t) built per step, then X~(t) beta
  double recurrence_seconds = 0.0; // one pass of h(t) = xi W h(t-1) + X(t) beta
  double ratio = 0.0;              // series / recurrence
};

/// Wall time (best of `repeats`, taken round-robin over K) for evaluating log lambda over every window
/// step by both routes, for each K in [K_min, K_max], on a lattice network.
std::vector<TimingRow> compare_evaluation_cost(const BenchConfig& cfg);

/// Series route: conv_covariate_matrix at each window step.
IntensityField series_route(const ModelParams& params, const CovariatePanel& panel, const WeightMatrix& w, int K);
/// Recurrence route: a single recurrence from a zero state K steps before the window.
IntensityField recurrence_route(const ModelParams& params, const CovariatePanel& panel, const WeightMatrix& w,
                                int K);

void write_timing_csv(std::ostream& out, const std::vector<TimingRow>& rows);
nlohmann::json to_json(const std::vector<TimingRow>& rows);

}  // namespace cnhpp
