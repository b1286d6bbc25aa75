#include "cnhpp/timing.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

#include "cnhpp/error.hpp"
#include "cnhpp/simulate.hpp"

namespace cnhpp {

void BenchConfig::validate() const {
  if (n_segments < 1) throw InputError("bench: n must be positive");
  if (window_steps < 1) throw InputError("bench: T must be positive");
  if (K_min < 0 || K_max < K_min) throw InputError("bench: need 0 <= K_min <= K_max");
  if (q < 0) throw InputError("bench: q must be non-negative");
  if (repeats < 1) throw InputError("bench: repeats must be positive");
  if (!(xi >= 0.0 && xi < 1.0)) throw InputError("bench: xi must lie in [0, 1)");
}

IntensityField series_route(const ModelParams& params, const CovariatePanel& panel, const WeightMatrix& w,
                            int K) {
  IntensityField field{0, Eigen::MatrixXd(panel.window_steps(), panel.n_segments())};
  for (int t = 0; t < panel.window_steps(); ++t) {
    const auto conv = conv_covariate_matrix(w, panel, params.xi, K, t);
    field.log_lambda.row(t) = (conv.values * params.beta).transpose();
  }
  return field;
}

IntensityField recurrence_route(const ModelParams& params, const CovariatePanel& panel, const WeightMatrix& w,
                                int K) {
  const IntensityField run =
      log_intensity_recurrence(params, panel, w, -K, panel.window_steps() - 1, Eigen::VectorXd::Zero(panel.n_segments()));
  return IntensityField{0, run.log_lambda.bottomRows(panel.window_steps())};
}

namespace {

template <class F>
double seconds(F&& f) {
  const auto start = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::vector<TimingRow> compare_evaluation_cost(const BenchConfig& cfg) {
  cfg.validate();
  const LinearNetwork net = gen_network(Topology::lattice, cfg.n_segments);
  NeighborConfig ncfg;
  const WeightMatrix w = build_weights(net, ncfg);
  const CovariatePanel panel =
      gen_covariates(cfg.n_segments, cfg.K_max + cfg.window_steps, cfg.K_max, cfg.q, 0.5, 1.0, cfg.seed);
  ModelParams params;
  params.xi = cfg.xi;
  params.beta = Eigen::VectorXd::Constant(cfg.q + 1, 0.1);
  params.beta(0) = -5.0;

  std::vector<TimingRow> rows;
  for (int K = cfg.K_min; K <= cfg.K_max; ++K) {
    rows.push_back({K, std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), 0.0});
  }
  double sink = 0.0;  // keeps the evaluations observable
  // Round-robin over K so that slow spells of the machine spread across rows
  // instead of landing on one K; each row keeps its best time.
  for (int r = 0; r < cfg.repeats; ++r) {
    for (auto& row : rows) {
      row.series_seconds = std::min(
          row.series_seconds, seconds([&] { sink += series_route(params, panel, w, row.K).log_lambda(0, 0); }));
      row.recurrence_seconds = std::min(
          row.recurrence_seconds, seconds([&] { sink += recurrence_route(params, panel, w, row.K).log_lambda(0, 0); }));
    }
  }
  for (auto& row : rows) row.ratio = row.series_seconds / row.recurrence_seconds;
  if (!std::isfinite(sink)) throw NumericalError("bench: non-finite log-intensity");
  return rows;
}

void write_timing_csv(std::ostream& out, const std::vector<TimingRow>& rows) {
  const auto old = out.precision(9);
  out << "K,series_seconds,recurrence_seconds,ratio\n";
  for (const auto& r : rows) {
    out << r.K << ',' << r.series_seconds << ',' << r.recurrence_seconds << ',' << r.ratio << '\n';
  }
  out.precision(old);
}

nlohmann::json to_json(const std::vector<TimingRow>& rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) {
    j.push_back({{"K", r.K},
                 {"series_seconds", r.series_seconds},
                 {"recurrence_seconds", r.recurrence_seconds},
                 {"ratio", r.ratio}});
  }
  return j;
}

}  // namespace cnhpp
