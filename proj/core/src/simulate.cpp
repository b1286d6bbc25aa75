#include "cnhpp/simulate.hpp"

#include <algorithm>
#include <cmath>

#include "cnhpp/error.hpp"
#include "cnhpp/ingest.hpp"

namespace cnhpp {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

const char* to_string(Topology topology) {
  switch (topology) {
    case Topology::chain:
      return "chain";
    case Topology::binary_tree:
      return "tree";
    case Topology::lattice:
      return "lattice";
  }
  return "unknown";
}

Topology topology_from_string(const std::string& name) {
  if (name == "chain") return Topology::chain;
  if (name == "tree" || name == "binary-tree" || name == "binary_tree") return Topology::binary_tree;
  if (name == "lattice" || name == "2d-lattice") return Topology::lattice;
  throw InputError("unknown topology '" + name + "' (expected chain|tree|lattice)");
}

LinearNetwork gen_network(Topology topology, Index n) {
  if (n < 1) throw std::invalid_argument("a network needs at least one segment");
  std::vector<SegmentGeometry> segs;
  segs.reserve(static_cast<std::size_t>(n));
  switch (topology) {
    case Topology::chain: {
      for (Index k = 0; k < n; ++k) segs.push_back({{double(k), 0.0}, {double(k + 1), 0.0}});
      return LinearNetwork::from_geometry(segs);
    }
    case Topology::binary_tree: {
      std::vector<std::pair<Index, Index>> pairs;
      for (Index k = 0; k < n; ++k) {
        const int depth = static_cast<int>(std::floor(std::log2(double(k) + 1.0)));
        const double first = std::exp2(depth) - 1.0;
        const double width = std::exp2(-depth);
        const double x = (double(k) - first + 0.5) * width * 8.0;
        segs.push_back({{x - 0.25 * width, -double(depth)}, {x + 0.25 * width, -double(depth)}});
        if (k > 0) pairs.emplace_back((k - 1) / 2, k);
      }
      return LinearNetwork::from_adjacency(segs, pairs);
    }
    case Topology::lattice: {
      Index side = 2;
      while (2 * side * (side - 1) < n) ++side;
      for (Index y = 0; y < side && Index(segs.size()) < n; ++y) {
        for (Index x = 0; x < side && Index(segs.size()) < n; ++x) {
          if (x + 1 < side) segs.push_back({{double(x), double(y)}, {double(x + 1), double(y)}});
          if (Index(segs.size()) < n && y + 1 < side) {
            segs.push_back({{double(x), double(y)}, {double(x), double(y + 1)}});
          }
        }
      }
      return LinearNetwork::from_geometry(segs);
    }
  }
  throw std::invalid_argument("unknown topology");
}

CovariatePanel gen_covariates(Index n_segments, int total_steps, int burn_in, int q, double rho,
                              double scale, std::uint64_t seed) {
  if (!(std::abs(rho) < 1.0)) throw std::invalid_argument("AR coefficient must satisfy |rho| < 1");
  if (n_segments <= 0 || total_steps <= 0 || q < 0) throw std::invalid_argument("invalid panel size");
  if (!(scale >= 0.0)) throw std::invalid_argument("noise scale must be nonnegative");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Eigen::MatrixXd> raw(static_cast<std::size_t>(total_steps), Eigen::MatrixXd(n_segments, q));
  const double stationary = scale / std::sqrt(1.0 - rho * rho);
  for (int j = 0; j < q; ++j) {
    for (Index i = 0; i < n_segments; ++i) {
      double x = stationary * normal(rng);
      raw[0](i, j) = x;
      for (int t = 1; t < total_steps; ++t) {
        x = rho * x + scale * normal(rng);
        raw[static_cast<std::size_t>(t)](i, j) = x;
      }
    }
  }
  return standardize(CovariatePanel::from_covariates(raw, burn_in)).first;
}

EventLog sample_events(const ModelParams& truth, const CovariatePanel& panel, const WeightMatrix& w,
                       int K, std::uint64_t seed, HistoryMode mode) {
  constexpr double kMaxCellRate = 1e3;
  const auto field = window_log_intensity(truth, panel, w, K, mode);
  Rng rng(seed);
  std::uniform_real_distribution<double> offset(0.0, 1.0);
  std::vector<Event> events;
  for (int t = 0; t < field.steps(); ++t) {
    for (Index i = 0; i < field.n_segments(); ++i) {
      const double rate = std::exp(field.log_lambda(t, i));
      if (!(rate <= kMaxCellRate)) {
        throw NumericalError("cell (segment " + std::to_string(i) + ", step " + std::to_string(t) +
                             ") has expected count " + std::to_string(rate) +
                             " above 1000; the scenario is misconfigured");
      }
      if (rate <= 0.0) continue;
      std::poisson_distribution<int> poisson(rate);
      const int n = poisson(rng);
      for (int e = 0; e < n; ++e) events.push_back({i, t + offset(rng)});
    }
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const Event& a, const Event& b) { return a.time < b.time; });
  return EventLog(std::move(events), panel.n_segments(), panel.window_steps());
}

void ScenarioConfig::validate() const {
  if (n_segments < 1) throw std::invalid_argument("scenario needs at least one segment");
  if (horizon < 1) throw std::invalid_argument("scenario horizon must be positive");
  if (burn_in < K) throw std::invalid_argument("scenario burn_in must be at least K");
  if (!(std::abs(rho) < 1.0)) throw std::invalid_argument("AR coefficient must satisfy |rho| < 1");
  if (truth.beta.size() != q + 1) throw std::invalid_argument("true beta must have q+1 entries");
  truth.validate();
  neighbors.validate();
}

Scenario simulate_scenario(const ScenarioConfig& cfg, std::uint64_t replicate) {
  cfg.validate();
  auto net = gen_network(cfg.topology, cfg.n_segments);
  auto w = build_weights(net, cfg.neighbors);
  auto panel = gen_covariates(cfg.n_segments, cfg.burn_in + cfg.horizon, cfg.burn_in, cfg.q, cfg.rho,
                              cfg.noise_scale, derive_seed(cfg.seed, 2 * replicate));
  auto events = sample_events(cfg.truth, panel, w, cfg.K, derive_seed(cfg.seed, 2 * replicate + 1), cfg.mode);
  return {std::move(net), std::move(w), std::move(panel), std::move(events)};
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

RecoveryReport recovery_experiment(const ScenarioConfig& cfg, int replicates, const SolverConfig& solver) {
  if (replicates < 1) throw std::invalid_argument("recovery needs at least one replicate");
  cfg.validate();
  const auto p = cfg.truth.beta.size();
  RecoveryReport report;
  for (int r = 0; r < replicates; ++r) {
    const auto sc = simulate_scenario(cfg, static_cast<std::uint64_t>(r));
    SolverConfig s = solver;
    s.K = cfg.K;
    s.mode = cfg.mode;
    const auto fit = fit_cnhpp(sc.panel, sc.events, sc.weights, s);
    report.replicates.push_back({sc.events.size(), fit.params_hat.xi, fit.params_hat.beta, fit.std_errors,
                                 fit.converged()});
  }

  const double n = replicates;
  report.bias = Eigen::VectorXd::Zero(p);
  report.rmse = Eigen::VectorXd::Zero(p);
  report.median_relative_error = Eigen::VectorXd::Zero(p);
  report.coverage_3se = Eigen::VectorXd::Zero(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    std::vector<double> rel;
    for (const auto& rep : report.replicates) {
      const double err = rep.beta_hat(j) - cfg.truth.beta(j);
      report.bias(j) += err / n;
      report.rmse(j) += err * err / n;
      rel.push_back(std::abs(err) / std::abs(cfg.truth.beta(j)));
      if (rep.std_errors.size() == p && std::abs(err) <= 3.0 * rep.std_errors(j)) report.coverage_3se(j) += 1.0 / n;
    }
    report.rmse(j) = std::sqrt(report.rmse(j));
    report.median_relative_error(j) = median(rel);
  }

  double step = 1.0;
  for (std::size_t k = 1; k < solver.xi_grid.size(); ++k) {
    step = std::min(step, solver.xi_grid[k] - solver.xi_grid[k - 1]);
  }
  for (double g : solver.xi_grid) report.xi_histogram[g] = 0;
  for (const auto& rep : report.replicates) {
    report.xi_histogram[rep.xi_hat] += 1;
    if (std::abs(rep.xi_hat - cfg.truth.xi) <= step + 1e-12) report.xi_within_one_step += 1.0 / n;
    if (rep.xi_hat == 0.0) report.xi_at_zero += 1.0 / n;
  }
  return report;
}

nlohmann::json to_json(const RecoveryReport& report) {
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  nlohmann::json j;
  j["bias"] = vec(report.bias);
  j["rmse"] = vec(report.rmse);
  j["median_relative_error"] = vec(report.median_relative_error);
  j["coverage_3se"] = vec(report.coverage_3se);
  j["xi_within_one_step"] = report.xi_within_one_step;
  j["xi_at_zero"] = report.xi_at_zero;
  auto& hist = j["xi_histogram"] = nlohmann::json::array();
  for (const auto& [xi, count] : report.xi_histogram) hist.push_back({{"xi", xi}, {"count", count}});
  auto& reps = j["replicates"] = nlohmann::json::array();
  for (const auto& r : report.replicates) {
    reps.push_back({{"n_events", r.n_events},
                    {"xi_hat", r.xi_hat},
                    {"beta_hat", vec(r.beta_hat)},
                    {"std_errors", vec(r.std_errors)},
                    {"converged", r.converged}});
  }
  return j;
}

}  // namespace cnhpp
