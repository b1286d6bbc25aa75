#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cnhpp/estimation.hpp"
#include "cnhpp/model.hpp"
#include "cnhpp/network.hpp"

namespace cnhpp {

/// Seed of substream `stream` derived from `seed` (SplitMix64 finalizer).
/// Distinct streams of one seed are statistically independent.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

using Rng = std::mt19937_64;

enum class Topology { chain, binary_tree, lattice };

const char* to_string(Topology topology);
Topology topology_from_string(const std::string& name);

/// Synthetic networks. Chain: a path of unit segments. Binary tree: segment k
/// is adjacent to its heap parent (k-1)/2 and children (explicit adjacency;
/// siblings cannot share an endpoint without touching each other). Lattice:
/// the first n unit edges of the smallest square node grid holding n edges,
/// adjacent at shared corners.
LinearNetwork gen_network(Topology topology, Index n);

/// Order-1 autoregressive covariates per segment and covariate,
/// x(t) = rho x(t-1) + scale e(t), started from the stationary law, then
/// z-standardized with window statistics; the intercept column is prepended.
CovariatePanel gen_covariates(Index n_segments, int total_steps, int burn_in, int q, double rho,
                              double scale, std::uint64_t seed);

/// Per-cell counts ~ Poisson(lambda(i,t)), with event times uniform inside
/// the step. Refuses (NumericalError) any cell with lambda > 1000.
EventLog sample_events(const ModelParams& truth, const CovariatePanel& panel, const WeightMatrix& w,
                       int K, std::uint64_t seed, HistoryMode mode = HistoryMode::truncated);

struct ScenarioConfig {
  Topology topology = Topology::chain;
  Index n_segments = 50;
  int horizon = 50;  // window steps T
  int burn_in = 7;
  int K = 7;
  int q = 4;
  double rho = 0.5;
  double noise_scale = 1.0;
  ModelParams truth{0.5, Eigen::VectorXd::Zero(5)};
  std::uint64_t seed = 1;
  NeighborConfig neighbors;
  HistoryMode mode = HistoryMode::truncated;

  void validate() const;
};

struct Scenario {
  LinearNetwork network;
  WeightMatrix weights;
  CovariatePanel panel;
  EventLog events;
};

/// Replicate r of a scenario; covariates and events draw from substreams of
/// cfg.seed that depend only on r.
Scenario simulate_scenario(const ScenarioConfig& cfg, std::uint64_t replicate = 0);

struct ReplicateOutcome {
  std::size_t n_events = 0;
  double xi_hat = 0.0;
  Eigen::VectorXd beta_hat;
  Eigen::VectorXd std_errors;
  bool converged = false;
};

struct RecoveryReport {
  std::vector<ReplicateOutcome> replicates;
  Eigen::VectorXd bias;
  Eigen::VectorXd rmse;
  Eigen::VectorXd median_relative_error;  // median_r |beta_hat_j - beta_j| / |beta_j|
  Eigen::VectorXd coverage_3se;           // share of replicates with |err| <= 3 SE
  std::map<double, int> xi_histogram;     // grid value -> argmax count
  double xi_within_one_step = 0.0;        // share with |xi_hat - xi| <= one grid step
  double xi_at_zero = 0.0;                // share with xi_hat == 0
};

/// simulate -> fit_cnhpp -> summarize, for replicates 0..n-1.
RecoveryReport recovery_experiment(const ScenarioConfig& cfg, int replicates, const SolverConfig& solver);

nlohmann::json to_json(const RecoveryReport& report);

}  // namespace cnhpp
