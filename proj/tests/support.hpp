#pragma once

#include <unistd.h>

#include <array>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cnhpp/convolution.hpp"
#include "cnhpp/model.hpp"
#include "cnhpp/network.hpp"
#include "cnhpp/simulate.hpp"

namespace testing {

using namespace cnhpp;

inline std::vector<SegmentGeometry> chain_geometry(int n) {
  std::vector<SegmentGeometry> g;
  for (int i = 0; i < n; ++i) g.push_back({{double(i), 0.0}, {double(i + 1), 0.0}});
  return g;
}

inline LinearNetwork chain(int n) { return LinearNetwork::from_geometry(chain_geometry(n)); }

inline NeighborConfig no_self() {
  NeighborConfig cfg;
  cfg.include_self = false;
  return cfg;
}

// Raw N x q normal covariates for every step; the panel adds the intercept.
inline CovariatePanel random_panel(Index n, int total_steps, int burn_in, int q, std::mt19937_64& rng,
                                   double scale = 0.5) {
  std::normal_distribution<double> z(0.0, scale);
  std::vector<Eigen::MatrixXd> blocks;
  for (int s = 0; s < total_steps; ++s) {
    Eigen::MatrixXd b(n, q);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = z(rng);
    blocks.push_back(b);
  }
  return CovariatePanel::from_covariates(blocks, burn_in);
}

inline Eigen::VectorXd random_beta(int q, std::mt19937_64& rng, double intercept = -1.0) {
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  Eigen::VectorXd b(q + 1);
  b(0) = intercept;
  for (int j = 1; j <= q; ++j) b(j) = u(rng);
  return b;
}

// Dense oracle for the truncated series: sum_k xi^k W^k X(t-k) beta with
// explicit dense powers.
inline Eigen::VectorXd dense_series(const WeightMatrix& w, const CovariatePanel& panel, double xi,
                                    const Eigen::VectorXd& beta, int K, int t) {
  const Eigen::MatrixXd wd = Eigen::MatrixXd(w.matrix());
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(wd.rows(), wd.cols());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(wd.rows());
  double scale = 1.0;
  for (int k = 0; k <= K; ++k) {
    out += scale * power * (panel.at(t - k) * beta);
    power = wd * power;
    scale *= xi;
  }
  return out;
}

// Per-step per-segment counts by direct binning.
inline std::vector<Eigen::VectorXd> bin_counts(const EventLog& events) {
  std::vector<Eigen::VectorXd> c(events.window_steps(), Eigen::VectorXd::Zero(events.n_segments()));
  for (const auto& e : events.events()) {
    int s = static_cast<int>(std::floor(e.time));
    if (s == events.window_steps()) --s;
    c[s](e.segment) += 1.0;
  }
  return c;
}

struct Instance {
  LinearNetwork net;
  WeightMatrix w;
  CovariatePanel panel;
  EventLog events;
  ModelParams params;
  int K = 0;
};

// Random topology, size, history and parameters; events drawn from the model.
inline Instance random_instance(std::uint64_t seed, int max_n = 30, int max_t = 40, int max_k = 7, int max_q = 4) {
  std::mt19937_64 rng(seed);
  const auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const Topology topo = std::array{Topology::chain, Topology::binary_tree, Topology::lattice}[pick(0, 2)];
  const Index n = pick(2, max_n);
  const int T = pick(3, max_t);
  const int K = pick(1, max_k);
  const int q = pick(1, max_q);
  NeighborConfig cfg;
  cfg.include_self = pick(0, 1) == 1;
  cfg.scheme = pick(0, 1) ? WeightScheme::equal : WeightScheme::exponential;
  LinearNetwork net = gen_network(topo, n);
  WeightMatrix w = build_weights(net, cfg);
  CovariatePanel panel = random_panel(n, T + K, K, q, rng);
  ModelParams params{std::uniform_real_distribution<double>(0.05, 0.9)(rng), random_beta(q, rng, -1.5)};
  EventLog events = sample_events(params, panel, w, K, seed ^ 0x5eedULL);
  return {std::move(net), std::move(w), std::move(panel), std::move(events), params, K};
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("cnhpp_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path write(const std::string& name, const std::string& content) const {
    const auto p = path_ / name;
    std::ofstream(p) << content;
    return p;
  }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace testing
