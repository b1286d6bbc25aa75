#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/poisson.hpp>
#include <cmath>
#include <sstream>

#include "cnhpp/error.hpp"
#include "cnhpp/ingest.hpp"
#include "support.hpp"

using namespace cnhpp;

namespace {

std::vector<Index> adj(const LinearNetwork& net, Index i) {
  auto s = net.adjacent(i);
  return {s.begin(), s.end()};
}

// intercept-only panel with log-rate b0 everywhere
struct ConstantRate {
  CovariatePanel panel;
  ModelParams params;
  WeightMatrix w;
};

ConstantRate constant_rate(Index n, int T, double rate) {
  std::vector<Eigen::MatrixXd> raw(T, Eigen::MatrixXd::Zero(n, 0));
  return {CovariatePanel::from_covariates(raw, 0), ModelParams{0.0, Eigen::VectorXd::Constant(1, std::log(rate))},
          WeightMatrix::identity(n)};
}

}  // namespace

TEST_CASE("generated topologies") {
  const auto c = gen_network(Topology::chain, 3);
  CHECK(adj(c, 0) == std::vector<Index>{1});
  CHECK(adj(c, 1) == std::vector<Index>{0, 2});
  CHECK(adj(c, 2) == std::vector<Index>{1});

  const auto t = gen_network(Topology::binary_tree, 7);
  CHECK(t.edge_count() == 6);
  // connected: every node reaches the root within its depth
  NeighborConfig cfg;
  for (Index i = 0; i < 7; ++i) {
    bool reached = false;
    for (int m = 0; m <= 4 && !reached; ++m) {
      const auto g = generation_neighbors(t, i, m, cfg);
      reached = std::find(g.members.begin(), g.members.end(), 0) != g.members.end();
    }
    CHECK(reached);
  }

  const auto l = gen_network(Topology::lattice, 4);  // the four sides of a unit square
  CHECK(l.size() == 4);
  CHECK(l.edge_count() == 4);
  for (Index i = 0; i < 4; ++i) CHECK(l.adjacent(i).size() == 2);

  CHECK(topology_from_string("tree") == Topology::binary_tree);
  CHECK_THROWS_AS(topology_from_string("ring"), InputError);
}

TEST_CASE("covariates: white noise, constant columns, determinism") {
  const auto p = gen_covariates(1, 10000, 0, 1, 0.0, 1.0, 42);
  double num = 0.0, den = 0.0;
  for (int t = 0; t < 10000; ++t) {
    const double x = p.at(t)(0, 1);
    den += x * x;
    if (t > 0) num += x * p.at(t - 1)(0, 1);
  }
  CHECK(std::abs(num / den) < 0.05);

  const auto flat = gen_covariates(5, 20, 3, 2, 0.5, 0.0, 1);
  for (int t = -3; t < 17; ++t) CHECK(flat.at(t).rightCols(2).isZero(0.0));

  const auto a = gen_covariates(8, 30, 5, 3, 0.4, 1.0, 77);
  const auto b = gen_covariates(8, 30, 5, 3, 0.4, 1.0, 77);
  for (int t = -5; t < 25; ++t) CHECK(a.at(t) == b.at(t));
}

TEST_CASE("autoregressive covariates carry their lag-one correlation") {
  const auto p = gen_covariates(1, 20000, 0, 1, 0.7, 1.0, 5);
  double num = 0.0, den = 0.0;
  for (int t = 0; t < 20000; ++t) {
    const double x = p.at(t)(0, 1);
    den += x * x;
    if (t > 0) num += x * p.at(t - 1)(0, 1);
  }
  CHECK(num / den == doctest::Approx(0.7).epsilon(0.05));
}

TEST_CASE("event sampling edge cases") {
  const auto quiet = constant_rate(50, 50, std::exp(-20.0));
  CHECK(sample_events(quiet.params, quiet.panel, quiet.w, 0, 1).size() == 0);

  const auto loud = constant_rate(2, 2, 2000.0);
  CHECK_THROWS_AS(sample_events(loud.params, loud.panel, loud.w, 0, 1), NumericalError);

  const auto c = constant_rate(1000, 100, 0.1);
  const auto ev = sample_events(c.params, c.panel, c.w, 0, 3);
  CHECK(std::abs(static_cast<double>(ev.size()) - 1e4) <= 3 * std::sqrt(1e4));
  for (const auto& e : ev.events()) CHECK((e.time >= 0.0 && e.time < 100.0));
  const auto again = sample_events(c.params, c.panel, c.w, 0, 3);
  CHECK(again.events().size() == ev.events().size());
  CHECK(again.events().back().time == ev.events().back().time);
}

TEST_CASE("per-cell counts are Poisson") {
  const auto c = constant_rate(1000, 100, 0.1);
  const auto ev = sample_events(c.params, c.panel, c.w, 0, 2);
  const auto counts = ev.step_counts();
  std::vector<double> observed(4, 0.0);
  double sum = 0.0, sum_sq = 0.0;
  const double cells = 1e5;
  for (const auto& step : counts) {
    for (Eigen::Index i = 0; i < step.size(); ++i) {
      const double n = step(i);
      sum += n;
      sum_sq += n * n;
      observed[static_cast<std::size_t>(std::min(n, 3.0))] += 1.0;
    }
  }
  const double mean = sum / cells;
  const double var = sum_sq / cells - mean * mean;
  CHECK(std::abs(var / mean - 1.0) < 0.02);

  boost::math::poisson_distribution<double> pois(0.1);
  double chi2 = 0.0;
  for (int k = 0; k < 4; ++k) {
    const double p = k < 3 ? boost::math::pdf(pois, k) : boost::math::cdf(boost::math::complement(pois, 2));
    chi2 += std::pow(observed[k] - cells * p, 2) / (cells * p);
  }
  const double pvalue = boost::math::cdf(boost::math::complement(boost::math::chi_squared_distribution<double>(3), chi2));
  CHECK(pvalue > 0.01);
}

TEST_CASE("scenario replicates are deterministic and distinct") {
  ScenarioConfig cfg;
  cfg.n_segments = 20;
  cfg.horizon = 20;
  cfg.truth = ModelParams{0.5, (Eigen::VectorXd(5) << -1.0, -0.5, 0.3, 0.4, -0.3).finished()};
  const auto a = simulate_scenario(cfg, 3);
  const auto b = simulate_scenario(cfg, 3);
  const auto c = simulate_scenario(cfg, 4);
  CHECK(a.events.size() == b.events.size());
  CHECK(a.panel.at(5) == b.panel.at(5));
  CHECK_FALSE(a.panel.at(5) == c.panel.at(5));
  CHECK(a.panel.burn_in() == cfg.burn_in);
  CHECK(a.panel.window_steps() == cfg.horizon);

  cfg.burn_in = 3;
  CHECK_THROWS(simulate_scenario(cfg));
}

TEST_CASE("simulated panels survive a write and reload unchanged") {
  ScenarioConfig cfg;
  cfg.n_segments = 6;
  cfg.horizon = 5;
  cfg.truth = ModelParams{0.2, (Eigen::VectorXd(5) << -0.5, 0.1, 0.2, 0.3, 0.4).finished()};
  const auto s = simulate_scenario(cfg);
  std::stringstream panel_csv, events_csv;
  write_panel_csv(panel_csv, s.panel);
  write_events_csv(events_csv, s.events);
  testing::TempDir dir;
  const auto p = load_panel(dir.write("panel.csv", panel_csv.str()), 6);
  const auto e = load_events(dir.write("events.csv", events_csv.str()), 6, 5);
  for (int t = -cfg.burn_in; t < cfg.horizon; ++t) CHECK(p.at(t) == s.panel.at(t));
  REQUIRE(e.size() == s.events.size());
  for (std::size_t k = 0; k < e.size(); ++k) CHECK(e.events()[k].time == s.events.events()[k].time);
}

TEST_CASE("recovery experiment report is reproducible") {
  ScenarioConfig cfg;
  cfg.n_segments = 30;
  cfg.horizon = 40;
  cfg.truth = ModelParams{0.0, (Eigen::VectorXd(5) << -1.5, -0.6, 0.4, 0.5, -0.4).finished()};
  SolverConfig solver;
  solver.xi_grid = {0.0, 0.3, 0.6};
  const auto a = to_json(recovery_experiment(cfg, 3, solver)).dump();
  const auto b = to_json(recovery_experiment(cfg, 3, solver)).dump();
  CHECK(a == b);
}

TEST_CASE("recovery with no history effect concentrates at xi = 0") {
  ScenarioConfig cfg;
  cfg.n_segments = 60;
  cfg.horizon = 80;
  cfg.truth = ModelParams{0.0, (Eigen::VectorXd(5) << -2.0, -1.2, 0.7, 0.9, -0.7).finished()};
  cfg.seed = 8;
  const auto rep = recovery_experiment(cfg, 10, SolverConfig{});
  CHECK(rep.xi_at_zero >= 0.9);
  CHECK(rep.replicates.size() == 10);
}
