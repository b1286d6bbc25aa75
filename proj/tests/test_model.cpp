#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "cnhpp/error.hpp"
#include "support.hpp"

using namespace cnhpp;
using testing::chain;

namespace {

// Independent log-likelihood: dense series plus direct binning.
double oracle_loglik(const testing::Instance& in) {
  const auto counts = testing::bin_counts(in.events);
  double ll = 0.0;
  for (int t = 0; t < in.panel.window_steps(); ++t) {
    const Eigen::VectorXd eta = testing::dense_series(in.w, in.panel, in.params.xi, in.params.beta, in.K, t);
    ll += (counts[t].array() * eta.array() - eta.array().exp()).sum();
  }
  return ll;
}

Eigen::VectorXd finite_difference(const testing::Instance& in, HistoryMode mode, double h = 1e-5) {
  const auto q1 = in.params.beta.size();
  Eigen::VectorXd g(q1 + 1);
  for (Eigen::Index j = 0; j <= q1; ++j) {
    ModelParams up = in.params, dn = in.params;
    if (j < q1) {
      up.beta(j) += h;
      dn.beta(j) -= h;
    } else {
      up.xi += h;
      dn.xi -= h;
    }
    g(j) = (log_likelihood(up, in.panel, in.events, in.w, in.K, mode) -
            log_likelihood(dn, in.panel, in.events, in.w, in.K, mode)) /
           (2 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("series form matches the dense power oracle") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto in = testing::random_instance(seed);
    for (int t = 0; t < in.panel.window_steps(); ++t) {
      const Eigen::VectorXd a = log_intensity_series(in.params, in.panel, in.w, in.K, t);
      const Eigen::VectorXd b = testing::dense_series(in.w, in.panel, in.params.xi, in.params.beta, in.K, t);
      CHECK((a - b).lpNorm<Eigen::Infinity>() < 1e-12);
    }
  }
}

TEST_CASE("series form on a hand-built three-segment chain") {
  // N = 3, self excluded so W = [[0,1,0],[1/2,0,1/2],[0,1,0]]; K = 2, xi = 0.5
  const auto w = build_weights(chain(3), testing::no_self());
  std::vector<Eigen::MatrixXd> raw;
  for (int s = 0; s < 3; ++s) raw.push_back((Eigen::MatrixXd(3, 1) << s, 2.0 * s + 1, -s).finished());
  const auto panel = CovariatePanel::from_covariates(raw, 2);
  ModelParams p{0.5, (Eigen::VectorXd(2) << -1.0, 0.4).finished()};
  // c(s) = -1 + 0.4 x(s): s=-2: (-1, -0.6, -1); s=-1: (-0.6, 0.2, -1.4); s=0: (-0.2, 1.0, -1.8)
  // W c(-1) = (0.2, -1.0, 0.2); W^2 c(-2) = W (-0.6, -1, -0.6) = (-1, -0.6, -1)
  const Eigen::VectorXd expect = (Eigen::VectorXd(3) << -0.2 + 0.1 - 0.25, 1.0 - 0.5 - 0.15, -1.8 + 0.1 - 0.25).finished();
  CHECK((log_intensity_series(p, panel, w, 2, 0) - expect).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("xi = 0 and empty W both give the plain linear predictor") {
  const auto in = testing::random_instance(21);
  ModelParams p0 = in.params;
  p0.xi = 0.0;
  for (int t = 0; t < in.panel.window_steps(); ++t) {
    const Eigen::VectorXd plain = in.panel.at(t) * in.params.beta;
    CHECK(log_intensity_series(p0, in.panel, in.w, in.K, t) == plain);
    CHECK(log_intensity_series(in.params, in.panel, WeightMatrix::zero(in.net.size()), in.K, t) == plain);
  }
}

TEST_CASE("recurrence base cases") {
  const auto in = testing::random_instance(4);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(in.net.size());
  const auto one = log_intensity_recurrence(in.params, in.panel, in.w, 0, 0, zero);
  CHECK(one.steps() == 1);
  CHECK((one.log_at(0) - in.panel.at(0) * in.params.beta).lpNorm<Eigen::Infinity>() == 0.0);

  ModelParams p0 = in.params;
  p0.xi = 0.0;
  const Eigen::VectorXd junk = Eigen::VectorXd::Constant(in.net.size(), 123.0);
  const auto run = log_intensity_recurrence(p0, in.panel, in.w, 0, in.panel.window_steps() - 1, junk);
  for (int t = 1; t < in.panel.window_steps(); ++t) CHECK(run.log_at(t) == in.panel.at(t) * in.params.beta);
}

TEST_CASE("recurrence restarted K steps back equals the series form") {
  for (std::uint64_t seed = 30; seed < 40; ++seed) {
    const auto in = testing::random_instance(seed);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(in.net.size());
    for (int t = 0; t < in.panel.window_steps(); ++t) {
      const auto run = log_intensity_recurrence(in.params, in.panel, in.w, t - in.K, t, zero);
      const Eigen::VectorXd series = log_intensity_series(in.params, in.panel, in.w, in.K, t);
      CHECK((run.log_at(t) - series).lpNorm<Eigen::Infinity>() < 1e-12);
    }
  }
}

TEST_CASE("window intensities in both history modes") {
  const auto in = testing::random_instance(77);
  const auto trunc = window_log_intensity(in.params, in.panel, in.w, in.K, HistoryMode::truncated);
  const auto rec = window_log_intensity(in.params, in.panel, in.w, in.K, HistoryMode::recurrent);
  const auto run = log_intensity_recurrence(in.params, in.panel, in.w, -in.K, in.panel.window_steps() - 1,
                                            Eigen::VectorXd::Zero(in.net.size()));
  for (int t = 0; t < in.panel.window_steps(); ++t) {
    CHECK((trunc.log_at(t) - log_intensity_series(in.params, in.panel, in.w, in.K, t)).lpNorm<Eigen::Infinity>() <
          1e-12);
    CHECK((rec.log_at(t) - run.log_at(t)).lpNorm<Eigen::Infinity>() < 1e-12);
  }
  // both start from the same zero state, so step 0 agrees
  CHECK((trunc.log_at(0) - rec.log_at(0)).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("log-likelihood matches the independent oracle") {
  for (std::uint64_t seed = 50; seed < 60; ++seed) {
    const auto in = testing::random_instance(seed);
    const double ll = log_likelihood(in.params, in.panel, in.events, in.w, in.K);
    CHECK(ll == doctest::Approx(oracle_loglik(in)).epsilon(1e-12));
  }
}

TEST_CASE("log-likelihood special cases") {
  std::mt19937_64 rng(6);
  const auto panel = testing::random_panel(4, 8, 3, 2, rng);
  const auto w = build_weights(chain(4), NeighborConfig{});
  ModelParams p{0.4, (Eigen::VectorXd(3) << -2.0, 0.3, -0.1).finished()};
  const EventLog none({}, 4, 5);
  double expect = 0.0;
  for (int t = 0; t < 5; ++t) expect -= log_intensity_series(p, panel, w, 3, t).array().exp().sum();
  CHECK(log_likelihood(p, panel, none, w, 3) == doctest::Approx(expect).epsilon(1e-13));

  // one segment, constant covariate, xi = 0: n log(lambda) - lambda T
  std::vector<Eigen::MatrixXd> raw(6, Eigen::MatrixXd::Constant(1, 1, 2.0));
  const auto single = CovariatePanel::from_covariates(raw, 0);
  std::vector<Event> ev{{0, 0.5}, {0, 2.1}, {0, 2.2}, {0, 5.9}};
  const EventLog log(ev, 1, 6);
  ModelParams ps{0.0, (Eigen::VectorXd(2) << -1.0, 0.25).finished()};
  const double lambda = std::exp(-1.0 + 0.5);
  CHECK(log_likelihood(ps, single, log, WeightMatrix::identity(1), 0) ==
        doctest::Approx(4 * std::log(lambda) - lambda * 6).epsilon(1e-14));
}

TEST_CASE("events at the window end fall in the last step") {
  const EventLog log({{0, 3.0}, {1, 0.0}, {1, 2.999}}, 2, 3);
  const auto c = log.step_counts();
  CHECK(c[2](0) == 1.0);
  CHECK(c[0](1) == 1.0);
  CHECK(c[2](1) == 1.0);
  CHECK(log.segment_counts() == Eigen::Vector2d(1, 2));
  CHECK_THROWS_AS(EventLog({{2, 1.0}}, 2, 3), InputError);
  CHECK_THROWS_AS(EventLog({{0, 3.5}}, 2, 3), InputError);
  CHECK_THROWS_AS(EventLog({{0, -0.1}}, 2, 3), InputError);
}

TEST_CASE("overflow guard reports the cell and beta") {
  std::vector<Eigen::MatrixXd> raw(3, Eigen::MatrixXd::Zero(2, 1));
  raw[2](1, 0) = 10.0;
  const auto panel = CovariatePanel::from_covariates(raw, 1);
  ModelParams p{0.0, (Eigen::VectorXd(2) << 1.0, 6.0).finished()};
  const EventLog none({}, 2, 2);
  try {
    log_likelihood(p, panel, none, WeightMatrix::identity(2), 1);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("segment 1") != std::string::npos);
    CHECK(msg.find("step 1") != std::string::npos);
    CHECK(msg.find("(1, 6)") != std::string::npos);
  }
  CHECK_THROWS_AS(gradient_bptt(p, panel, none, WeightMatrix::identity(2), 1), NumericalError);
}

TEST_CASE("BPTT gradient matches central differences") {
  for (auto mode : {HistoryMode::truncated, HistoryMode::recurrent}) {
    for (std::uint64_t seed = 100; seed < 110; ++seed) {
      const auto in = testing::random_instance(seed);
      const Eigen::VectorXd g = gradient_bptt(in.params, in.panel, in.events, in.w, in.K, mode).as_vector();
      const Eigen::VectorXd fd = finite_difference(in, mode);
      CHECK((g - fd).norm() / std::max(fd.norm(), 1e-8) < 1e-6);
    }
  }
}

TEST_CASE("xi = 0 reduces likelihood and gradient to the plain NHPP exactly") {
  for (std::uint64_t seed = 200; seed < 205; ++seed) {
    const auto in = testing::random_instance(seed);
    ModelParams p0 = in.params;
    p0.xi = 0.0;
    CHECK(log_likelihood(p0, in.panel, in.events, in.w, in.K) == nhpp_log_likelihood(p0.beta, in.panel, in.events));
    CHECK(gradient_bptt(p0, in.panel, in.events, in.w, in.K).beta == nhpp_score(p0.beta, in.panel, in.events));
    const auto zero = WeightMatrix::zero(in.net.size());
    CHECK(log_likelihood(in.params, in.panel, in.events, zero, in.K) ==
          nhpp_log_likelihood(p0.beta, in.panel, in.events));
  }
}

TEST_CASE("NHPP score is the Poisson GLM score") {
  const auto in = testing::random_instance(300);
  const auto counts = testing::bin_counts(in.events);
  Eigen::VectorXd score = Eigen::VectorXd::Zero(in.params.beta.size());
  for (int t = 0; t < in.panel.window_steps(); ++t) {
    const Eigen::MatrixXd& x = in.panel.at(t);
    const Eigen::VectorXd mu = (x * in.params.beta).array().exp();
    score += x.transpose() * (counts[t] - mu);
  }
  CHECK((nhpp_score(in.params.beta, in.panel, in.events) - score).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("decay derivative on one segment has the geometric-sum closed form") {
  // x = (1) only, W = [1]: eta = b0 * sum_{k<=K} xi^k at every step
  const int K = 4, T = 6;
  std::vector<Eigen::MatrixXd> raw(K + T, Eigen::MatrixXd::Zero(1, 0));
  const auto panel = CovariatePanel::from_covariates(raw, K);
  const EventLog log({{0, 0.3}, {0, 1.5}, {0, 1.6}, {0, 4.2}}, 1, T);
  const double b0 = -0.7, xi = 0.35;
  ModelParams p{xi, (Eigen::VectorXd(1) << b0).finished()};
  double s = 0.0, ds = 0.0;
  for (int k = 0; k <= K; ++k) {
    s += std::pow(xi, k);
    if (k > 0) ds += k * std::pow(xi, k - 1);
  }
  const double lambda = std::exp(b0 * s);
  const double dxi = (4.0 - T * lambda) * b0 * ds;
  const double dbeta = (4.0 - T * lambda) * s;
  const auto g = gradient_bptt(p, panel, log, WeightMatrix::identity(1), K);
  CHECK(g.xi == doctest::Approx(dxi).epsilon(1e-12));
  CHECK(g.beta(0) == doctest::Approx(dbeta).epsilon(1e-12));
}

TEST_CASE("identity W isolates each segment from the others") {
  std::mt19937_64 rng(9);
  const int N = 6, K = 3;
  auto panel = testing::random_panel(N, 12, K, 2, rng);
  const auto w = WeightMatrix::identity(N);
  ModelParams p{0.6, (Eigen::VectorXd(3) << -1.0, 0.5, -0.4).finished()};
  const auto base = window_log_intensity(p, panel, w, K);
  std::vector<Eigen::MatrixXd> blocks;
  for (int t = panel.first_step(); t < panel.window_steps(); ++t) {
    Eigen::MatrixXd b = panel.at(t).rightCols(2);
    b.row(4).array() += 3.0;
    blocks.push_back(b);
  }
  const auto bumped = CovariatePanel::from_covariates(blocks, K);
  const auto after = window_log_intensity(p, bumped, w, K);
  for (Index i = 0; i < N; ++i) {
    if (i == 4) continue;
    CHECK((after.log_lambda.col(i) - base.log_lambda.col(i)).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK((after.log_lambda.col(4) - base.log_lambda.col(4)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("log-likelihood is concave in beta") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> z(0.0, 0.5);
  for (std::uint64_t seed = 400; seed < 410; ++seed) {
    const auto in = testing::random_instance(seed);
    ModelParams a = in.params, b = in.params, m = in.params;
    for (Eigen::Index j = 0; j < a.beta.size(); ++j) {
      a.beta(j) += z(rng);
      b.beta(j) += z(rng);
    }
    m.beta = 0.5 * (a.beta + b.beta);
    const double la = log_likelihood(a, in.panel, in.events, in.w, in.K);
    const double lb = log_likelihood(b, in.panel, in.events, in.w, in.K);
    const double lm = log_likelihood(m, in.panel, in.events, in.w, in.K);
    CHECK(lm >= 0.5 * (la + lb) - 1e-10 * (1 + std::abs(lm)));
  }
}

TEST_CASE("planted parameters beat perturbed ones") {
  ScenarioConfig cfg;
  cfg.n_segments = 50;
  cfg.horizon = 50;
  cfg.truth = ModelParams{0.5, (Eigen::VectorXd(5) << -2.0, -1.2, 0.7, 0.9, -0.7).finished()};
  cfg.seed = 2024;
  std::mt19937_64 rng(99);
  std::normal_distribution<double> z;
  int wins = 0;
  for (int r = 0; r < 100; ++r) {
    const Scenario s = simulate_scenario(cfg, static_cast<std::uint64_t>(r));
    // a random direction of length 0.5 in (xi, beta), xi kept inside [0, 1)
    Eigen::VectorXd d(6);
    for (int j = 0; j < 6; ++j) d(j) = z(rng);
    d *= 0.5 / d.norm();
    ModelParams moved = cfg.truth;
    moved.xi = std::clamp(moved.xi + d(5), 0.0, 0.99);
    moved.beta += d.head(5);
    const double l0 = log_likelihood(cfg.truth, s.panel, s.events, s.weights, cfg.K);
    const double l1 = log_likelihood(moved, s.panel, s.events, s.weights, cfg.K);
    wins += l0 > l1;
  }
  CHECK(wins >= 95);
}

TEST_CASE("event probability") {
  const IntensityField field = IntensityField::from_lambda(0, Eigen::MatrixXd::Constant(1, 2, 0.1));
  const auto none = event_probability(field, {0, 1}, 0, 1, {0, 0});
  CHECK(none.joint == doctest::Approx(std::exp(-0.2)).epsilon(1e-14));
  const auto one = event_probability(field, {0, 1}, 0, 1, {1, 0});
  CHECK(one.joint == doctest::Approx(0.1 * std::exp(-0.2)).epsilon(1e-14));
  CHECK(one.total_expected == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(subnet_total_probability(0.2, 1) == doctest::Approx(0.2 * std::exp(-0.2)).epsilon(1e-14));
  CHECK_THROWS_AS(event_probability(field, {0}, 0, 2, {0}), InputError);
}

TEST_CASE("event probabilities over all count pairs sum to one") {
  Eigen::MatrixXd lambda(3, 2);
  lambda << 0.2, 0.05, 0.3, 0.1, 0.4, 0.25;
  const auto field = IntensityField::from_lambda(0, lambda);
  double total = 0.0;
  for (int a = 0; a <= 25; ++a)
    for (int b = 0; b <= 25; ++b) total += event_probability(field, {0, 1}, 0, 3, {a, b}).joint;
  CHECK(std::abs(total - 1.0) < 1e-6);
}

TEST_CASE("a larger decay smooths the response to a covariate jump") {
  // The raw change at the jump step is beta_1 for every xi (only the current
  // term sees it), so smoothness shows as a smaller share of the eventual
  // change being realized in that first step.
  const int K = 7, T = 2 + K + 2;
  std::vector<Eigen::MatrixXd> raw;
  for (int s = 0; s < K + T; ++s) raw.push_back(Eigen::MatrixXd::Constant(3, 1, s - K >= 2 ? 1.0 : 0.0));
  const auto panel = CovariatePanel::from_covariates(raw, K);
  const auto w = build_weights(chain(3), NeighborConfig{});
  const Eigen::VectorXd beta = (Eigen::VectorXd(2) << -1.0, 1.0).finished();
  auto first_step_share = [&](double xi) {
    const auto f = predict_intensity(ModelParams{xi, beta}, panel, w, K);
    return ((f.log_at(2) - f.log_at(1)).array() / (f.log_at(T - 1) - f.log_at(1)).array()).matrix().eval();
  };
  const Eigen::VectorXd smooth = first_step_share(0.9);
  const Eigen::VectorXd rough = first_step_share(0.1);
  for (Index i = 0; i < 3; ++i) CHECK(smooth(i) < rough(i));
}

TEST_CASE("prediction at the planted parameters reproduces the generating intensity") {
  const auto in = testing::random_instance(505);
  const auto pred = predict_intensity(in.params, in.panel, in.w, in.K);
  for (int t = 0; t < in.panel.window_steps(); ++t)
    CHECK((pred.log_at(t) - log_intensity_series(in.params, in.panel, in.w, in.K, t)).lpNorm<Eigen::Infinity>() <
          1e-12);
}

TEST_CASE("intensity CSV layout") {
  IntensityField f{0, (Eigen::MatrixXd(2, 2) << 0.0, 1.0, -1.0, 2.0).finished()};
  std::ostringstream out;
  write_intensity_csv(out, f);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,segment_id,log_lambda,lambda");
  std::getline(in, line);
  CHECK(line == "0,0,0,1");
  int rows = 1;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 4);
}
