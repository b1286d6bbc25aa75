#include "cnhpp/estimation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "cnhpp/error.hpp"

namespace cnhpp {

std::vector<double> default_xi_grid() {
  std::vector<double> grid;
  for (int k = 0; k < 20; ++k) grid.push_back(k * 0.05);
  return grid;
}

void SolverConfig::validate() const {
  if (!(grad_tolerance > 0.0)) throw std::invalid_argument("grad_tolerance must be positive");
  if (max_iterations <= 0) throw std::invalid_argument("max_iterations must be positive");
  if (K < 0) throw std::invalid_argument("truncation K must be nonnegative");
  if (xi_grid.empty()) throw std::invalid_argument("xi grid is empty");
  for (std::size_t k = 0; k < xi_grid.size(); ++k) {
    if (!(xi_grid[k] >= 0.0 && xi_grid[k] < 1.0)) {
      throw std::invalid_argument("xi grid values must lie in [0, 1)");
    }
    if (k > 0 && !(xi_grid[k] > xi_grid[k - 1])) {
      throw std::invalid_argument("xi grid must be strictly increasing");
    }
  }
}

bool FitResult::converged() const {
  return !profile.empty() &&
         std::all_of(profile.begin(), profile.end(), [](const ProfilePoint& p) { return p.converged; });
}

const ProfilePoint& FitResult::selected() const {
  for (const auto& p : profile) {
    if (p.xi == params_hat.xi) return p;
  }
  throw std::logic_error("fit result has no profile point at the selected xi");
}

double fit_hpp(const EventLog& events, Index n_segments, int window_steps) {
  if (n_segments <= 0 || window_steps <= 0) {
    throw InputError("HPP rate needs a positive segment count and window length");
  }
  return static_cast<double>(events.size()) /
         (static_cast<double>(n_segments) * static_cast<double>(window_steps));
}

double hpp_log_likelihood(double rate, std::size_t n_events, Index n_segments, int window_steps) {
  const double exposure = static_cast<double>(n_segments) * static_cast<double>(window_steps);
  if (n_events == 0) return -rate * exposure;
  return static_cast<double>(n_events) * std::log(rate) - rate * exposure;
}

OptimizeResult optimize_beta(const ObjectiveFn& objective, const Eigen::VectorXd& init,
                             const SolverConfig& cfg) {
  LbfgsConfig lb;
  lb.grad_tolerance = cfg.grad_tolerance;
  lb.max_iterations = cfg.max_iterations;
  lb.memory = cfg.lbfgs_memory;
  return maximize_lbfgs(objective, init, lb);
}

namespace {

// Poisson regression over the window cells with a fixed per-step design.
struct PoissonDesign {
  std::vector<Eigen::MatrixXd> rows;    // per window step, N x p
  std::vector<Eigen::VectorXd> counts;  // per window step, N

  bool evaluate(const Eigen::VectorXd& beta, double& value, Eigen::VectorXd& grad) const {
    value = 0.0;
    grad = Eigen::VectorXd::Zero(beta.size());
    for (std::size_t t = 0; t < rows.size(); ++t) {
      const Eigen::VectorXd eta = rows[t] * beta;
      if (!(eta.maxCoeff() <= kMaxLogIntensity)) return false;
      for (Eigen::Index i = 0; i < eta.size(); ++i) value += counts[t](i) * eta(i) - std::exp(eta(i));
      const Eigen::VectorXd residual = counts[t] - eta.array().exp().matrix();
      grad.noalias() += rows[t].transpose() * residual;
    }
    return std::isfinite(value);
  }

  // observed information  sum_t X' diag(lambda) X
  Eigen::MatrixXd information(const Eigen::VectorXd& beta) const {
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(beta.size(), beta.size());
    for (const auto& x : rows) {
      const Eigen::VectorXd lambda = (x * beta).array().exp();
      info.noalias() += x.transpose() * lambda.asDiagonal() * x;
    }
    return info;
  }

  double intercept_mean() const {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& x : rows) {
      s += x.col(0).sum();
      n += static_cast<std::size_t>(x.rows());
    }
    return n ? s / static_cast<double>(n) : 1.0;
  }
};

PoissonDesign plain_design(const CovariatePanel& panel, const EventLog& events) {
  PoissonDesign d;
  d.counts = events.step_counts();
  for (int t = 0; t < panel.window_steps(); ++t) d.rows.push_back(panel.at(t));
  return d;
}

PoissonDesign convolutional_design(const CovariatePanel& panel, const EventLog& events,
                                   const WeightMatrix& w, double xi, int K, HistoryMode mode) {
  PoissonDesign d;
  d.counts = events.step_counts();
  const int T = panel.window_steps();
  d.rows.reserve(static_cast<std::size_t>(T));
  if (mode == HistoryMode::truncated) {
    for (int t = 0; t < T; ++t) d.rows.push_back(conv_covariate_matrix(w, panel, xi, K, t).values);
  } else {
    if (panel.burn_in() < K) {
      throw InputError("the model needs " + std::to_string(K) + " history steps but the panel has burn_in " +
                       std::to_string(panel.burn_in()));
    }
    Eigen::MatrixXd z = panel.at(-K);
    for (int s = -K + 1; s <= T - 1; ++s) {
      if (s - 1 >= 0) d.rows.push_back(z);
      Eigen::MatrixXd propagated = w.matrix() * z;
      z = panel.at(s) + xi * propagated;
    }
    d.rows.push_back(std::move(z));
  }
  return d;
}

Eigen::VectorXd initial_beta(const PoissonDesign& design, const EventLog& events, int p) {
  const double exposure = static_cast<double>(events.n_segments()) * events.window_steps();
  const double n = std::max(static_cast<double>(events.size()), 0.5);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  // HPP rate on the log-intensity scale of this design
  beta(0) = std::log(n / exposure) / design.intercept_mean();
  return beta;
}

ProfilePoint fit_design(const PoissonDesign& design, const EventLog& events, int p, double xi,
                        const SolverConfig& cfg, Eigen::VectorXd* std_errors) {
  ProfilePoint point;
  point.xi = xi;
  const ObjectiveFn objective = [&design](const Eigen::VectorXd& b, double& v, Eigen::VectorXd& g) {
    return design.evaluate(b, v, g);
  };
  const Eigen::VectorXd init = initial_beta(design, events, p);
  OptimizeResult opt;
  try {
    opt = optimize_beta(objective, init, cfg);
  } catch (const std::invalid_argument&) {
    point.loglik = -std::numeric_limits<double>::infinity();
    point.beta = init;
    point.status = "failed";
    return point;
  }
  point.beta = opt.x;
  point.loglik = opt.value;
  point.iterations = opt.iterations;
  point.gradient_norm = opt.gradient_norm;
  point.converged = opt.converged();
  point.status = to_string(opt.status);

  const Eigen::MatrixXd info = design.information(opt.x);
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  const bool positive = ldlt.info() == Eigen::Success && ldlt.isPositive() &&
                        (ldlt.vectorD().array() > 0.0).all();
  if (point.converged) {
    if (!positive) {
      point.converged = false;
      point.status = "singular_information";
    } else {
      const Eigen::VectorXd newton = ldlt.solve(opt.gradient);
      if (!(newton.lpNorm<Eigen::Infinity>() <= cfg.max_newton_step)) {
        point.converged = false;
        point.status = "unbounded_direction";
      }
    }
  }
  if (std_errors) {
    std_errors->resize(0);
    if (positive) {
      const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
      *std_errors = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    }
  }
  return point;
}

template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || n <= 1) {
    for (std::size_t k = 0; k < n; ++k) fn(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < n; k = next++) {
        try {
          fn(k);
        } catch (...) {
          errors[k] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void check_inputs(const CovariatePanel& panel, const EventLog& events) {
  if (events.n_segments() != panel.n_segments() || events.window_steps() != panel.window_steps()) {
    throw InputError("event log (N=" + std::to_string(events.n_segments()) + ", T=" +
                     std::to_string(events.window_steps()) + ") does not match the panel (N=" +
                     std::to_string(panel.n_segments()) + ", T=" + std::to_string(panel.window_steps()) + ")");
  }
}

}  // namespace

FitResult fit_nhpp(const CovariatePanel& panel, const EventLog& events, const SolverConfig& cfg) {
  cfg.validate();
  check_inputs(panel, events);
  const auto design = plain_design(panel, events);
  FitResult fit;
  fit.K = 0;
  fit.mode = cfg.mode;
  fit.profile.push_back(fit_design(design, events, panel.n_columns(), 0.0, cfg, &fit.std_errors));
  fit.params_hat = {0.0, fit.profile.front().beta};
  fit.loglik = fit.profile.front().loglik;
  if (!std::isfinite(fit.loglik)) throw NumericalError("NHPP likelihood could not be evaluated at the start point");
  return fit;
}

FitResult fit_cnhpp(const CovariatePanel& panel, const EventLog& events, const WeightMatrix& w,
                    const SolverConfig& cfg) {
  cfg.validate();
  check_inputs(panel, events);
  if (w.size() != panel.n_segments()) throw std::invalid_argument("weight matrix does not match panel");
  if (panel.burn_in() < cfg.K) {
    throw InputError("fitting with K=" + std::to_string(cfg.K) + " needs history steps " +
                     std::to_string(-cfg.K) + "..-1 but the panel has burn_in " +
                     std::to_string(panel.burn_in()));
  }
  const int p = panel.n_columns();
  FitResult fit;
  fit.K = cfg.K;
  fit.mode = cfg.mode;
  fit.profile.resize(cfg.xi_grid.size());
  parallel_for(cfg.xi_grid.size(), cfg.threads, [&](std::size_t k) {
    const double xi = cfg.xi_grid[k];
    const auto design = convolutional_design(panel, events, w, xi, cfg.K, cfg.mode);
    fit.profile[k] = fit_design(design, events, p, xi, cfg, nullptr);
  });

  std::size_t best = fit.profile.size();
  for (std::size_t k = 0; k < fit.profile.size(); ++k) {
    if (!std::isfinite(fit.profile[k].loglik)) continue;
    if (best == fit.profile.size() || fit.profile[k].loglik > fit.profile[best].loglik) best = k;
  }
  if (best == fit.profile.size()) throw NumericalError("no xi grid point could be evaluated");

  const auto& top = fit.profile[best];
  fit.params_hat = {top.xi, top.beta};
  fit.loglik = top.loglik;
  // information at the selected point for standard errors
  const auto design = convolutional_design(panel, events, w, top.xi, cfg.K, cfg.mode);
  const Eigen::MatrixXd info = design.information(top.beta);
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive() && (ldlt.vectorD().array() > 0.0).all()) {
    const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
    fit.std_errors = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  }
  return fit;
}

IntensityField predict_intensity(const FitResult& fit, const CovariatePanel& panel,
                                 const WeightMatrix& w) {
  return predict_intensity(fit.params_hat, panel, w, fit.K, fit.mode);
}

const char* to_string(HistoryMode mode) {
  return mode == HistoryMode::truncated ? "truncated" : "recurrent";
}

HistoryMode history_mode_from_string(const std::string& name) {
  if (name == "truncated") return HistoryMode::truncated;
  if (name == "recurrent") return HistoryMode::recurrent;
  throw InputError("unknown history mode '" + name + "' (expected truncated|recurrent)");
}

namespace {

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json to_json(const FitResult& fit) {
  nlohmann::json j;
  j["params_hat"] = {{"xi", fit.params_hat.xi}, {"beta", to_vec(fit.params_hat.beta)}};
  j["loglik"] = fit.loglik;
  j["K"] = fit.K;
  j["history_mode"] = to_string(fit.mode);
  j["converged"] = fit.converged();
  j["std_errors"] = to_vec(fit.std_errors);
  auto& prof = j["profile"] = nlohmann::json::array();
  for (const auto& p : fit.profile) {
    prof.push_back({{"xi", p.xi},
                    {"loglik", finite_or_null(p.loglik)},
                    {"beta", to_vec(p.beta)},
                    {"iterations", p.iterations},
                    {"gradient_norm", p.gradient_norm},
                    {"converged", p.converged},
                    {"status", p.status}});
  }
  return j;
}

FitResult fit_from_json(const nlohmann::json& j) {
  try {
    FitResult fit;
    fit.params_hat.xi = j.at("params_hat").at("xi").get<double>();
    fit.params_hat.beta = from_vec(j.at("params_hat").at("beta").get<std::vector<double>>());
    fit.loglik = j.at("loglik").get<double>();
    fit.K = j.at("K").get<int>();
    fit.mode = history_mode_from_string(j.value("history_mode", std::string("truncated")));
    if (j.contains("std_errors")) fit.std_errors = from_vec(j.at("std_errors").get<std::vector<double>>());
    if (j.contains("profile")) {
      for (const auto& p : j.at("profile")) {
        ProfilePoint pt;
        pt.xi = p.at("xi").get<double>();
        pt.loglik = p.at("loglik").is_null() ? -std::numeric_limits<double>::infinity()
                                             : p.at("loglik").get<double>();
        pt.beta = from_vec(p.at("beta").get<std::vector<double>>());
        pt.iterations = p.value("iterations", 0);
        pt.gradient_norm = p.value("gradient_norm", 0.0);
        pt.converged = p.value("converged", false);
        pt.status = p.value("status", std::string());
        fit.profile.push_back(std::move(pt));
      }
    }
    fit.params_hat.validate();
    return fit;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed fit JSON: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("invalid fit JSON: ") + e.what());
  }
}

}  // namespace cnhpp
