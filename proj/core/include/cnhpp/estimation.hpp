#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "cnhpp/model.hpp"
#include "cnhpp/optimizer.hpp"

namespace cnhpp {

/// 0.00, 0.05, ..., 0.95
std::vector<double> default_xi_grid();

struct SolverConfig {
  double grad_tolerance = 1e-8;  // sup-norm of the beta score
  int max_iterations = 500;
  std::vector<double> xi_grid = default_xi_grid();
  int K = 7;
  HistoryMode mode = HistoryMode::truncated;
  int threads = 1;
  int lbfgs_memory = 10;
  // A converged beta must also have a Newton step (inverse observed
  // information times score) below this; a larger step means the likelihood
  // keeps rising along some direction, as with separated data.
  double max_newton_step = 1e-3;

  void validate() const;
};

struct ProfilePoint {
  double xi = 0.0;
  double loglik = 0.0;
  Eigen::VectorXd beta;
  int iterations = 0;
  double gradient_norm = 0.0;
  bool converged = false;
  std::string status;
};

struct FitResult {
  ModelParams params_hat;
  double loglik = 0.0;
  std::vector<ProfilePoint> profile;
  // sqrt diag of the inverse observed information in beta at the selected xi
  // (conditional on xi); empty when the information is singular.
  Eigen::VectorXd std_errors;
  int K = 0;
  HistoryMode mode = HistoryMode::truncated;

  bool converged() const;
  const ProfilePoint& selected() const;
};

/// Closed-form HPP rate: events / (N T), per segment per step.
double fit_hpp(const EventLog& events, Index n_segments, int window_steps);

/// HPP log-likelihood n log(rate) - rate N T (0 log 0 taken as 0).
double hpp_log_likelihood(double rate, std::size_t n_events, Index n_segments, int window_steps);

/// Quasi-Newton maximization with the solver settings from `cfg`.
OptimizeResult optimize_beta(const ObjectiveFn& objective, const Eigen::VectorXd& init,
                             const SolverConfig& cfg);

/// Log-linear NHPP fit (xi fixed at 0).
FitResult fit_nhpp(const CovariatePanel& panel, const EventLog& events, const SolverConfig& cfg);

/// Profile-likelihood fit: for every xi in cfg.xi_grid the convolutional
/// design is built once and beta is maximized; the grid argmax is returned
/// with the whole profile curve. Throws NumericalError only if no grid point
/// could be evaluated.
FitResult fit_cnhpp(const CovariatePanel& panel, const EventLog& events, const WeightMatrix& w,
                    const SolverConfig& cfg);

/// Intensities over the window of `panel` with the fitted parameters.
IntensityField predict_intensity(const FitResult& fit, const CovariatePanel& panel,
                                 const WeightMatrix& w);

const char* to_string(HistoryMode mode);
HistoryMode history_mode_from_string(const std::string& name);

nlohmann::json to_json(const FitResult& fit);
FitResult fit_from_json(const nlohmann::json& j);

}  // namespace cnhpp
