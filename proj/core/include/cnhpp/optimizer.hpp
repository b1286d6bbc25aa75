#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

namespace cnhpp {

/// Fills value and gradient at x. Returns false when the objective is not
/// finite there (for example an intensity overflow); the solver then treats
/// the point as infeasible.
using ObjectiveFn = std::function<bool(const Eigen::VectorXd& x, double& value, Eigen::VectorXd& gradient)>;

struct LbfgsConfig {
  double grad_tolerance = 1e-8;  // sup-norm
  int max_iterations = 500;
  int memory = 10;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  int max_line_search = 40;
};

enum class SolverStatus { converged, max_iterations, line_search_failed, non_finite };

const char* to_string(SolverStatus status);

struct OptimizeResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  double gradient_norm = 0.0;  // sup-norm at x
  int iterations = 0;
  int evaluations = 0;
  SolverStatus status = SolverStatus::max_iterations;

  bool converged() const { return status == SolverStatus::converged; }
};

/// Maximizes `objective` with limited-memory BFGS and a strong-Wolfe line
/// search. Near the optimum the sufficient-increase test allows for rounding
/// in the objective, so progress is driven by the directional derivative.
/// Deterministic for a given start. Throws std::invalid_argument if the start
/// point is not finite.
OptimizeResult maximize_lbfgs(const ObjectiveFn& objective, const Eigen::VectorXd& init,
                              const LbfgsConfig& cfg = {});

}  // namespace cnhpp
