#include "cnhpp/optimizer.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

namespace cnhpp {

const char* to_string(SolverStatus status) {
  switch (status) {
    case SolverStatus::converged:
      return "converged";
    case SolverStatus::max_iterations:
      return "max_iterations";
    case SolverStatus::line_search_failed:
      return "line_search_failed";
    case SolverStatus::non_finite:
      return "non_finite";
  }
  return "unknown";
}

namespace {

// Minimization view of the objective along a ray.
struct Probe {
  double alpha = 0.0;
  double f = 0.0;       // -objective
  double slope = 0.0;   // d f / d alpha
  Eigen::VectorXd x;
  Eigen::VectorXd g;    // -gradient
  bool finite = false;
};

class LineSearch {
 public:
  LineSearch(const ObjectiveFn& fn, const LbfgsConfig& cfg, int& evaluations)
      : fn_(fn), cfg_(cfg), evaluations_(evaluations) {}

  // Strong-Wolfe search from `start` along `dir` (a descent direction for f).
  bool run(const Probe& start, const Eigen::VectorXd& dir, double alpha0, Probe& out) {
    const double f0 = start.f;
    const double d0 = start.slope;
    // rounding slack on the sufficient-decrease test
    slack_ = 1e-12 * (1.0 + std::abs(f0));

    Probe lo = start;
    lo.alpha = 0.0;  // start may be the previous iteration's accepted probe
    double alpha = alpha0;
    for (int it = 0; it < cfg_.max_line_search; ++it) {
      Probe p = probe(start, dir, alpha);
      if (!p.finite) {
        alpha = lo.alpha + 0.5 * (alpha - lo.alpha);
        if (alpha - lo.alpha <= 1e-20) return false;
        continue;
      }
      if (!sufficient(p, f0, d0) || (it > 0 && p.f >= lo.f && lo.alpha > 0.0)) {
        return zoom(start, dir, lo, p, f0, d0, out);
      }
      if (std::abs(p.slope) <= -cfg_.wolfe_c2 * d0) {
        out = std::move(p);
        return true;
      }
      if (p.slope >= 0.0) return zoom(start, dir, p, lo, f0, d0, out);
      lo = std::move(p);
      alpha *= 2.0;
    }
    return false;
  }

 private:
  Probe probe(const Probe& start, const Eigen::VectorXd& dir, double alpha) {
    Probe p;
    p.alpha = alpha;
    p.x = start.x + alpha * dir;
    double value = 0.0;
    Eigen::VectorXd grad;
    ++evaluations_;
    p.finite = fn_(p.x, value, grad) && std::isfinite(value) && grad.allFinite();
    if (p.finite) {
      p.f = -value;
      p.g = -grad;
      p.slope = p.g.dot(dir);
    }
    return p;
  }

  bool sufficient(const Probe& p, double f0, double d0) const {
    return p.f <= f0 + cfg_.wolfe_c1 * p.alpha * d0 + slack_;
  }

  // Nocedal & Wright zoom; `lo` satisfies sufficient decrease, the minimizer
  // lies between lo.alpha and hi.alpha.
  bool zoom(const Probe& start, const Eigen::VectorXd& dir, Probe lo, Probe hi, double f0,
            double d0, Probe& out) {
    for (int it = 0; it < cfg_.max_line_search; ++it) {
      const double a = lo.alpha;
      const double b = hi.alpha;
      double alpha = 0.5 * (a + b);
      if (hi.finite) {
        // secant on the slope when it brackets a sign change
        if (lo.slope < 0.0 && hi.slope > 0.0) {
          const double s = a - lo.slope * (b - a) / (hi.slope - lo.slope);
          const double lo_b = std::min(a, b);
          const double hi_b = std::max(a, b);
          const double margin = 0.1 * (hi_b - lo_b);
          if (s > lo_b + margin && s < hi_b - margin) alpha = s;
        }
      }
      if (std::abs(b - a) <= 1e-16 * std::max(1.0, std::abs(a))) break;
      Probe p = probe(start, dir, alpha);
      if (!p.finite || !sufficient(p, f0, d0) || p.f > lo.f + slack_) {
        hi = std::move(p);
        continue;
      }
      if (std::abs(p.slope) <= -cfg_.wolfe_c2 * d0) {
        out = std::move(p);
        return true;
      }
      if (p.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
      lo = std::move(p);
    }
    // accept the best sufficient-decrease point if it made any progress
    if (lo.alpha > 0.0 && lo.f <= f0 + slack_) {
      out = std::move(lo);
      return true;
    }
    return false;
  }

  const ObjectiveFn& fn_;
  const LbfgsConfig& cfg_;
  int& evaluations_;
  double slack_ = 0.0;
};

}  // namespace

OptimizeResult maximize_lbfgs(const ObjectiveFn& objective, const Eigen::VectorXd& init,
                              const LbfgsConfig& cfg) {
  OptimizeResult result;
  Probe cur;
  cur.x = init;
  {
    double value = 0.0;
    Eigen::VectorXd grad;
    result.evaluations = 1;
    if (!objective(init, value, grad) || !std::isfinite(value) || !grad.allFinite()) {
      throw std::invalid_argument("objective is not finite at the starting point");
    }
    cur.f = -value;
    cur.g = -grad;
    cur.finite = true;
  }

  std::deque<Eigen::VectorXd> s_hist;
  std::deque<Eigen::VectorXd> y_hist;
  std::deque<double> rho_hist;
  LineSearch search(objective, cfg, result.evaluations);

  auto finish = [&](SolverStatus status) {
    result.x = cur.x;
    result.value = -cur.f;
    result.gradient = -cur.g;
    result.gradient_norm = cur.g.lpNorm<Eigen::Infinity>();
    result.status = status;
    return result;
  };

  for (int iter = 0;; ++iter) {
    result.iterations = iter;
    if (cur.g.lpNorm<Eigen::Infinity>() < cfg.grad_tolerance) return finish(SolverStatus::converged);
    if (iter >= cfg.max_iterations) return finish(SolverStatus::max_iterations);

    // two-loop recursion
    Eigen::VectorXd q = cur.g;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      alpha[k] = rho_hist[k] * s_hist[k].dot(q);
      q -= alpha[k] * y_hist[k];
    }
    double gamma = 1.0;
    if (!s_hist.empty()) gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    Eigen::VectorXd r = gamma * q;
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double b = rho_hist[k] * y_hist[k].dot(r);
      r += s_hist[k] * (alpha[k] - b);
    }
    Eigen::VectorXd dir = -r;
    cur.slope = cur.g.dot(dir);
    if (!(cur.slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      dir = -cur.g;
      cur.slope = cur.g.dot(dir);
    }

    double alpha0 = 1.0;
    if (s_hist.empty()) alpha0 = std::min(1.0, 1.0 / std::max(cur.g.lpNorm<Eigen::Infinity>(), 1e-300));

    Probe next;
    bool ok = search.run(cur, dir, alpha0, next);
    if (!ok && !s_hist.empty()) {
      // retry once along steepest descent with fresh memory
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      dir = -cur.g;
      cur.slope = cur.g.dot(dir);
      alpha0 = std::min(1.0, 1.0 / std::max(cur.g.lpNorm<Eigen::Infinity>(), 1e-300));
      ok = search.run(cur, dir, alpha0, next);
    }
    if (!ok) {
      result.iterations = iter;
      return finish(SolverStatus::line_search_failed);
    }

    Eigen::VectorXd s = next.x - cur.x;
    Eigen::VectorXd y = next.g - cur.g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > cfg.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    cur = std::move(next);
  }
}

}  // namespace cnhpp
