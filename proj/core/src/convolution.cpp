#include "cnhpp/convolution.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cnhpp/error.hpp"

namespace cnhpp {

CovariatePanel::CovariatePanel(std::vector<Eigen::MatrixXd> design, int burn_in)
    : design_(std::move(design)), burn_in_(burn_in) {
  if (burn_in_ < 0) throw InputError("burn_in must be nonnegative");
  if (design_.empty()) throw InputError("covariate panel has no steps");
  if (window_steps() < 0) throw InputError("burn_in exceeds the number of panel steps");
  const auto rows = design_.front().rows();
  const auto cols = design_.front().cols();
  if (rows == 0 || cols == 0) throw InputError("covariate panel has an empty design matrix");
  for (std::size_t s = 0; s < design_.size(); ++s) {
    const auto& x = design_[s];
    const int t = static_cast<int>(s) - burn_in_;
    if (x.rows() != rows || x.cols() != cols) {
      throw InputError("covariate panel step " + std::to_string(t) + " has inconsistent shape");
    }
    if (!x.allFinite()) {
      throw InputError("covariate panel step " + std::to_string(t) + " contains NaN or Inf");
    }
    if ((x.col(0).array() != 1.0).any()) {
      throw InputError("covariate panel step " + std::to_string(t) +
                       " has an intercept column that is not exactly 1");
    }
  }
}

CovariatePanel CovariatePanel::from_covariates(const std::vector<Eigen::MatrixXd>& covariates,
                                               int burn_in) {
  std::vector<Eigen::MatrixXd> design;
  design.reserve(covariates.size());
  for (const auto& c : covariates) {
    Eigen::MatrixXd x(c.rows(), c.cols() + 1);
    x.col(0).setOnes();
    x.rightCols(c.cols()) = c;
    design.push_back(std::move(x));
  }
  return CovariatePanel(std::move(design), burn_in);
}

const Eigen::MatrixXd& CovariatePanel::at(int t) const {
  if (!has_step(t)) {
    throw InputError("covariate panel has no step " + std::to_string(t) + " (available " +
                     std::to_string(-burn_in_) + ".." + std::to_string(window_steps() - 1) + ")");
  }
  return design_[static_cast<std::size_t>(t + burn_in_)];
}

CovariatePanel CovariatePanel::slice(int first, int window_start, int last) const {
  if (!(first <= window_start && window_start <= last + 1) || !has_step(first) || !has_step(last)) {
    throw InputError("invalid panel slice");
  }
  std::vector<Eigen::MatrixXd> design;
  for (int t = first; t <= last; ++t) design.push_back(at(t));
  return CovariatePanel(std::move(design), window_start - first);
}

Eigen::VectorXd nc_apply(const WeightMatrix& w, const Eigen::VectorXd& f) {
  if (f.size() != w.size()) throw std::invalid_argument("dimension mismatch in nc_apply");
  return w.matrix() * f;
}

Eigen::VectorXd nc_nfold(const WeightMatrix& w, const Eigen::VectorXd& f, int n) {
  if (n < 0) throw std::invalid_argument("n-fold convolution needs n >= 0");
  Eigen::VectorXd out = f;
  for (int k = 0; k < n; ++k) out = nc_apply(w, out);
  return out;
}

ConvCovariates conv_covariate_matrix(const WeightMatrix& w, const CovariatePanel& panel,
                                     double xi, int K, int t, bool pad_history) {
  if (K < 0) throw std::invalid_argument("truncation K must be nonnegative");
  if (!(xi >= 0.0 && xi < 1.0)) throw std::invalid_argument("decay xi must lie in [0, 1)");
  if (w.size() != panel.n_segments()) throw std::invalid_argument("weight matrix does not match panel");
  if (!panel.has_step(t)) {
    throw InputError("covariate panel has no step " + std::to_string(t));
  }
  int depth = K;
  if (!panel.has_step(t - K)) {
    if (!pad_history) {
      throw InputError("convolutional covariates at step " + std::to_string(t) +
                       " need history steps " + std::to_string(t - K) + ".." +
                       std::to_string(panel.first_step() - 1) + " which the panel lacks");
    }
    depth = t - panel.first_step();
  }

  Eigen::MatrixXd acc = panel.at(t - depth);
  for (int k = depth - 1; k >= 0; --k) {
    Eigen::MatrixXd propagated = w.matrix() * acc;
    acc = panel.at(t - k) + xi * propagated;
  }
  return {std::move(acc), depth};
}

}  // namespace cnhpp
