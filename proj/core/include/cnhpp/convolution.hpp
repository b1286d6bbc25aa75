#pragma once

#include <vector>

#include <Eigen/Dense>

#include "cnhpp/network.hpp"

namespace cnhpp {

/// Per-step design matrices X(t), each N x (q+1) with a leading intercept
/// column of ones. Steps are addressed relative to the likelihood window:
/// t = -burn_in .. window_steps-1, where negative steps are history only.
class CovariatePanel {
 public:
  CovariatePanel() = default;

  /// `design` already carries the intercept column; it is checked, not added.
  CovariatePanel(std::vector<Eigen::MatrixXd> design, int burn_in);

  /// Builds the panel from raw N x q covariate blocks and prepends the intercept.
  static CovariatePanel from_covariates(const std::vector<Eigen::MatrixXd>& covariates,
                                        int burn_in);

  Index n_segments() const { return static_cast<Index>(design_.empty() ? 0 : design_.front().rows()); }
  int n_columns() const { return design_.empty() ? 0 : static_cast<int>(design_.front().cols()); }
  int n_covariates() const { return n_columns() - 1; }
  int burn_in() const { return burn_in_; }
  int window_steps() const { return static_cast<int>(design_.size()) - burn_in_; }
  int total_steps() const { return static_cast<int>(design_.size()); }
  int first_step() const { return -burn_in_; }
  bool has_step(int t) const { return t >= -burn_in_ && t < window_steps(); }

  const Eigen::MatrixXd& at(int t) const;

  /// Copy restricted to steps [first, last] (inclusive); `first` becomes the
  /// earliest history step and `window_start` the new step 0.
  CovariatePanel slice(int first, int window_start, int last) const;

 private:
  std::vector<Eigen::MatrixXd> design_;
  int burn_in_ = 0;
};

/// (NC f)_i = sum over i' in Omega_i of w_ii' f_i'.
Eigen::VectorXd nc_apply(const WeightMatrix& w, const Eigen::VectorXd& f);

/// n-fold network convolution; n = 0 returns f.
Eigen::VectorXd nc_nfold(const WeightMatrix& w, const Eigen::VectorXd& f, int n);

struct ConvCovariates {
  Eigen::MatrixXd values;
  int k_used = 0;
};

/// Convolutional covariate matrix sum_{k=0..K} xi^k W^k X(t-k), evaluated in
/// nested form X(t) + xi W (X(t-1) + xi W (...)) with K sparse products.
/// Throws InputError when steps t-K.. are missing, unless pad_history, in
/// which case missing X terms count as zero and k_used reports the depth that
/// actually contributed.
ConvCovariates conv_covariate_matrix(const WeightMatrix& w, const CovariatePanel& panel,
                                     double xi, int K, int t, bool pad_history = false);

}  // namespace cnhpp
