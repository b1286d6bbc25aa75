#pragma once

#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "cnhpp/convolution.hpp"
#include "cnhpp/network.hpp"

namespace cnhpp {

// Log-intensities above this are treated as overflow rather than evaluated.
inline constexpr double kMaxLogIntensity = 50.0;

struct ModelParams {
  double xi = 0.0;
  Eigen::VectorXd beta;

  void validate() const;
};

/// How history enters log lambda(t).
///  - truncated: sum_{k=0..K} xi^k W^k X(t-k) beta at every step (the fitted
///    convolutional model).
///  - recurrent: h(t) = xi W h(t-1) + X(t) beta run once from a zero state K
///    steps before the window, so later steps carry all earlier history.
/// Both agree at step 0 and whenever the recurrence is restarted K steps
/// before the step of interest.
enum class HistoryMode { truncated, recurrent };

struct Event {
  Index segment = 0;
  double time = 0.0;  // step units, in [0, window]
};

/// Observed events over the window [0, T]; each event is binned to the step
/// containing it (an event at exactly T goes to the last step).
class EventLog {
 public:
  EventLog() = default;
  EventLog(std::vector<Event> events, Index n_segments, int window_steps);

  const std::vector<Event>& events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  Index n_segments() const { return n_segments_; }
  int window_steps() const { return window_steps_; }

  int step_of(const Event& e) const;
  /// counts[t](i): events on segment i in step t.
  std::vector<Eigen::VectorXd> step_counts() const;
  /// b_i: events per segment over the whole window.
  Eigen::VectorXd segment_counts() const;

 private:
  std::vector<Event> events_;
  Index n_segments_ = 0;
  int window_steps_ = 0;
};

/// log lambda over consecutive steps; row r holds step first_step + r.
struct IntensityField {
  int first_step = 0;
  Eigen::MatrixXd log_lambda;  // steps x N

  int steps() const { return static_cast<int>(log_lambda.rows()); }
  Index n_segments() const { return static_cast<Index>(log_lambda.cols()); }
  bool covers(int t) const { return t >= first_step && t < first_step + steps(); }
  Eigen::VectorXd log_at(int t) const;
  Eigen::VectorXd lambda_at(int t) const;

  static IntensityField from_lambda(int first_step, const Eigen::MatrixXd& lambda);
};

/// X~(t) beta via conv_covariate_matrix.
Eigen::VectorXd log_intensity_series(const ModelParams& params, const CovariatePanel& panel,
                                     const WeightMatrix& w, int K, int t);

/// Iterates h(t) = xi W h(t-1) + X(t) beta for t = t_start..t_end starting
/// from h(t_start - 1) = h_init. Output o(t) = h(t).
IntensityField log_intensity_recurrence(const ModelParams& params, const CovariatePanel& panel,
                                        const WeightMatrix& w, int t_start, int t_end,
                                        const Eigen::VectorXd& h_init);

/// log lambda over the window steps 0..T-1 of `panel`.
IntensityField window_log_intensity(const ModelParams& params, const CovariatePanel& panel,
                                    const WeightMatrix& w, int K,
                                    HistoryMode mode = HistoryMode::truncated);

/// sum over events of log lambda(i, t_j) minus sum_{i,t} lambda(i,t) (unit
/// steps, piecewise-constant intensity). Throws NumericalError if any
/// log-intensity exceeds kMaxLogIntensity.
double log_likelihood(const ModelParams& params, const CovariatePanel& panel,
                      const EventLog& events, const WeightMatrix& w, int K,
                      HistoryMode mode = HistoryMode::truncated);

struct LikelihoodGradient {
  Eigen::VectorXd beta;
  double xi = 0.0;

  /// (d/dbeta_0..d/dbeta_q, d/dxi)
  Eigen::VectorXd as_vector() const;
};

/// Exact gradient by back-propagation through time. In recurrent mode this is
/// the classic adjoint sweep over the whole run; in truncated mode every
/// window step is its own K-step unrolled recurrence and the adjoints of all
/// unrolls are accumulated.
LikelihoodGradient gradient_bptt(const ModelParams& params, const CovariatePanel& panel,
                                 const EventLog& events, const WeightMatrix& w, int K,
                                 HistoryMode mode = HistoryMode::truncated);

/// Plain log-linear NHPP: log lambda(i,t) = x(i,t)' beta, no history.
double nhpp_log_likelihood(const Eigen::VectorXd& beta, const CovariatePanel& panel,
                           const EventLog& events);
Eigen::VectorXd nhpp_score(const Eigen::VectorXd& beta, const CovariatePanel& panel,
                           const EventLog& events);

struct EventProbability {
  Eigen::VectorXd expected;  // Lambda_i per subnet member
  double log_joint = 0.0;
  double joint = 0.0;
  double total_expected = 0.0;
};

/// Pr(N_i[t0, t1) = n_i for i in subnet) = prod_i Poisson(n_i; Lambda_i),
/// Lambda_i = sum_{t0 <= t < t1} lambda(i, t).
EventProbability event_probability(const IntensityField& field, const std::vector<Index>& subnet,
                                   int t0, int t1, const std::vector<int>& counts);

/// Pr(total count on the subnet = n) = Poisson(n; sum_i Lambda_i).
double subnet_total_probability(double total_expected, int n);

/// Intensities for every window step of `panel` with fitted parameters, by
/// the same machinery used when fitting.
IntensityField predict_intensity(const ModelParams& params, const CovariatePanel& panel,
                                 const WeightMatrix& w, int K,
                                 HistoryMode mode = HistoryMode::truncated);

/// CSV with header t,segment_id,log_lambda,lambda.
void write_intensity_csv(std::ostream& out, const IntensityField& field);

}  // namespace cnhpp
