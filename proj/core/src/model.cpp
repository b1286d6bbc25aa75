#include "cnhpp/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "cnhpp/error.hpp"

namespace cnhpp {

void ModelParams::validate() const {
  if (!(xi >= 0.0 && xi < 1.0)) throw std::invalid_argument("decay xi must lie in [0, 1)");
  if (beta.size() == 0) throw std::invalid_argument("beta must have at least an intercept");
  if (!beta.allFinite()) throw std::invalid_argument("beta must be finite");
}

EventLog::EventLog(std::vector<Event> events, Index n_segments, int window_steps)
    : events_(std::move(events)), n_segments_(n_segments), window_steps_(window_steps) {
  if (n_segments_ <= 0) throw InputError("event log needs a positive segment count");
  if (window_steps_ <= 0) throw InputError("event log needs a positive window length");
  for (std::size_t k = 0; k < events_.size(); ++k) {
    const auto& e = events_[k];
    if (e.segment < 0 || e.segment >= n_segments_) {
      throw InputError("event " + std::to_string(k) + " references segment " +
                       std::to_string(e.segment) + " outside [0, " + std::to_string(n_segments_) + ")");
    }
    if (!std::isfinite(e.time) || e.time < 0.0 || e.time > window_steps_) {
      throw InputError("event " + std::to_string(k) + " at time " + std::to_string(e.time) +
                       " lies outside the window [0, " + std::to_string(window_steps_) + "]");
    }
  }
}

int EventLog::step_of(const Event& e) const {
  return std::min(static_cast<int>(std::floor(e.time)), window_steps_ - 1);
}

std::vector<Eigen::VectorXd> EventLog::step_counts() const {
  std::vector<Eigen::VectorXd> counts(static_cast<std::size_t>(window_steps_),
                                      Eigen::VectorXd::Zero(n_segments_));
  for (const auto& e : events_) counts[static_cast<std::size_t>(step_of(e))](e.segment) += 1.0;
  return counts;
}

Eigen::VectorXd EventLog::segment_counts() const {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n_segments_);
  for (const auto& e : events_) b(e.segment) += 1.0;
  return b;
}

Eigen::VectorXd IntensityField::log_at(int t) const {
  if (!covers(t)) throw InputError("intensity field does not cover step " + std::to_string(t));
  return log_lambda.row(t - first_step).transpose();
}

Eigen::VectorXd IntensityField::lambda_at(int t) const { return log_at(t).array().exp(); }

IntensityField IntensityField::from_lambda(int first_step, const Eigen::MatrixXd& lambda) {
  return {first_step, lambda.array().log().matrix()};
}

namespace {

void check_shapes(const ModelParams& params, const CovariatePanel& panel, const WeightMatrix& w) {
  params.validate();
  if (params.beta.size() != panel.n_columns()) {
    throw std::invalid_argument("beta has " + std::to_string(params.beta.size()) +
                                " entries but the panel has " + std::to_string(panel.n_columns()) +
                                " design columns");
  }
  if (w.size() != panel.n_segments()) throw std::invalid_argument("weight matrix does not match panel");
}

void check_events(const CovariatePanel& panel, const EventLog& events) {
  if (events.n_segments() != panel.n_segments()) {
    throw InputError("event log segment count does not match the panel");
  }
  if (events.window_steps() != panel.window_steps()) {
    throw InputError("event window (" + std::to_string(events.window_steps()) +
                     " steps) does not match the panel window (" +
                     std::to_string(panel.window_steps()) + " steps)");
  }
}

std::string format_beta(const Eigen::VectorXd& beta) {
  std::ostringstream os;
  os << '(';
  for (Eigen::Index k = 0; k < beta.size(); ++k) os << (k ? ", " : "") << beta(k);
  os << ')';
  return os.str();
}

// Adds sum_i n_i eta_i - exp(eta_i) for one step. Shared by every likelihood
// path so that reductions coincide bit for bit.
void accumulate_step(double& acc, const Eigen::VectorXd& eta, const Eigen::VectorXd& counts,
                     int t, const Eigen::VectorXd& beta) {
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    if (!(eta(i) <= kMaxLogIntensity)) {
      std::ostringstream msg;
      msg << "log-intensity " << eta(i) << " at segment " << i << ", step " << t
          << " exceeds the overflow guard " << kMaxLogIntensity << " at beta = " << format_beta(beta);
      throw NumericalError(msg.str());
    }
    acc += counts(i) * eta(i) - std::exp(eta(i));
  }
}

// c(s) = X(s) beta for s = first..last.
std::vector<Eigen::VectorXd> current_effects(const CovariatePanel& panel, const Eigen::VectorXd& beta,
                                             int first, int last) {
  std::vector<Eigen::VectorXd> c;
  c.reserve(static_cast<std::size_t>(last - first + 1));
  for (int s = first; s <= last; ++s) c.push_back(panel.at(s) * beta);
  return c;
}

void require_history(const CovariatePanel& panel, int K) {
  if (K < 0) throw std::invalid_argument("truncation K must be nonnegative");
  if (panel.burn_in() < K) {
    throw InputError("the model needs " + std::to_string(K) + " history steps (" +
                     std::to_string(-K) + "..-1) before the window but the panel has burn_in " +
                     std::to_string(panel.burn_in()));
  }
}

// Forward pass of the whole-window log-intensities. For the truncated mode
// each step t is the nested sum c(t) + xi W (c(t-1) + ... c(t-K)).
std::vector<Eigen::VectorXd> forward_eta(const ModelParams& params, const CovariatePanel& panel,
                                         const WeightMatrix& w, int K, HistoryMode mode) {
  require_history(panel, K);
  const int T = panel.window_steps();
  const auto c = current_effects(panel, params.beta, -K, T - 1);
  auto c_at = [&](int s) -> const Eigen::VectorXd& { return c[static_cast<std::size_t>(s + K)]; };

  std::vector<Eigen::VectorXd> eta;
  eta.reserve(static_cast<std::size_t>(T));
  if (mode == HistoryMode::truncated) {
    for (int t = 0; t < T; ++t) {
      Eigen::VectorXd acc = c_at(t - K);
      for (int k = K - 1; k >= 0; --k) {
        Eigen::VectorXd propagated = w.matrix() * acc;
        acc = c_at(t - k) + params.xi * propagated;
      }
      eta.push_back(std::move(acc));
    }
  } else {
    Eigen::VectorXd h = c_at(-K);
    for (int s = -K + 1; s < T; ++s) {
      if (s - 1 >= 0) eta.push_back(h);
      Eigen::VectorXd propagated = w.matrix() * h;
      h = c_at(s) + params.xi * propagated;
    }
    eta.push_back(std::move(h));
  }
  return eta;
}

}  // namespace

Eigen::VectorXd log_intensity_series(const ModelParams& params, const CovariatePanel& panel,
                                     const WeightMatrix& w, int K, int t) {
  check_shapes(params, panel, w);
  return conv_covariate_matrix(w, panel, params.xi, K, t).values * params.beta;
}

IntensityField log_intensity_recurrence(const ModelParams& params, const CovariatePanel& panel,
                                        const WeightMatrix& w, int t_start, int t_end,
                                        const Eigen::VectorXd& h_init) {
  check_shapes(params, panel, w);
  if (t_end < t_start) throw std::invalid_argument("recurrence needs t_end >= t_start");
  if (h_init.size() != panel.n_segments()) throw std::invalid_argument("h_init has the wrong size");
  IntensityField field{t_start, Eigen::MatrixXd(t_end - t_start + 1, panel.n_segments())};
  // rows of the steps x N output are strided, so the state lives in its own buffers
  Eigen::VectorXd h = h_init;
  Eigen::VectorXd next(h.size());
  for (int t = t_start; t <= t_end; ++t) {
    next.noalias() = w.matrix() * h;
    next *= params.xi;
    next.noalias() += panel.at(t) * params.beta;
    h.swap(next);
    field.log_lambda.row(t - t_start) = h.transpose();
  }
  return field;
}

IntensityField window_log_intensity(const ModelParams& params, const CovariatePanel& panel,
                                    const WeightMatrix& w, int K, HistoryMode mode) {
  check_shapes(params, panel, w);
  const auto eta = forward_eta(params, panel, w, K, mode);
  IntensityField field{0, Eigen::MatrixXd(panel.window_steps(), panel.n_segments())};
  for (std::size_t t = 0; t < eta.size(); ++t) field.log_lambda.row(static_cast<Eigen::Index>(t)) = eta[t].transpose();
  return field;
}

double log_likelihood(const ModelParams& params, const CovariatePanel& panel,
                      const EventLog& events, const WeightMatrix& w, int K, HistoryMode mode) {
  check_shapes(params, panel, w);
  check_events(panel, events);
  const auto eta = forward_eta(params, panel, w, K, mode);
  const auto counts = events.step_counts();
  double ll = 0.0;
  for (std::size_t t = 0; t < eta.size(); ++t) {
    accumulate_step(ll, eta[t], counts[t], static_cast<int>(t), params.beta);
  }
  return ll;
}

Eigen::VectorXd LikelihoodGradient::as_vector() const {
  Eigen::VectorXd v(beta.size() + 1);
  v.head(beta.size()) = beta;
  v(beta.size()) = xi;
  return v;
}

LikelihoodGradient gradient_bptt(const ModelParams& params, const CovariatePanel& panel,
                                 const EventLog& events, const WeightMatrix& w, int K,
                                 HistoryMode mode) {
  check_shapes(params, panel, w);
  check_events(panel, events);
  require_history(panel, K);
  const int T = panel.window_steps();
  const Index N = panel.n_segments();
  const double xi = params.xi;
  const auto counts = events.step_counts();
  const auto c = current_effects(panel, params.beta, -K, T - 1);
  auto c_at = [&](int s) -> const Eigen::VectorXd& { return c[static_cast<std::size_t>(s + K)]; };

  // dl/do(t) = n(t) - exp(o(t)), with the same overflow guard as the likelihood
  auto output_adjoint = [&](const Eigen::VectorXd& o, int t) {
    double unused = 0.0;
    accumulate_step(unused, o, counts[static_cast<std::size_t>(t)], t, params.beta);
    return Eigen::VectorXd(counts[static_cast<std::size_t>(t)] - o.array().exp().matrix());
  };

  // total adjoint dl/dh(s) reaching each input step s = -K..T-1
  std::vector<Eigen::VectorXd> adjoint(static_cast<std::size_t>(T + K), Eigen::VectorXd::Zero(N));
  auto adjoint_at = [&](int s) -> Eigen::VectorXd& { return adjoint[static_cast<std::size_t>(s + K)]; };
  double d_xi = 0.0;

  if (mode == HistoryMode::truncated) {
    std::vector<Eigen::VectorXd> h(static_cast<std::size_t>(K + 1));
    std::vector<Eigen::VectorXd> wh(static_cast<std::size_t>(K + 1));
    for (int t = 0; t < T; ++t) {
      // unrolled forward pass from the zero state at t-K-1
      h[0] = c_at(t - K);
      for (int j = 1; j <= K; ++j) {
        wh[static_cast<std::size_t>(j)] = w.matrix() * h[static_cast<std::size_t>(j - 1)];
        h[static_cast<std::size_t>(j)] = c_at(t - K + j) + xi * wh[static_cast<std::size_t>(j)];
      }
      // backward through the unroll; only o(t) = h[K] feeds the likelihood
      Eigen::VectorXd a = output_adjoint(h[static_cast<std::size_t>(K)], t);
      for (int j = K; j >= 0; --j) {
        adjoint_at(t - K + j) += a;
        if (j == 0) break;
        d_xi += wh[static_cast<std::size_t>(j)].dot(a);
        Eigen::VectorXd back = w.matrix().transpose() * a;
        a = xi * back;
      }
    }
  } else {
    std::vector<Eigen::VectorXd> wh(static_cast<std::size_t>(T + K), Eigen::VectorXd::Zero(N));
    std::vector<Eigen::VectorXd> h(static_cast<std::size_t>(T + K));
    Eigen::VectorXd prev = Eigen::VectorXd::Zero(N);
    for (int s = -K; s < T; ++s) {
      const auto idx = static_cast<std::size_t>(s + K);
      wh[idx] = w.matrix() * prev;
      h[idx] = c_at(s) + xi * wh[idx];
      prev = h[idx];
    }
    Eigen::VectorXd next = Eigen::VectorXd::Zero(N);
    for (int s = T - 1; s >= -K; --s) {
      const auto idx = static_cast<std::size_t>(s + K);
      Eigen::VectorXd a = s >= 0 ? output_adjoint(h[idx], s) : Eigen::VectorXd::Zero(N);
      if (s < T - 1) {
        Eigen::VectorXd back = w.matrix().transpose() * next;
        a += xi * back;
      }
      adjoint_at(s) = a;
      next = std::move(a);
    }
    for (int s = -K; s < T; ++s) {
      d_xi += wh[static_cast<std::size_t>(s + K)].dot(adjoint_at(s));
    }
  }

  LikelihoodGradient grad;
  grad.beta = Eigen::VectorXd::Zero(panel.n_columns());
  for (int s = -K; s < T; ++s) grad.beta.noalias() += panel.at(s).transpose() * adjoint_at(s);
  grad.xi = d_xi;
  return grad;
}

double nhpp_log_likelihood(const Eigen::VectorXd& beta, const CovariatePanel& panel,
                           const EventLog& events) {
  if (beta.size() != panel.n_columns()) throw std::invalid_argument("beta does not match the panel");
  check_events(panel, events);
  const auto counts = events.step_counts();
  double ll = 0.0;
  for (int t = 0; t < panel.window_steps(); ++t) {
    const Eigen::VectorXd eta = panel.at(t) * beta;
    accumulate_step(ll, eta, counts[static_cast<std::size_t>(t)], t, beta);
  }
  return ll;
}

Eigen::VectorXd nhpp_score(const Eigen::VectorXd& beta, const CovariatePanel& panel,
                           const EventLog& events) {
  if (beta.size() != panel.n_columns()) throw std::invalid_argument("beta does not match the panel");
  check_events(panel, events);
  const auto counts = events.step_counts();
  Eigen::VectorXd score = Eigen::VectorXd::Zero(beta.size());
  for (int t = 0; t < panel.window_steps(); ++t) {
    const Eigen::VectorXd eta = panel.at(t) * beta;
    double unused = 0.0;
    accumulate_step(unused, eta, counts[static_cast<std::size_t>(t)], t, beta);
    const Eigen::VectorXd residual = counts[static_cast<std::size_t>(t)] - eta.array().exp().matrix();
    score.noalias() += panel.at(t).transpose() * residual;
  }
  return score;
}

EventProbability event_probability(const IntensityField& field, const std::vector<Index>& subnet,
                                   int t0, int t1, const std::vector<int>& counts) {
  if (subnet.size() != counts.size()) throw std::invalid_argument("one count per subnet segment is required");
  if (t1 <= t0 || !field.covers(t0) || !field.covers(t1 - 1)) {
    throw InputError("interval [" + std::to_string(t0) + ", " + std::to_string(t1) +
                     ") is not inside the intensity field");
  }
  EventProbability out;
  out.expected = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(subnet.size()));
  for (std::size_t k = 0; k < subnet.size(); ++k) {
    const Index i = subnet[k];
    if (i < 0 || i >= field.n_segments()) throw std::out_of_range("subnet segment out of range");
    if (counts[k] < 0) throw std::invalid_argument("event counts must be nonnegative");
    double lambda_total = 0.0;
    for (int t = t0; t < t1; ++t) lambda_total += std::exp(field.log_lambda(t - field.first_step, i));
    out.expected(static_cast<Eigen::Index>(k)) = lambda_total;
    const double n = counts[k];
    double term = -lambda_total - std::lgamma(n + 1.0);
    if (n > 0.0) {
      term += lambda_total > 0.0 ? n * std::log(lambda_total) : -std::numeric_limits<double>::infinity();
    }
    out.log_joint += term;
  }
  out.total_expected = out.expected.sum();
  out.joint = std::exp(out.log_joint);
  return out;
}

double subnet_total_probability(double total_expected, int n) {
  if (n < 0 || !(total_expected >= 0.0)) throw std::invalid_argument("invalid Poisson arguments");
  if (total_expected == 0.0) return n == 0 ? 1.0 : 0.0;
  return std::exp(n * std::log(total_expected) - total_expected - std::lgamma(n + 1.0));
}

IntensityField predict_intensity(const ModelParams& params, const CovariatePanel& panel,
                                 const WeightMatrix& w, int K, HistoryMode mode) {
  return window_log_intensity(params, panel, w, K, mode);
}

void write_intensity_csv(std::ostream& out, const IntensityField& field) {
  const auto old_precision = out.precision(17);
  out << "t,segment_id,log_lambda,lambda\n";
  for (int r = 0; r < field.steps(); ++r) {
    for (Index i = 0; i < field.n_segments(); ++i) {
      const double v = field.log_lambda(r, i);
      out << field.first_step + r << ',' << i << ',' << v << ',' << std::exp(v) << '\n';
    }
  }
  out.precision(old_precision);
}

}  // namespace cnhpp
