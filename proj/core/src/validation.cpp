#include "cnhpp/validation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "cnhpp/error.hpp"
#include "csv.hpp"

namespace cnhpp {

namespace {

double quantile_sorted(const std::vector<double>& v, double p) {
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

PercentileReport percentile_rank(const Eigen::MatrixXd& scores, int first_step, const EventLog& events) {
  if (scores.cols() != events.n_segments()) {
    throw InputError("intensity field has " + std::to_string(scores.cols()) + " segments but events refer to " +
                     std::to_string(events.n_segments()));
  }
  PercentileReport report;
  const auto n = static_cast<double>(scores.cols());
  for (std::size_t k = 0; k < events.size(); ++k) {
    const Event& e = events.events()[k];
    const int t = events.step_of(e);
    const int row = t - first_step;
    if (row < 0 || row >= scores.rows()) {
      throw InputError("event " + std::to_string(k) + " at step " + std::to_string(t) +
                       " lies outside the intensity window");
    }
    const double s = scores(row, e.segment);
    const auto at_or_below = (scores.row(row).array() <= s).count();
    report.records.push_back({k, e.segment, t, 100.0 * static_cast<double>(at_or_below) / n});
  }

  std::vector<double> p;
  for (const auto& r : report.records) p.push_back(r.percentile);
  if (p.empty()) {
    report.quantiles.setConstant(std::numeric_limits<double>::quiet_NaN());
    report.mean = std::numeric_limits<double>::quiet_NaN();
    return report;
  }
  std::sort(p.begin(), p.end());
  for (int q = 0; q < 5; ++q) report.quantiles(q) = quantile_sorted(p, 0.25 * q);
  double sum = 0.0;
  for (double v : p) sum += v;
  report.mean = sum / static_cast<double>(p.size());
  return report;
}

PercentileReport percentile_rank(const IntensityField& field, const EventLog& events) {
  // ranks of log lambda and lambda coincide, and log lambda never overflows
  return percentile_rank(field.log_lambda, field.first_step, events);
}

void write_percentile_csv(std::ostream& out, const PercentileReport& report) {
  const auto old = out.precision(17);
  out << "event_index,segment_id,t,percentile\n";
  for (const auto& r : report.records) {
    out << r.event_index << ',' << r.segment << ',' << r.step << ',' << r.percentile << '\n';
  }
  out.precision(old);
}

ComparisonColumn hpp_column(const std::string& label, double rate, double loglik) {
  ComparisonColumn c;
  c.label = label;
  c.rate = rate;
  c.loglik = loglik;
  return c;
}

ComparisonColumn fit_column(const std::string& label, const FitResult& fit, bool show_decay) {
  ComparisonColumn c;
  c.label = label;
  if (show_decay) c.xi = fit.params_hat.xi;
  c.beta = fit.params_hat.beta;
  c.loglik = fit.loglik;
  return c;
}

ComparisonTable::ComparisonTable(std::vector<ComparisonColumn> columns) {
  Eigen::Index n_beta = 0;
  for (const auto& c : columns) n_beta = std::max(n_beta, c.beta.size());

  row_labels_.push_back("rate (x1e-5)");
  row_labels_.push_back("decay");
  for (Eigen::Index j = 0; j < n_beta; ++j) row_labels_.push_back("beta_" + std::to_string(j));
  row_labels_.push_back("log-likelihood");

  cells_.assign(row_labels_.size(), std::vector<std::string>(columns.size(), "-"));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    const auto& col = columns[c];
    column_labels_.push_back(col.label);
    if (col.rate) cells_[0][c] = fixed3(*col.rate * 1e5);
    if (col.xi) cells_[1][c] = fixed3(*col.xi);
    for (Eigen::Index j = 0; j < col.beta.size(); ++j) cells_[2 + static_cast<std::size_t>(j)][c] = fixed3(col.beta(j));
    cells_.back()[c] = fixed3(col.loglik);
  }
}

std::string ComparisonTable::cell(const std::string& row, const std::string& column) const {
  const auto r = std::find(row_labels_.begin(), row_labels_.end(), row);
  const auto c = std::find(column_labels_.begin(), column_labels_.end(), column);
  if (r == row_labels_.end() || c == column_labels_.end()) {
    throw std::out_of_range("no comparison cell (" + row + ", " + column + ")");
  }
  return cells_[static_cast<std::size_t>(r - row_labels_.begin())][static_cast<std::size_t>(c - column_labels_.begin())];
}

std::string ComparisonTable::to_text() const {
  std::size_t first = 0;
  for (const auto& r : row_labels_) first = std::max(first, r.size());
  std::vector<std::size_t> width(column_labels_.size());
  for (std::size_t c = 0; c < column_labels_.size(); ++c) {
    width[c] = column_labels_[c].size();
    for (const auto& row : cells_) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  auto pad = [&out](const std::string& s, std::size_t w, bool left) {
    if (left) out << s << std::string(w - s.size(), ' ');
    else out << std::string(w - s.size(), ' ') << s;
  };
  pad("", first, true);
  for (std::size_t c = 0; c < column_labels_.size(); ++c) {
    out << "  ";
    pad(column_labels_[c], width[c], false);
  }
  out << '\n';
  for (std::size_t r = 0; r < row_labels_.size(); ++r) {
    pad(row_labels_[r], first, true);
    for (std::size_t c = 0; c < column_labels_.size(); ++c) {
      out << "  ";
      pad(cells_[r][c], width[c], false);
    }
    out << '\n';
  }
  return out.str();
}

std::string ComparisonTable::to_csv() const {
  std::ostringstream out;
  out << "parameter";
  for (const auto& c : column_labels_) out << ',' << c;
  out << '\n';
  for (std::size_t r = 0; r < row_labels_.size(); ++r) {
    out << row_labels_[r];
    for (const auto& cell : cells_[r]) out << ',' << cell;
    out << '\n';
  }
  return out.str();
}

ComparisonTable model_comparison(const std::vector<ComparisonColumn>& columns) { return ComparisonTable(columns); }

void export_density(std::ostream& out, const IntensityField& field, int t) {
  if (!field.covers(t)) throw InputError("step " + std::to_string(t) + " is outside the intensity window");
  const Eigen::VectorXd lambda = field.lambda_at(t);
  const auto old = out.precision(17);
  out << "segment_id,lambda\n";
  for (Index i = 0; i < field.n_segments(); ++i) out << i << ',' << lambda(i) << '\n';
  out.precision(old);
}

Eigen::VectorXd read_density(const std::filesystem::path& path) {
  const auto csv = detail::read_csv(path);
  const auto c_id = csv.column("segment_id");
  const auto c_l = csv.column("lambda");
  std::map<long long, double> by_id;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) by_id[csv.integer(r, c_id)] = csv.number(r, c_l);
  Eigen::VectorXd out(static_cast<Eigen::Index>(by_id.size()));
  Eigen::Index k = 0;
  for (const auto& [id, v] : by_id) {
    if (id != k) throw InputError(path.string() + ": segment ids must be exactly 0..N-1");
    out(k++) = v;
  }
  return out;
}

}  // namespace cnhpp
