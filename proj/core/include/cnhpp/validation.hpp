#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cnhpp/estimation.hpp"
#include "cnhpp/model.hpp"

namespace cnhpp {

struct PercentileRecord {
  std::size_t event_index = 0;
  Index segment = 0;
  int step = 0;
  double percentile = 0.0;
};

struct PercentileReport {
  std::vector<PercentileRecord> records;
  // 0, 25, 50, 75 and 100th quantiles of the percentile column (linear
  // interpolation); all NaN when there are no events.
  Eigen::Matrix<double, 5, 1> quantiles;
  double mean = 0.0;
};

/// Weak rank of the event segment's score among all segments at the event
/// step: 100 * |{i : score(i) <= score(s)}| / N. `scores` is steps x N with
/// row r holding step first_step + r.
PercentileReport percentile_rank(const Eigen::MatrixXd& scores, int first_step, const EventLog& events);
PercentileReport percentile_rank(const IntensityField& field, const EventLog& events);

/// CSV with header event_index,segment_id,t,percentile.
void write_percentile_csv(std::ostream& out, const PercentileReport& report);

struct ComparisonColumn {
  std::string label;
  std::optional<double> rate;  // HPP rate per segment per step
  std::optional<double> xi;
  Eigen::VectorXd beta;        // empty when the model has no coefficients
  double loglik = 0.0;
};

ComparisonColumn hpp_column(const std::string& label, double rate, double loglik);
ComparisonColumn fit_column(const std::string& label, const FitResult& fit, bool show_decay);

/// Parameters of several fitted models side by side; entries a model lacks
/// are shown as "-".
class ComparisonTable {
 public:
  explicit ComparisonTable(std::vector<ComparisonColumn> columns);

  const std::vector<std::string>& row_labels() const { return row_labels_; }
  const std::vector<std::string>& column_labels() const { return column_labels_; }
  /// cells[row][column], already formatted.
  const std::vector<std::vector<std::string>>& cells() const { return cells_; }
  std::string cell(const std::string& row, const std::string& column) const;

  std::string to_text() const;
  std::string to_csv() const;

 private:
  std::vector<std::string> row_labels_;
  std::vector<std::string> column_labels_;
  std::vector<std::vector<std::string>> cells_;
};

ComparisonTable model_comparison(const std::vector<ComparisonColumn>& columns);

/// One row per segment: segment_id,lambda at step t.
void export_density(std::ostream& out, const IntensityField& field, int t);
/// Reads an export_density file back, indexed by segment id.
Eigen::VectorXd read_density(const std::filesystem::path& path);

}  // namespace cnhpp
