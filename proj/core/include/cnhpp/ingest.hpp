#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "cnhpp/convolution.hpp"
#include "cnhpp/model.hpp"
#include "cnhpp/network.hpp"

namespace cnhpp {

// Loaders throw InputError naming the file and, where it applies, the line.

/// Network file: CSV (segment_id,x1,y1,x2,y2) or JSON, either an array of
/// such objects or {"segments": [...]}. Ids must be exactly 0..N-1.
std::vector<SegmentGeometry> load_segments(const std::filesystem::path& path);

/// Adjacency CSV: segment_id,neighbor_id.
std::vector<std::pair<Index, Index>> load_adjacency(const std::filesystem::path& path);

/// Geometric snapping unless an adjacency file is given, which then overrides it.
LinearNetwork load_network(const std::filesystem::path& path, const NeighborConfig& cfg,
                           const std::optional<std::filesystem::path>& adjacency = std::nullopt);

/// Long-format covariate CSV: t,segment_id,x1..xq, one row per (t, segment).
/// Steps must be consecutive integers; negative steps become burn-in history.
CovariatePanel load_panel(const std::filesystem::path& path, std::optional<Index> n_segments = std::nullopt);

/// Events CSV: segment_id,t.
EventLog load_events(const std::filesystem::path& path, Index n_segments, int window_steps);

struct StandardizationStats {
  Eigen::VectorXd mean;  // per non-intercept covariate
  Eigen::VectorXd sd;    // population SD; 0 marks a constant column

  nlohmann::json to_json() const;
  static StandardizationStats from_json(const nlohmann::json& j);
};

/// Z-scores every non-intercept column with its mean and population SD over
/// the window steps (t >= 0); burn-in steps are transformed alike.
/// Constant columns map to zeros.
std::pair<CovariatePanel, StandardizationStats> standardize(const CovariatePanel& panel);

/// Applies previously computed statistics (never recomputes them).
CovariatePanel apply_standardization(const CovariatePanel& panel, const StandardizationStats& stats);
CovariatePanel destandardize(const CovariatePanel& panel, const StandardizationStats& stats);

/// (nir - red) / (nir + red). Throws std::domain_error when both bands are zero.
double compute_ndvi(double rho_nir, double rho_red);

struct GridField {
  std::vector<Point> points;
  std::vector<double> values;

  void validate() const;
};

/// Grid field CSV: x,y,value.
GridField load_grid_field(const std::filesystem::path& path);
/// Reflectance CSV: x,y,rho_red,rho_nir, turned into an NDVI field.
GridField load_reflectance(const std::filesystem::path& path);

/// Value of the grid point nearest to each segment midpoint (planar
/// Euclidean); ties go to the lowest point index.
Eigen::VectorXd assign_grid_to_segments(const GridField& field, const LinearNetwork& net);

void write_segments_csv(std::ostream& out, const LinearNetwork& net);
void write_adjacency_csv(std::ostream& out, const LinearNetwork& net);
/// Writes the non-intercept columns as x1..xq.
void write_panel_csv(std::ostream& out, const CovariatePanel& panel);
void write_events_csv(std::ostream& out, const EventLog& events);

}  // namespace cnhpp
