#include "cnhpp/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <set>

#include "cnhpp/error.hpp"
#include "csv.hpp"

namespace cnhpp {

using detail::CsvTable;
using detail::read_csv;

namespace {

std::vector<SegmentGeometry> order_by_id(std::map<long long, SegmentGeometry> by_id,
                                         const std::filesystem::path& path) {
  std::vector<SegmentGeometry> out;
  long long expect = 0;
  for (auto& [id, g] : by_id) {
    if (id != expect) {
      throw InputError(path.string() + ": segment ids must be exactly 0..N-1; id " + std::to_string(expect) +
                       " is missing");
    }
    out.push_back(g);
    ++expect;
  }
  if (out.empty()) throw InputError(path.string() + ": network has no segments");
  return out;
}

std::vector<SegmentGeometry> load_segments_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": invalid JSON: " + e.what());
  }
  const auto& arr = j.is_object() && j.contains("segments") ? j.at("segments") : j;
  if (!arr.is_array()) throw InputError(path.string() + ": expected an array of segments");
  std::map<long long, SegmentGeometry> by_id;
  for (std::size_t k = 0; k < arr.size(); ++k) {
    try {
      const auto& s = arr[k];
      const auto id = s.at("segment_id").get<long long>();
      SegmentGeometry g{{s.at("x1").get<double>(), s.at("y1").get<double>()},
                        {s.at("x2").get<double>(), s.at("y2").get<double>()}};
      if (!by_id.emplace(id, g).second) {
        throw InputError(path.string() + ": duplicate segment_id " + std::to_string(id));
      }
    } catch (const nlohmann::json::exception& e) {
      throw InputError(path.string() + ": segment entry " + std::to_string(k) + ": " + e.what());
    }
  }
  return order_by_id(std::move(by_id), path);
}

}  // namespace

std::vector<SegmentGeometry> load_segments(const std::filesystem::path& path) {
  if (path.extension() == ".json") return load_segments_json(path);
  const CsvTable csv = read_csv(path);
  const auto c_id = csv.column("segment_id");
  const auto c_x1 = csv.column("x1");
  const auto c_y1 = csv.column("y1");
  const auto c_x2 = csv.column("x2");
  const auto c_y2 = csv.column("y2");
  std::map<long long, SegmentGeometry> by_id;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto id = csv.integer(r, c_id);
    SegmentGeometry g{{csv.number(r, c_x1), csv.number(r, c_y1)}, {csv.number(r, c_x2), csv.number(r, c_y2)}};
    if (!by_id.emplace(id, g).second) {
      throw InputError(csv.where(r) + ": duplicate segment_id " + std::to_string(id));
    }
  }
  return order_by_id(std::move(by_id), path);
}

std::vector<std::pair<Index, Index>> load_adjacency(const std::filesystem::path& path) {
  const CsvTable csv = read_csv(path);
  const auto c_id = csv.column("segment_id");
  const auto c_nb = csv.column("neighbor_id");
  std::vector<std::pair<Index, Index>> pairs;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    pairs.emplace_back(static_cast<Index>(csv.integer(r, c_id)), static_cast<Index>(csv.integer(r, c_nb)));
  }
  return pairs;
}

LinearNetwork load_network(const std::filesystem::path& path, const NeighborConfig& cfg,
                           const std::optional<std::filesystem::path>& adjacency) {
  auto segments = load_segments(path);
  if (adjacency) {
    try {
      return LinearNetwork::from_adjacency(segments, load_adjacency(*adjacency));
    } catch (const InputError& e) {
      throw InputError(adjacency->string() + ": " + e.what());
    }
  }
  try {
    return LinearNetwork::from_geometry(segments, cfg);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

CovariatePanel load_panel(const std::filesystem::path& path, std::optional<Index> n_segments) {
  const CsvTable csv = read_csv(path);
  const auto c_t = csv.column("t");
  const auto c_id = csv.column("segment_id");
  std::vector<std::size_t> c_x;
  for (int j = 1; csv.has_column("x" + std::to_string(j)); ++j) c_x.push_back(csv.column("x" + std::to_string(j)));
  if (csv.rows.empty()) throw InputError(path.string() + ": covariate panel has no rows");

  long long max_id = -1;
  std::set<long long> steps;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto id = csv.integer(r, c_id);
    if (id < 0) throw InputError(csv.where(r) + ": negative segment_id");
    if (n_segments && id >= *n_segments) {
      throw InputError(csv.where(r) + ": segment_id " + std::to_string(id) + " is outside the network (N=" +
                       std::to_string(*n_segments) + ")");
    }
    max_id = std::max(max_id, id);
    steps.insert(csv.integer(r, c_t));
  }
  const Index N = n_segments ? *n_segments : static_cast<Index>(max_id + 1);
  const long long first = *steps.begin();
  const long long last = *steps.rbegin();
  if (static_cast<long long>(steps.size()) != last - first + 1) {
    for (long long t = first; t <= last; ++t) {
      if (!steps.count(t)) {
        throw InputError(path.string() + ": non-uniform steps: step " + std::to_string(t) + " is missing from " +
                         std::to_string(first) + ".." + std::to_string(last));
      }
    }
  }
  if (first > 0) throw InputError(path.string() + ": the window must start at t=0 (first step is " + std::to_string(first) + ")");
  if (last < 0) throw InputError(path.string() + ": panel has no window steps (t >= 0)");

  const auto n_steps = static_cast<std::size_t>(last - first + 1);
  const auto q = static_cast<Eigen::Index>(c_x.size());
  std::vector<Eigen::MatrixXd> raw(n_steps, Eigen::MatrixXd::Zero(N, q));
  std::vector<std::vector<char>> seen(n_steps, std::vector<char>(static_cast<std::size_t>(N), 0));
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto s = static_cast<std::size_t>(csv.integer(r, c_t) - first);
    const auto id = static_cast<Index>(csv.integer(r, c_id));
    if (seen[s][static_cast<std::size_t>(id)]) {
      throw InputError(csv.where(r) + ": duplicate row for step " + std::to_string(csv.integer(r, c_t)) +
                       ", segment " + std::to_string(id));
    }
    seen[s][static_cast<std::size_t>(id)] = 1;
    for (Eigen::Index j = 0; j < q; ++j) raw[s](id, j) = csv.number(r, c_x[static_cast<std::size_t>(j)]);
  }
  for (std::size_t s = 0; s < n_steps; ++s) {
    for (Index i = 0; i < N; ++i) {
      if (!seen[s][static_cast<std::size_t>(i)]) {
        throw InputError(path.string() + ": step " + std::to_string(first + static_cast<long long>(s)) +
                         " has no row for segment " + std::to_string(i));
      }
    }
  }
  return CovariatePanel::from_covariates(raw, static_cast<int>(-first));
}

EventLog load_events(const std::filesystem::path& path, Index n_segments, int window_steps) {
  const CsvTable csv = read_csv(path);
  const auto c_id = csv.column("segment_id");
  const auto c_t = csv.column("t");
  std::vector<Event> events;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto id = csv.integer(r, c_id);
    const double t = csv.number(r, c_t);
    if (id < 0 || id >= n_segments) {
      throw InputError(csv.where(r) + " (row " + std::to_string(r + 1) + "): unknown segment_id " +
                       std::to_string(id) + " (network has " + std::to_string(n_segments) + " segments)");
    }
    if (t < 0.0 || t > window_steps) {
      throw InputError(csv.where(r) + " (row " + std::to_string(r + 1) + "): event time " + std::to_string(t) +
                       " is outside the window [0, " + std::to_string(window_steps) + "]");
    }
    events.push_back({static_cast<Index>(id), t});
  }
  return EventLog(std::move(events), n_segments, window_steps);
}

nlohmann::json StandardizationStats::to_json() const {
  return {{"mean", std::vector<double>(mean.data(), mean.data() + mean.size())},
          {"sd", std::vector<double>(sd.data(), sd.data() + sd.size())}};
}

StandardizationStats StandardizationStats::from_json(const nlohmann::json& j) {
  try {
    const auto m = j.at("mean").get<std::vector<double>>();
    const auto s = j.at("sd").get<std::vector<double>>();
    if (m.size() != s.size()) throw InputError("standardization mean and sd differ in length");
    StandardizationStats st;
    st.mean = Eigen::Map<const Eigen::VectorXd>(m.data(), static_cast<Eigen::Index>(m.size()));
    st.sd = Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
    return st;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed standardization statistics: ") + e.what());
  }
}

namespace {

std::vector<Eigen::MatrixXd> covariate_blocks(const CovariatePanel& panel) {
  std::vector<Eigen::MatrixXd> out;
  for (int t = panel.first_step(); t < panel.window_steps(); ++t) {
    out.push_back(panel.at(t).rightCols(panel.n_covariates()));
  }
  return out;
}

}  // namespace

std::pair<CovariatePanel, StandardizationStats> standardize(const CovariatePanel& panel) {
  const int q = panel.n_covariates();
  StandardizationStats st{Eigen::VectorXd::Zero(q), Eigen::VectorXd::Zero(q)};
  // statistics come from the window only; burn-in steps are transformed with them
  const double count = static_cast<double>(panel.window_steps()) * panel.n_segments();
  for (int t = 0; t < panel.window_steps(); ++t) {
    st.mean += panel.at(t).rightCols(q).colwise().sum().transpose();
  }
  st.mean /= count;
  for (int t = 0; t < panel.window_steps(); ++t) {
    const Eigen::MatrixXd centered = panel.at(t).rightCols(q).rowwise() - st.mean.transpose();
    st.sd += centered.colwise().squaredNorm().transpose();
  }
  st.sd = (st.sd / count).cwiseSqrt();
  // a column whose spread is pure rounding noise is constant
  for (int j = 0; j < q; ++j) {
    if (st.sd(j) <= 1e-13 * std::max(1.0, std::abs(st.mean(j)))) st.sd(j) = 0.0;
  }
  return {apply_standardization(panel, st), st};
}

CovariatePanel apply_standardization(const CovariatePanel& panel, const StandardizationStats& stats) {
  const int q = panel.n_covariates();
  if (stats.mean.size() != q || stats.sd.size() != q) {
    throw InputError("standardization statistics cover " + std::to_string(stats.mean.size()) +
                     " covariates but the panel has " + std::to_string(q));
  }
  auto blocks = covariate_blocks(panel);
  for (auto& b : blocks) {
    for (int j = 0; j < q; ++j) {
      if (stats.sd(j) > 0.0) {
        b.col(j) = (b.col(j).array() - stats.mean(j)) / stats.sd(j);
      } else {
        b.col(j).setZero();
      }
    }
  }
  return CovariatePanel::from_covariates(blocks, panel.burn_in());
}

CovariatePanel destandardize(const CovariatePanel& panel, const StandardizationStats& stats) {
  const int q = panel.n_covariates();
  if (stats.mean.size() != q || stats.sd.size() != q) throw InputError("standardization statistics do not match panel");
  auto blocks = covariate_blocks(panel);
  for (auto& b : blocks) {
    for (int j = 0; j < q; ++j) b.col(j) = b.col(j).array() * stats.sd(j) + stats.mean(j);
  }
  return CovariatePanel::from_covariates(blocks, panel.burn_in());
}

double compute_ndvi(double rho_nir, double rho_red) {
  if (!std::isfinite(rho_nir) || !std::isfinite(rho_red)) throw std::domain_error("reflectances must be finite");
  const double sum = rho_nir + rho_red;
  if (!(sum > 0.0)) throw std::domain_error("NDVI is undefined when both reflectances are zero");
  return (rho_nir - rho_red) / sum;
}

void GridField::validate() const {
  if (points.empty()) throw InputError("grid field is empty");
  if (points.size() != values.size()) throw InputError("grid field points and values differ in length");
  std::set<std::pair<double, double>> seen;
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (!std::isfinite(points[k].x) || !std::isfinite(points[k].y)) {
      throw InputError("grid point " + std::to_string(k) + " has a non-finite coordinate");
    }
    if (!seen.emplace(points[k].x, points[k].y).second) {
      throw InputError("grid point " + std::to_string(k) + " duplicates an earlier coordinate");
    }
  }
}

GridField load_grid_field(const std::filesystem::path& path) {
  const CsvTable csv = read_csv(path);
  const auto cx = csv.column("x");
  const auto cy = csv.column("y");
  const auto cv = csv.column("value");
  GridField field;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    field.points.push_back({csv.number(r, cx), csv.number(r, cy)});
    field.values.push_back(csv.number(r, cv));
  }
  try {
    field.validate();
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return field;
}

GridField load_reflectance(const std::filesystem::path& path) {
  const CsvTable csv = read_csv(path);
  const auto cx = csv.column("x");
  const auto cy = csv.column("y");
  const auto cred = csv.column("rho_red");
  const auto cnir = csv.column("rho_nir");
  GridField field;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    field.points.push_back({csv.number(r, cx), csv.number(r, cy)});
    try {
      field.values.push_back(compute_ndvi(csv.number(r, cnir), csv.number(r, cred)));
    } catch (const std::domain_error& e) {
      throw InputError(csv.where(r) + ": " + e.what());
    }
  }
  try {
    field.validate();
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return field;
}

Eigen::VectorXd assign_grid_to_segments(const GridField& field, const LinearNetwork& net) {
  field.validate();
  Eigen::VectorXd out(net.size());
  for (Index i = 0; i < net.size(); ++i) {
    const Point m = net.segment(i).midpoint();
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < field.points.size(); ++k) {
      const double d = distance(m, field.points[k]);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    out(i) = field.values[best];
  }
  return out;
}

void write_segments_csv(std::ostream& out, const LinearNetwork& net) {
  const auto old = out.precision(17);
  out << "segment_id,x1,y1,x2,y2\n";
  for (const auto& s : net.segments()) {
    out << s.id << ',' << s.a.x << ',' << s.a.y << ',' << s.b.x << ',' << s.b.y << '\n';
  }
  out.precision(old);
}

void write_adjacency_csv(std::ostream& out, const LinearNetwork& net) {
  out << "segment_id,neighbor_id\n";
  for (Index i = 0; i < net.size(); ++i) {
    for (Index j : net.adjacent(i)) {
      if (j > i) out << i << ',' << j << '\n';
    }
  }
}

void write_panel_csv(std::ostream& out, const CovariatePanel& panel) {
  const auto old = out.precision(17);
  out << "t,segment_id";
  for (int j = 1; j <= panel.n_covariates(); ++j) out << ",x" << j;
  out << '\n';
  for (int t = panel.first_step(); t < panel.window_steps(); ++t) {
    const auto& x = panel.at(t);
    for (Index i = 0; i < panel.n_segments(); ++i) {
      out << t << ',' << i;
      for (int j = 1; j < panel.n_columns(); ++j) out << ',' << x(i, j);
      out << '\n';
    }
  }
  out.precision(old);
}

void write_events_csv(std::ostream& out, const EventLog& events) {
  const auto old = out.precision(17);
  out << "segment_id,t\n";
  for (const auto& e : events.events()) out << e.segment << ',' << e.time << '\n';
  out.precision(old);
}

}  // namespace cnhpp
