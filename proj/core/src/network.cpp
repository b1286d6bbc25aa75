#include "cnhpp/network.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>

#include "cnhpp/error.hpp"

namespace cnhpp {

double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

void NeighborConfig::validate() const {
  if (!(snap_tolerance >= 0.0) || !std::isfinite(snap_tolerance)) {
    throw std::invalid_argument("snap_tolerance must be a finite nonnegative number");
  }
}

const char* to_string(WeightScheme scheme) {
  switch (scheme) {
    case WeightScheme::equal:
      return "equal";
    case WeightScheme::exponential:
      return "exponential";
    case WeightScheme::user:
      return "user";
  }
  return "unknown";
}

WeightScheme weight_scheme_from_string(const std::string& name) {
  if (name == "equal") return WeightScheme::equal;
  if (name == "exponential" || name == "exp") return WeightScheme::exponential;
  if (name == "user") return WeightScheme::user;
  throw InputError("unknown weight scheme '" + name + "' (expected equal|exponential|user)");
}

namespace {

std::vector<Segment> make_segments(const std::vector<SegmentGeometry>& geometry) {
  if (geometry.empty()) throw InputError("a network needs at least one segment");
  std::vector<Segment> out;
  out.reserve(geometry.size());
  for (std::size_t k = 0; k < geometry.size(); ++k) {
    const auto& g = geometry[k];
    for (double v : {g.a.x, g.a.y, g.b.x, g.b.y}) {
      if (!std::isfinite(v)) {
        throw InputError("segment " + std::to_string(k) + " has a non-finite coordinate");
      }
    }
    out.push_back({static_cast<Index>(k), g.a, g.b, distance(g.a, g.b)});
  }
  return out;
}

// Bucket endpoints on a grid with cell size >= tolerance so that any two
// points within tolerance land in the same or adjacent cells.
class EndpointGrid {
 public:
  explicit EndpointGrid(double tolerance) : cell_(tolerance > 0.0 ? tolerance : 1.0) {}

  void insert(const Point& p, std::size_t payload) { cells_[key(cell_of(p))].push_back({p, payload}); }

  template <typename Fn>
  void for_each_near(const Point& p, double tolerance, Fn&& fn) const {
    const auto [cx, cy] = cell_of(p);
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        auto it = cells_.find(key({cx + dx, cy + dy}));
        if (it == cells_.end()) continue;
        for (const auto& [q, payload] : it->second) {
          if (distance(p, q) <= tolerance) fn(payload);
        }
      }
    }
  }

 private:
  using Cell = std::pair<std::int64_t, std::int64_t>;

  Cell cell_of(const Point& p) const {
    return {static_cast<std::int64_t>(std::floor(p.x / cell_)),
            static_cast<std::int64_t>(std::floor(p.y / cell_))};
  }
  static std::uint64_t key(const Cell& c) {
    const auto hx = static_cast<std::uint64_t>(c.first) * 0x9E3779B97F4A7C15ULL;
    return hx ^ (static_cast<std::uint64_t>(c.second) + 0x632BE59BD9B4E019ULL + (hx << 6) + (hx >> 2));
  }

  double cell_;
  std::unordered_map<std::uint64_t, std::vector<std::pair<Point, std::size_t>>> cells_;
};

void sort_unique(std::vector<Index>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

LinearNetwork::LinearNetwork(std::vector<Segment> segments,
                             std::vector<std::vector<Index>> adjacency, bool explicit_adjacency)
    : segments_(std::move(segments)),
      adjacency_(std::move(adjacency)),
      explicit_adjacency_(explicit_adjacency) {}

LinearNetwork LinearNetwork::from_geometry(const std::vector<SegmentGeometry>& geometry,
                                           const NeighborConfig& cfg) {
  cfg.validate();
  auto segments = make_segments(geometry);
  const double tol = cfg.snap_tolerance;
  const auto n = segments.size();

  EndpointGrid grid(tol);
  for (std::size_t s = 0; s < n; ++s) {
    grid.insert(segments[s].a, 2 * s);
    grid.insert(segments[s].b, 2 * s + 1);
  }

  std::vector<std::vector<Index>> adjacency(n);
  for (std::size_t s = 0; s < n; ++s) {
    for (const Point& p : {segments[s].a, segments[s].b}) {
      grid.for_each_near(p, tol, [&](std::size_t payload) {
        const std::size_t other = payload / 2;
        if (other != s) adjacency[s].push_back(static_cast<Index>(other));
      });
    }
    sort_unique(adjacency[s]);
  }

  for (std::size_t s = 0; s < n; ++s) {
    for (Index o : adjacency[s]) {
      if (static_cast<std::size_t>(o) <= s) continue;
      const auto& p = segments[s];
      const auto& q = segments[static_cast<std::size_t>(o)];
      const bool same = (distance(p.a, q.a) <= tol && distance(p.b, q.b) <= tol) ||
                        (distance(p.a, q.b) <= tol && distance(p.b, q.a) <= tol);
      if (same) {
        std::ostringstream msg;
        msg << "duplicate segment geometry: segments " << s << " and " << o
            << " share both endpoints";
        throw InputError(msg.str());
      }
    }
  }
  return LinearNetwork(std::move(segments), std::move(adjacency), false);
}

LinearNetwork LinearNetwork::from_adjacency(const std::vector<SegmentGeometry>& geometry,
                                            const std::vector<std::pair<Index, Index>>& pairs) {
  auto segments = make_segments(geometry);
  const auto n = static_cast<Index>(segments.size());
  std::vector<std::vector<Index>> adjacency(segments.size());
  for (const auto& [i, j] : pairs) {
    if (i < 0 || i >= n || j < 0 || j >= n) {
      throw InputError("adjacency pair (" + std::to_string(i) + ", " + std::to_string(j) +
                       ") references a segment outside [0, " + std::to_string(n) + ")");
    }
    if (i == j) continue;
    adjacency[static_cast<std::size_t>(i)].push_back(j);
    adjacency[static_cast<std::size_t>(j)].push_back(i);
  }
  for (auto& a : adjacency) sort_unique(a);
  return LinearNetwork(std::move(segments), std::move(adjacency), true);
}

std::span<const Index> LinearNetwork::adjacent(Index i) const {
  return adjacency_.at(static_cast<std::size_t>(i));
}

std::vector<Index> LinearNetwork::neighbor_set(Index i, const NeighborConfig& cfg) const {
  const auto adj = adjacent(i);
  std::vector<Index> out(adj.begin(), adj.end());
  if (cfg.include_self) out.insert(std::lower_bound(out.begin(), out.end(), i), i);
  return out;
}

std::size_t LinearNetwork::edge_count() const {
  std::size_t twice = 0;
  for (const auto& a : adjacency_) twice += a.size();
  return twice / 2;
}

GenerationSet generation_neighbors(const LinearNetwork& net, Index i, int m,
                                   const NeighborConfig& cfg) {
  if (i < 0 || i >= net.size()) throw std::out_of_range("segment index out of range");
  if (m < 0) throw std::invalid_argument("generation must be nonnegative");

  // walk counts from i, propagated one generation at a time
  std::map<Index, std::uint64_t> current{{i, 1}};
  for (int g = 0; g < m; ++g) {
    std::map<Index, std::uint64_t> next;
    for (const auto& [node, count] : current) {
      for (Index nb : net.neighbor_set(node, cfg)) next[nb] += count;
    }
    current = std::move(next);
  }

  GenerationSet out;
  out.members.reserve(current.size());
  out.walks.reserve(current.size());
  for (const auto& [node, count] : current) {
    out.members.push_back(node);
    out.walks.push_back(count);
  }
  return out;
}

WeightMatrix::WeightMatrix(SparseMatrix m, std::vector<Index> empty_rows)
    : matrix_(std::move(m)), empty_rows_(std::move(empty_rows)) {
  matrix_.makeCompressed();
}

WeightMatrix WeightMatrix::identity(Index n) {
  SparseMatrix m(n, n);
  m.setIdentity();
  return WeightMatrix(std::move(m));
}

WeightMatrix WeightMatrix::zero(Index n) {
  std::vector<Index> rows(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = i;
  return WeightMatrix(SparseMatrix(n, n), std::move(rows));
}

WeightMatrix WeightMatrix::from_triplets(const LinearNetwork& net, const NeighborConfig& cfg,
                                         const std::vector<Eigen::Triplet<double, Index>>& triplets) {
  const Index n = net.size();
  for (const auto& t : triplets) {
    if (t.row() < 0 || t.row() >= n || t.col() < 0 || t.col() >= n) {
      throw InputError("weight entry (" + std::to_string(t.row()) + ", " +
                       std::to_string(t.col()) + ") is outside the network");
    }
    if (!std::isfinite(t.value())) throw InputError("weight entries must be finite");
    if (t.value() == 0.0) continue;
    const auto omega = net.neighbor_set(t.row(), cfg);
    if (!std::binary_search(omega.begin(), omega.end(), t.col())) {
      throw InputError("weight entry (" + std::to_string(t.row()) + ", " +
                       std::to_string(t.col()) + ") lies outside the neighbor set of segment " +
                       std::to_string(t.row()));
    }
  }
  SparseMatrix m(n, n);
  m.setFromTriplets(triplets.begin(), triplets.end());
  m.prune(0.0);
  std::vector<Index> empty;
  for (Index i = 0; i < n; ++i) {
    if (m.outerIndexPtr()[i + 1] == m.outerIndexPtr()[i]) empty.push_back(i);
  }
  return WeightMatrix(std::move(m), std::move(empty));
}

std::vector<std::pair<Index, double>> WeightMatrix::row(Index i) const {
  std::vector<std::pair<Index, double>> out;
  for (SparseMatrix::InnerIterator it(matrix_, i); it; ++it) out.emplace_back(it.col(), it.value());
  return out;
}

double WeightMatrix::row_sum(Index i) const {
  double s = 0.0;
  for (SparseMatrix::InnerIterator it(matrix_, i); it; ++it) s += it.value();
  return s;
}

WeightMatrix build_weights(const LinearNetwork& net, const NeighborConfig& cfg) {
  cfg.validate();
  if (cfg.scheme == WeightScheme::user) {
    throw std::invalid_argument("user-supplied weights must be built with WeightMatrix::from_triplets");
  }
  const Index n = net.size();
  std::vector<Eigen::Triplet<double, Index>> triplets;
  std::vector<Index> empty;
  for (Index i = 0; i < n; ++i) {
    const auto omega = net.neighbor_set(i, cfg);
    if (omega.empty()) {
      empty.push_back(i);
      continue;
    }
    const double inv = 1.0 / static_cast<double>(omega.size());
    std::vector<double> w(omega.size(), inv);
    if (cfg.scheme == WeightScheme::exponential) {
      const Point mi = net.segment(i).midpoint();
      double total = 0.0;
      for (std::size_t k = 0; k < omega.size(); ++k) {
        w[k] = std::exp(-distance(mi, net.segment(omega[k]).midpoint())) * inv;
        total += w[k];
      }
      if (cfg.renormalize && total > 0.0) {
        for (double& v : w) v /= total;
      }
    }
    for (std::size_t k = 0; k < omega.size(); ++k) triplets.emplace_back(i, omega[k], w[k]);
  }
  SparseMatrix m(n, n);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return WeightMatrix(std::move(m), std::move(empty));
}

double enumerate_walks(const LinearNetwork& net, const WeightMatrix& w, Index j, Index i, int k) {
  constexpr int kMaxSteps = 6;
  constexpr Index kMaxSegments = 64;
  if (k < 0 || k > kMaxSteps || net.size() > kMaxSegments) {
    throw std::invalid_argument("enumerate_walks is limited to k <= 6 and N <= 64 (got k=" +
                                std::to_string(k) + ", N=" + std::to_string(net.size()) + ")");
  }
  if (w.size() != net.size()) throw std::invalid_argument("weight matrix does not match network");
  if (i < 0 || i >= net.size() || j < 0 || j >= net.size()) {
    throw std::out_of_range("segment index out of range");
  }

  // Explicit depth-first walk: at each hop the next segment is the current one
  // or any adjacent segment, weighted by w(next, current).
  std::function<double(Index, int)> walk = [&](Index at, int remaining) -> double {
    if (remaining == 0) return at == i ? 1.0 : 0.0;
    double total = 0.0;
    auto step = [&](Index next) {
      const double wt = w.coeff(next, at);
      if (wt != 0.0) total += wt * walk(next, remaining - 1);
    };
    step(at);
    for (Index nb : net.adjacent(at)) step(nb);
    return total;
  };
  return walk(j, k);
}

Eigen::MatrixXd matrix_power_apply(const WeightMatrix& w, int k, const Eigen::MatrixXd& m) {
  if (k < 0) throw std::invalid_argument("matrix power must be nonnegative");
  if (m.rows() != w.size()) throw std::invalid_argument("dimension mismatch in matrix_power_apply");
  Eigen::MatrixXd out = m;
  for (int p = 0; p < k; ++p) out = w.matrix() * out;
  return out;
}

}  // namespace cnhpp
