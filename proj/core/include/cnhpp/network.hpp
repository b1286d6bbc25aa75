#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace cnhpp {

using Index = std::int32_t;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

double distance(const Point& a, const Point& b);

struct SegmentGeometry {
  Point a;
  Point b;
};

struct Segment {
  Index id = 0;
  Point a;
  Point b;
  double length = 0.0;

  Point midpoint() const { return {(a.x + b.x) / 2.0, (a.y + b.y) / 2.0}; }
};

enum class WeightScheme { equal, exponential, user };

struct NeighborConfig {
  // Endpoints closer than this (Euclidean, coordinate units) are the same node.
  double snap_tolerance = 1e-6;
  // Whether segment i belongs to its own neighbor set Omega_i.
  bool include_self = true;
  WeightScheme scheme = WeightScheme::equal;
  // Exponential rows are exp(-d)/|Omega_i| unless this is set.
  bool renormalize = false;

  void validate() const;
};

const char* to_string(WeightScheme scheme);
WeightScheme weight_scheme_from_string(const std::string& name);

/// Undirected graph of line segments. Two segments are adjacent when they
/// share an endpoint (or when an explicit adjacency list says so). Immutable
/// after construction.
class LinearNetwork {
 public:
  /// Snaps endpoints within cfg.snap_tolerance. Throws InputError on empty
  /// input, non-finite coordinates, or duplicate segment geometry.
  static LinearNetwork from_geometry(const std::vector<SegmentGeometry>& segments,
                                     const NeighborConfig& cfg = {});

  /// Geometry is kept for lengths/midpoints only; adjacency comes from
  /// `pairs` (symmetrized, self-pairs ignored).
  static LinearNetwork from_adjacency(const std::vector<SegmentGeometry>& segments,
                                      const std::vector<std::pair<Index, Index>>& pairs);

  Index size() const { return static_cast<Index>(segments_.size()); }
  const Segment& segment(Index i) const { return segments_.at(static_cast<std::size_t>(i)); }
  const std::vector<Segment>& segments() const { return segments_; }

  /// Sorted adjacent segment ids, never containing i itself.
  std::span<const Index> adjacent(Index i) const;

  /// Omega_i under cfg: adjacent(i) plus i when cfg.include_self. Sorted.
  std::vector<Index> neighbor_set(Index i, const NeighborConfig& cfg) const;

  bool explicit_adjacency() const { return explicit_adjacency_; }
  std::size_t edge_count() const;

 private:
  LinearNetwork(std::vector<Segment> segments, std::vector<std::vector<Index>> adjacency,
                bool explicit_adjacency);

  std::vector<Segment> segments_;
  std::vector<std::vector<Index>> adjacency_;
  bool explicit_adjacency_ = false;
};

/// m-th generation neighbors. `members` is the set Omega_i^(m); `walks[j]`
/// holds, for members[j], the number of distinct m-step walks from i that end
/// there (the ancestor bookkeeping of the series terms).
struct GenerationSet {
  std::vector<Index> members;
  std::vector<std::uint64_t> walks;
};

GenerationSet generation_neighbors(const LinearNetwork& net, Index i, int m,
                                   const NeighborConfig& cfg);

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, Index>;

/// Sparse N x N contribution weights; entry (i, j) is w_ij, the weight with
/// which segment j feeds segment i.
class WeightMatrix {
 public:
  WeightMatrix() = default;

  static WeightMatrix identity(Index n);
  static WeightMatrix zero(Index n);

  /// Triplets are (row i, column j, w_ij). Every nonzero must sit inside the
  /// structural pattern Omega_i of `net` under `cfg`; otherwise InputError.
  static WeightMatrix from_triplets(const LinearNetwork& net, const NeighborConfig& cfg,
                                    const std::vector<Eigen::Triplet<double, Index>>& triplets);

  Index size() const { return static_cast<Index>(matrix_.rows()); }
  const SparseMatrix& matrix() const { return matrix_; }
  double coeff(Index i, Index j) const { return matrix_.coeff(i, j); }
  std::vector<std::pair<Index, double>> row(Index i) const;
  double row_sum(Index i) const;

  /// Rows left empty (isolated segment without self weight) during construction.
  const std::vector<Index>& empty_rows() const { return empty_rows_; }

 private:
  explicit WeightMatrix(SparseMatrix m, std::vector<Index> empty_rows = {});
  friend WeightMatrix build_weights(const LinearNetwork&, const NeighborConfig&);

  SparseMatrix matrix_;
  std::vector<Index> empty_rows_;
};

/// Equal or exponential-kernel weights over Omega_i. The `user` scheme cannot
/// be built from geometry; use WeightMatrix::from_triplets instead.
WeightMatrix build_weights(const LinearNetwork& net, const NeighborConfig& cfg);

/// Brute-force sum over every k-step walk j -> i of the product of the edge
/// weights along it. Exponential in k; refuses k > 6 or N > 64.
double enumerate_walks(const LinearNetwork& net, const WeightMatrix& w, Index j, Index i, int k);

/// W^k M by k successive sparse-times-dense products.
Eigen::MatrixXd matrix_power_apply(const WeightMatrix& w, int k, const Eigen::MatrixXd& m);

}  // namespace cnhpp
