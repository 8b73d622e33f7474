#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "spiral/spirals.hpp"

namespace spiral {

/// A stored point approaching a query segment. t is the arc-length parameter
/// of the closest segment point, measured from the segment start.
struct HitWitness {
  std::int64_t n = 0;
  double t = 0.0;
  double distance = 0.0;
};

/// First parameter at which a segment enters the eps-ball of a stored point.
struct EntryHit {
  std::int64_t n = 0;
  double entry = 0.0;
  double t = 0.0;
  double distance = 0.0;
};

struct QueryStats {
  std::int64_t shells = 0;
  std::int64_t buckets = 0;
  std::int64_t points = 0;

  QueryStats& operator+=(const QueryStats& o) {
    shells += o.shells;
    buckets += o.buckets;
    points += o.points;
    return *this;
  }
};

struct IndexOptions {
  /// Radial shell width; 0 picks 1.5 times the mean point spacing.
  double shell_width = 0.0;
  /// All points of the underlying set with |p| <= coverage_radius are stored.
  /// Defaults to +inf (the input is the whole set).
  double coverage_radius = std::numeric_limits<double>::infinity();
};

/// Distance from p to the segment [a, b]; writes the clamped arc-length
/// parameter of the closest point to *t when t is non-null.
double segment_distance(std::span<const double> p, std::span<const double> a, std::span<const double> b,
                        double* t = nullptr);

/// Points bucketed by radial shell and, inside a shell, by angular cell.
/// On S^1 the cells are equal angle bins with arc length about one shell width;
/// for d >= 2 they are cells of a cube grid on the direction coordinates.
/// Immutable after construction; all queries are const and thread-safe.
class ShellIndex {
 public:
  using Filter = std::function<bool(std::int64_t n, std::span<const double> p)>;

  ShellIndex(int d, std::vector<std::int64_t> ids, std::vector<double> coords, IndexOptions options = {});

  /// Index over a generated chunk; coverage radius is set from the chunk when
  /// it starts at n = 1.
  static ShellIndex from_chunk(PointChunk chunk, double shell_width = 0.0);
  static ShellIndex from_points(const std::vector<SpiralPoint>& points, double shell_width = 0.0);

  int d() const { return d_; }
  std::size_t dim() const { return static_cast<std::size_t>(d_) + 1; }
  std::size_t size() const { return ids_.size(); }
  double shell_width() const { return w_; }
  std::size_t shell_count() const { return shells_.size(); }
  std::size_t bucket_count() const { return keys_.size(); }
  double max_radius() const { return max_radius_; }
  double coverage_radius() const { return coverage_; }
  /// True when every point of shell s+1 has a larger id than every point of shell s.
  bool radially_ordered() const { return radially_ordered_; }
  /// Largest bucket diameter (radial extent times angular extent at the outer radius).
  double resolution_bound() const { return resolution_; }

  /// Stored point i in internal order.
  std::span<const double> point(std::size_t i) const {
    return std::span<const double>(coords_).subspan(i * dim(), dim());
  }
  std::int64_t id(std::size_t i) const { return ids_[i]; }
  /// Bucket of stored point i as (shell, cell key); used by invariant tests.
  std::pair<std::size_t, std::uint64_t> bucket_of(std::size_t i) const;
  /// Internal positions stored in bucket (shell, key).
  std::vector<std::size_t> bucket_members(std::size_t shell, std::uint64_t key) const;
  std::pair<std::size_t, std::uint64_t> locate(std::span<const double> p) const;

  /// Every stored point within eps of [a, b] (a == b gives a ball query),
  /// sorted by n.
  std::vector<HitWitness> within_segment(std::span<const double> a, std::span<const double> b, double eps,
                                         QueryStats* stats = nullptr) const;

  /// Hit with the smallest n, optionally restricted by a filter.
  std::optional<HitWitness> first_index_within_segment(std::span<const double> a, std::span<const double> b,
                                                       double eps, const Filter* filter = nullptr,
                                                       QueryStats* stats = nullptr) const;

  /// Smallest entry parameter over points within eps of [a, b]; ties go to the
  /// smallest n.
  std::optional<EntryHit> first_entry_along_segment(std::span<const double> a, std::span<const double> b,
                                                    double eps, QueryStats* stats = nullptr) const;

  std::vector<HitWitness> within_ball(std::span<const double> c, double r, QueryStats* stats = nullptr) const;

  /// Nearest stored point; points closer than exclude_within are skipped.
  std::optional<HitWitness> nearest(std::span<const double> x, double exclude_within = -1.0,
                                    QueryStats* stats = nullptr) const;

 private:
  struct Shell {
    std::size_t key_begin = 0;  // into keys_
    std::size_t key_end = 0;
    std::uint64_t cells = 1;    // d = 1: bins; d >= 2: grid size per coordinate
  };
  struct Range {
    std::size_t begin;
    std::size_t end;
  };
  struct Piece {
    double ta;
    double tb;
  };
  struct SegmentFrame;

  std::uint64_t cell_key(std::size_t shell, std::span<const double> p) const;
  /// Parameter intervals of the segment whose points have |q| in the band of shell s.
  int shell_pieces(const SegmentFrame& f, std::size_t s, double eps, Piece out[2]) const;
  /// Point ranges of buckets possibly within eps of the segment piece.
  void collect(const SegmentFrame& f, std::size_t s, const Piece& piece, double eps,
               std::vector<Range>& out, QueryStats* stats) const;
  void key_range(std::size_t s, std::uint64_t lo, std::uint64_t hi, std::vector<Range>& out,
                 QueryStats* stats) const;
  std::pair<std::size_t, std::size_t> shell_span(const SegmentFrame& f, double eps) const;
  template <class Visit>
  void scan_shell(const SegmentFrame& f, std::size_t s, double eps, QueryStats* stats, Visit&& visit) const;

  int d_;
  double w_;
  double max_radius_ = 0.0;
  double coverage_;
  double resolution_ = 0.0;
  bool radially_ordered_ = true;
  std::vector<std::int64_t> ids_;
  std::vector<double> coords_;
  std::vector<Shell> shells_;
  std::vector<std::uint64_t> keys_;
  std::vector<std::size_t> key_start_;  // keys_.size() + 1 entries
};

/// Index over points n = 1..n_max(R) of src with |p| <= R; refuses when that
/// would exceed the index budget.
ShellIndex index_ball(const PointSource& src, double R, std::int64_t budget = kDefaultIndexBudget,
                      double shell_width = 0.0);

}  // namespace spiral
