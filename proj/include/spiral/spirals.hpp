#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "spiral/sequences.hpp"

namespace spiral {

/// n^{1/(d+1)}: exp(log(n)/(d+1)) followed by one Newton step.
double spiral_radius(std::int64_t n, int d);

struct SpiralPoint {
  std::int64_t n;
  double radius;
  UnitVector direction;

  std::vector<double> cartesian() const;
};

SpiralPoint spiral_point(const Sequence& seq, std::int64_t n);
SpiralPoint spiral_point(const SequenceSpec& spec, std::int64_t n);

/// Closed index interval; empty when hi < lo.
struct IndexRange {
  std::int64_t lo = 1;
  std::int64_t hi = 0;
  bool empty() const { return hi < lo; }
  std::int64_t size() const { return empty() ? 0 : hi - lo + 1; }
};

/// Smallest and largest n >= 1 with r <= spiral_radius(n, d) <= R. The
/// bounds are verified against spiral_radius itself, so they agree exactly with
/// generated points.
IndexRange annulus_index_range(double r, double R, int d);

/// Anything that yields spiral-like points p_n, n = 1, 2, ..., with |p_n|
/// nondecreasing in n. Implementations are immutable and thread-safe.
class PointSource {
 public:
  virtual ~PointSource() = default;
  virtual int d() const = 0;
  std::size_t dim() const { return static_cast<std::size_t>(d()) + 1; }
  /// Cartesian coordinates of p_n for n in [n_lo, n_hi], (d+1) doubles each.
  virtual void fill(std::int64_t n_lo, std::int64_t n_hi, double* out) const = 0;
  virtual std::optional<std::int64_t> length() const { return std::nullopt; }
  virtual nlohmann::json describe() const = 0;
  /// True when every sequence direction is identical (all points on one ray).
  virtual bool single_ray() const { return false; }

  std::vector<double> point(std::int64_t n) const;
};

/// The spiral set {n^{1/(d+1)} u_n}.
class SpiralSet : public PointSource {
 public:
  explicit SpiralSet(SequenceSpec spec) : seq_(std::move(spec)) {}
  explicit SpiralSet(Sequence seq) : seq_(std::move(seq)) {}

  int d() const override { return seq_.d(); }
  void fill(std::int64_t n_lo, std::int64_t n_hi, double* out) const override;
  std::optional<std::int64_t> length() const override { return seq_.length(); }
  nlohmann::json describe() const override { return seq_.spec().to_json(); }
  bool single_ray() const override { return seq_.spec().kind == SequenceKind::Constant; }

  const Sequence& sequence() const { return seq_; }

 private:
  Sequence seq_;
};

/// Points n in [n_lo, n_lo + size) of a source, flat Cartesian coordinates.
struct PointChunk {
  int d = 1;
  std::int64_t n_lo = 1;
  std::vector<double> coords;

  std::size_t dim() const { return static_cast<std::size_t>(d) + 1; }
  std::int64_t size() const { return static_cast<std::int64_t>(coords.size() / dim()); }
  std::int64_t n_hi() const { return n_lo + size() - 1; }
  std::span<const double> point(std::int64_t i) const {
    return std::span<const double>(coords).subspan(static_cast<std::size_t>(i) * dim(), dim());
  }
};

/// Generates [n_lo, n_hi] in parallel blocks; output is independent of thread count.
PointChunk generate_chunk(const PointSource& src, std::int64_t n_lo, std::int64_t n_hi);

enum class AnnulusSchedule { Dyadic, Factorial };

/// The punctured spiral: base points inside D, the open delta-neighbourhood of
/// the ray R_+ v0 minus the closed annuli {R_m - rho_m <= |p| <= R_m}, are
/// redirected to the first sequence direction that moves them out of D.
struct PunctureSpec {
  SequenceSpec base;
  std::vector<double> v0;
  double delta = 0.5;
  AnnulusSchedule schedule = AnnulusSchedule::Dyadic;
  /// First annulus index; 0 selects 4 (dyadic) or the smallest feasible (factorial).
  int m0 = 0;
  /// V(eps) = C / eps^d for the thickness rule.
  double C = 1.0;
  /// Explicit schedule; overrides the rule when nonempty.
  std::vector<double> outer;
  std::vector<double> thickness;
  std::int64_t scan_cap = 1'000'000;

  void validate() const;
  nlohmann::json to_json() const;
  static PunctureSpec from_json(const nlohmann::json& j);
};

struct Annulus {
  int m;
  double outer;
  double thickness;
  double inner() const { return outer - thickness; }
};

class PuncturedSpiral : public PointSource {
 public:
  /// Materializes annuli until the outer radius exceeds working_radius.
  PuncturedSpiral(PunctureSpec spec, double working_radius);

  int d() const override { return base_.d(); }
  void fill(std::int64_t n_lo, std::int64_t n_hi, double* out) const override;
  nlohmann::json describe() const override { return spec_.to_json(); }

  const PunctureSpec& spec() const { return spec_; }
  const std::vector<Annulus>& annuli() const { return annuli_; }
  double working_radius() const { return working_radius_; }
  bool in_annuli(double r) const;
  bool in_region(std::span<const double> p) const;
  /// Base point index m used for n: n itself when the base point is outside D.
  std::int64_t replacement_index(std::int64_t n) const;
  SpiralPoint transform(std::int64_t n) const;

 private:
  std::int64_t redirect(std::int64_t n, double r, double* out) const;

  PunctureSpec spec_;
  Sequence base_;
  std::vector<double> v0_;
  std::vector<Annulus> annuli_;
  double working_radius_;
};

/// Annulus schedule of a spec up to (and including the first beyond) max_radius.
std::vector<Annulus> annulus_schedule(const PunctureSpec& spec, double max_radius);

SpiralPoint puncture_transform(const PunctureSpec& spec, std::int64_t n);

// Point dumps. Binary: int64 d, n_lo, n_hi, then (d+1) doubles per point.
void write_binary_dump(const std::string& path, const PointChunk& chunk);
PointChunk read_binary_dump(const std::string& path);
void write_csv(std::ostream& os, const PointChunk& chunk);

}  // namespace spiral
