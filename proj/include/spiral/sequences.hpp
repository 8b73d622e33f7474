#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spiral/sphere_geom.hpp"

namespace spiral {

enum class SequenceKind { GoldenAngle, RationalLadder, FibonacciSphere, Constant, File };

std::string to_string(SequenceKind kind);
SequenceKind parse_sequence_kind(const std::string& name);

/// Description of a spherical sequence (u_n). Serializes to {kind, d, params}.
struct SequenceSpec {
  SequenceKind kind = SequenceKind::GoldenAngle;
  int d = 1;
  /// Rotation number for golden-angle. Either a decimal or one of the
  /// symbolic constants accepted by parse_real_constant ("phi", "sqrt2", ...),
  /// which are then evaluated beyond double precision.
  std::string theta = "phi";
  std::vector<double> v;  ///< constant direction
  std::string path;       ///< file kind

  static SequenceSpec golden_angle(std::string theta = "phi");
  static SequenceSpec rational_ladder();
  static SequenceSpec fibonacci_sphere();
  static SequenceSpec constant(const UnitVector& v);
  static SequenceSpec file(std::string path, int d);

  /// Throws ArgumentError when kind and d are incompatible.
  void validate() const;

  nlohmann::json to_json() const;
  static SequenceSpec from_json(const nlohmann::json& j);
};

/// n = k(k+1)/2 + p with k >= 1, 0 <= p <= k.
struct TriangularDecomposition {
  std::int64_t k;
  std::int64_t p;
};

TriangularDecomposition triangular_decompose(std::int64_t n);

/// theta split as hi + lo with |lo| <= ulp(hi)/2.
struct SplitReal {
  double hi = 0.0;
  double lo = 0.0;
};

/// Parses a decimal literal or a named constant (phi, sqrt2, sqrt3, sqrt5, e, pi,
/// optionally with a leading '-' or in the form "name-1", e.g. "sqrt2-1").
SplitReal parse_real_constant(const std::string& text);

/// frac(n * theta) in [0, 1), evaluated with an exact two-product so the
/// result carries no error from the size of n.
double fractional_product(std::int64_t n, SplitReal theta);

/// Compiled, read-only form of a SequenceSpec. File-backed data is loaded once.
class Sequence {
 public:
  explicit Sequence(SequenceSpec spec);

  const SequenceSpec& spec() const { return spec_; }
  int d() const { return spec_.d; }
  std::size_t dim() const { return static_cast<std::size_t>(spec_.d) + 1; }
  /// Number of stored terms for file kind, nullopt for infinite sequences.
  std::optional<std::int64_t> length() const;

  UnitVector term(std::int64_t n) const;
  /// Writes u_n into out[0..d]; the allocation-free path used by generators.
  void term_into(std::int64_t n, double* out) const;

 private:
  SequenceSpec spec_;
  SplitReal theta_;
  std::vector<double> data_;  // constant vector or file rows
};

UnitVector sequence_term(const SequenceSpec& spec, std::int64_t n);

}  // namespace spiral
