#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "spiral/errors.hpp"

namespace spiral {

class Rng;

/// A point of S^d embedded in R^{d+1}. The constructor normalizes.
class UnitVector {
 public:
  explicit UnitVector(std::vector<double> coords);
  UnitVector(std::initializer_list<double> coords) : UnitVector(std::vector<double>(coords)) {}

  static UnitVector from_angle(double radians);
  static UnitVector axis(std::size_t dim, std::size_t i, bool negative = false);
  /// Wraps coordinates that are already unit length (checked to 1e-12).
  static UnitVector from_unit(std::span<const double> coords);

  std::size_t dim() const { return coords_.size(); }
  int sphere_dim() const { return static_cast<int>(coords_.size()) - 1; }
  std::span<const double> coords() const { return coords_; }
  double operator[](std::size_t i) const { return coords_[i]; }
  double dot(const UnitVector& other) const;
  UnitVector operator-() const;

  friend bool operator==(const UnitVector&, const UnitVector&) = default;

 private:
  struct Trusted {};
  UnitVector(std::vector<double> coords, Trusted) : coords_(std::move(coords)) {}
  std::vector<double> coords_;
};

/// Cap on S^d; radius is geodesic, in radians.
struct SphericalCap {
  SphericalCap(UnitVector center, double radius);
  bool contains(std::span<const double> u) const;

  UnitVector center;
  double radius;
};

// Small helpers on raw coordinate spans; callers guarantee equal lengths.
double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
double distance(std::span<const double> a, std::span<const double> b);

/// Geodesic distance in radians between unit vectors given as raw spans.
/// Uses 2*atan2(|a-b|, |a+b|), which equals arccos(<a,b>) clamped to [-1, 1]
/// but keeps full relative precision for nearly equal or antipodal inputs.
double geodesic_distance(std::span<const double> a, std::span<const double> b);
double geodesic_distance(const UnitVector& a, const UnitVector& b);

/// Euclidean distance between r*a and rho*b evaluated in polar form.
double polar_distance(double r, const UnitVector& a, double rho, const UnitVector& b);

/// Uniformly distributed direction on S^d.
UnitVector random_unit_vector(int d, Rng& rng);

inline constexpr std::uint64_t kDefaultNetSeed = 0x5eedULL;

/// Finite covering of S^d: every unit vector lies within geodesic distance
/// `mesh` of some center. Centers are stored flat, (d+1) doubles each.
class DirectionNet {
 public:
  DirectionNet(int d, double mesh, std::uint64_t seed, std::vector<double> centers);

  int sphere_dim() const { return d_; }
  std::size_t dim() const { return static_cast<std::size_t>(d_) + 1; }
  double mesh() const { return mesh_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t size() const { return centers_.size() / dim(); }
  std::span<const double> center(std::size_t i) const {
    return std::span<const double>(centers_).subspan(i * dim(), dim());
  }
  UnitVector center_vector(std::size_t i) const { return UnitVector::from_unit(center(i)); }

  /// size() * mesh^d: the empirical counterpart of the packing constant.
  double count_constant() const;

 private:
  int d_;
  double mesh_;
  std::uint64_t seed_;
  std::vector<double> centers_;
};

/// Upper bound C_net with size() <= C_net * mesh^{-d} for nets produced by
/// build_direction_net.
double net_count_bound(int d);

/// d = 1: floor(2*pi/mesh) equally spaced angles starting at 0 (a maximal
/// packing with gap >= mesh, hence covering radius <= mesh/2).
/// d >= 2: greedy maximal packing over a seeded-order cube-map candidate grid.
DirectionNet build_direction_net(int d, double mesh, std::uint64_t seed = kDefaultNetSeed);

}  // namespace spiral
