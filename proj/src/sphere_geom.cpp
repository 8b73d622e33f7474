#include "spiral/sphere_geom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

#include "spiral/rng.hpp"

namespace spiral {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_same_dim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ArgumentError("dimension mismatch: " + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()));
  }
}

}  // namespace

UnitVector::UnitVector(std::vector<double> coords) : coords_(std::move(coords)) {
  if (coords_.size() < 2) throw ArgumentError("unit vectors need at least 2 coordinates");
  const double n = norm(coords_);
  if (!(n > 0.0) || !std::isfinite(n)) throw ArgumentError("cannot normalize a zero or non-finite vector");
  for (double& c : coords_) c /= n;
}

UnitVector UnitVector::from_angle(double radians) {
  return UnitVector({std::cos(radians), std::sin(radians)}, Trusted{});
}

UnitVector UnitVector::axis(std::size_t dim, std::size_t i, bool negative) {
  if (dim < 2 || i >= dim) throw ArgumentError("invalid axis");
  std::vector<double> c(dim, 0.0);
  c[i] = negative ? -1.0 : 1.0;
  return UnitVector(std::move(c), Trusted{});
}

UnitVector UnitVector::from_unit(std::span<const double> coords) {
  if (coords.size() < 2) throw ArgumentError("unit vectors need at least 2 coordinates");
  const double n = norm(coords);
  if (std::abs(n - 1.0) > 1e-12) return UnitVector(std::vector<double>(coords.begin(), coords.end()));
  return UnitVector(std::vector<double>(coords.begin(), coords.end()), Trusted{});
}

double UnitVector::dot(const UnitVector& other) const {
  require_same_dim(coords_, other.coords_);
  return spiral::dot(coords_, other.coords_);
}

UnitVector UnitVector::operator-() const {
  std::vector<double> c = coords_;
  for (double& x : c) x = -x;
  return UnitVector(std::move(c), Trusted{});
}

SphericalCap::SphericalCap(UnitVector c, double r) : center(std::move(c)), radius(r) {
  if (!(radius >= 0.0) || radius > std::numbers::pi) {
    throw ArgumentError("cap radius must lie in [0, pi]");
  }
}

bool SphericalCap::contains(std::span<const double> u) const {
  return geodesic_distance(center.coords(), u) <= radius;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) {
  // Scaled to avoid overflow for large radii.
  double scale = 0.0;
  for (double x : a) scale = std::max(scale, std::abs(x));
  if (scale == 0.0 || !std::isfinite(scale)) return scale;
  double s = 0.0;
  for (double x : a) {
    const double y = x / scale;
    s += y * y;
  }
  return scale * std::sqrt(s);
}

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  return std::sqrt(s);
}

double geodesic_distance(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double m = a[i] - b[i];
    const double p = a[i] + b[i];
    diff += m * m;
    sum += p * p;
  }
  return 2.0 * std::atan2(std::sqrt(diff), std::sqrt(sum));
}

double geodesic_distance(const UnitVector& a, const UnitVector& b) {
  require_same_dim(a.coords(), b.coords());
  return geodesic_distance(a.coords(), b.coords());
}

double polar_distance(double r, const UnitVector& a, double rho, const UnitVector& b) {
  require_same_dim(a.coords(), b.coords());
  if (!std::isfinite(r) || !std::isfinite(rho) || r < 0.0 || rho < 0.0) {
    throw ArgumentError("polar_distance needs finite non-negative radii");
  }
  // r^2 + rho^2 - 2 r rho cos(theta) rewritten as (r - rho)^2 + 4 r rho sin^2(theta/2)
  // to avoid cancellation when the two points nearly coincide.
  const double theta = geodesic_distance(a, b);
  const double s = std::sin(0.5 * theta);
  const double dr = r - rho;
  return std::sqrt(dr * dr + 4.0 * r * rho * s * s);
}

UnitVector random_unit_vector(int d, Rng& rng) {
  if (d < 1) throw ArgumentError("sphere dimension must be >= 1");
  std::vector<double> c(static_cast<std::size_t>(d) + 1);
  for (;;) {
    for (double& x : c) x = rng.normal();
    if (norm(c) > 1e-300) return UnitVector(c);
  }
}

DirectionNet::DirectionNet(int d, double mesh, std::uint64_t seed, std::vector<double> centers)
    : d_(d), mesh_(mesh), seed_(seed), centers_(std::move(centers)) {
  if (d_ < 1) throw ArgumentError("sphere dimension must be >= 1");
  if (centers_.empty() || centers_.size() % dim() != 0) throw ArgumentError("malformed net centers");
}

double DirectionNet::count_constant() const {
  return static_cast<double>(size()) * std::pow(mesh_, d_);
}

double net_count_bound(int d) {
  if (d == 1) return kTwoPi;
  // Centers are pairwise more than 3*mesh/4 apart, so caps of radius 3*mesh/8
  // are disjoint: count <= area(S^d) / area(cap(3 mesh / 8)). For small radii
  // area(cap(r)) >= vol(B^d) * (2 r / pi)^d * ... ; we use the cruder
  // area(cap(r)) >= vol(B^d) * (sin r)^d and sin r >= 2r/pi on [0, pi/2].
  const double dd = d;
  const double sphere_area = 2.0 * std::pow(std::numbers::pi, (dd + 1) / 2) / std::tgamma((dd + 1) / 2);
  const double ball_vol = std::pow(std::numbers::pi, dd / 2) / std::tgamma(dd / 2 + 1);
  return sphere_area / (ball_vol * std::pow(2.0 / std::numbers::pi * 3.0 / 8.0, dd));
}

namespace {

DirectionNet circle_net(double mesh, std::uint64_t seed) {
  const auto count = static_cast<std::size_t>(std::max(2.0, std::floor(kTwoPi / mesh)));
  std::vector<double> c;
  c.reserve(2 * count);
  for (std::size_t j = 0; j < count; ++j) {
    // Exact quadrant points when count is a multiple of 4.
    const double a = kTwoPi * static_cast<double>(j) / static_cast<double>(count);
    if (4 * j % count == 0) {
      const std::size_t q = 4 * j / count;
      const double xs[4] = {1.0, 0.0, -1.0, 0.0};
      const double ys[4] = {0.0, 1.0, 0.0, -1.0};
      c.push_back(xs[q]);
      c.push_back(ys[q]);
    } else {
      c.push_back(std::cos(a));
      c.push_back(std::sin(a));
    }
  }
  return DirectionNet(1, mesh, seed, std::move(c));
}

struct CellKeyHash {
  std::size_t operator()(const std::vector<std::int64_t>& k) const {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (auto v : k) {
      h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

DirectionNet greedy_net(int d, double mesh, std::uint64_t seed) {
  const std::size_t dim = static_cast<std::size_t>(d) + 1;
  // Candidate grid on the faces of [-1,1]^{d+1}; radial projection onto the
  // sphere is 1-Lipschitz from outside the ball, so the candidates cover S^d
  // within chord g*sqrt(d)/2, i.e. geodesic eta = 2 asin(g sqrt(d) / 4).
  const double eta = mesh / 4.0;
  const double g = 4.0 * std::sin(eta / 2.0) / std::sqrt(static_cast<double>(d));
  const auto m = static_cast<std::int64_t>(std::ceil(2.0 / g));
  const double step = 2.0 / static_cast<double>(m);
  double per_face = 1.0;
  for (int i = 0; i < d; ++i) per_face *= static_cast<double>(m);
  const double total = per_face * 2.0 * static_cast<double>(dim);
  if (total > 5e7) throw ArgumentError("direction net too fine for this dimension (candidate grid too large)");
  const auto n_per_face = static_cast<std::uint64_t>(per_face);
  const auto n_total = static_cast<std::uint64_t>(total);

  auto candidate = [&](std::uint64_t id, std::vector<double>& out) {
    const std::uint64_t face = id / n_per_face;
    std::uint64_t rest = id % n_per_face;
    const std::size_t axis = face / 2;
    const bool negative = face % 2 == 1;
    std::size_t k = 0;
    for (std::size_t i = 0; i < dim; ++i) {
      if (i == axis) {
        out[i] = negative ? -1.0 : 1.0;
      } else {
        const auto j = static_cast<std::int64_t>(rest % static_cast<std::uint64_t>(m));
        rest /= static_cast<std::uint64_t>(m);
        out[i] = -1.0 + (static_cast<double>(j) + 0.5) * step;
        ++k;
      }
    }
    const double n = norm(out);
    for (double& x : out) x /= n;
  };

  // Seeded visiting order (Fisher-Yates with our own bounded integers).
  std::vector<std::uint64_t> order(n_total);
  for (std::uint64_t i = 0; i < n_total; ++i) order[i] = i;
  Rng rng(seed);
  for (std::uint64_t i = n_total; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  const double accept = mesh - eta;  // centers pairwise farther than this
  const double accept_chord = 2.0 * std::sin(accept / 2.0);
  const double cell = accept_chord;
  std::unordered_map<std::vector<std::int64_t>, std::vector<std::size_t>, CellKeyHash> grid;
  std::vector<double> centers;
  std::vector<double> u(dim);
  std::vector<std::int64_t> key(dim);
  std::vector<std::int64_t> probe(dim);

  for (std::uint64_t id : order) {
    candidate(id, u);
    for (std::size_t i = 0; i < dim; ++i) key[i] = static_cast<std::int64_t>(std::floor(u[i] / cell));
    bool blocked = false;
    // Visit the 3^{d+1} neighboring cells.
    std::vector<int> off(dim, -1);
    for (;;) {
      for (std::size_t i = 0; i < dim; ++i) probe[i] = key[i] + off[i];
      if (auto it = grid.find(probe); it != grid.end()) {
        for (std::size_t c : it->second) {
          const std::span<const double> cc(centers.data() + c * dim, dim);
          if (distance(cc, u) <= accept_chord) {
            blocked = true;
            break;
          }
        }
      }
      if (blocked) break;
      std::size_t i = 0;
      while (i < dim && off[i] == 1) off[i++] = -1;
      if (i == dim) break;
      ++off[i];
    }
    if (blocked) continue;
    grid[key].push_back(centers.size() / dim);
    centers.insert(centers.end(), u.begin(), u.end());
  }
  return DirectionNet(d, mesh, seed, std::move(centers));
}

}  // namespace

DirectionNet build_direction_net(int d, double mesh, std::uint64_t seed) {
  if (d < 1) throw ArgumentError("sphere dimension must be >= 1");
  if (!(mesh > 0.0)) throw ArgumentError("net mesh must be positive");
  if (mesh > std::numbers::pi) throw ArgumentError("net mesh must not exceed pi");
  if (d == 1) return circle_net(mesh, seed);
  return greedy_net(d, mesh, seed);
}

}  // namespace spiral
