#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "spiral/errors.hpp"
#include "spiral/rng.hpp"
#include "spiral/sphere_geom.hpp"

using namespace spiral;

namespace {

constexpr double kPi = std::numbers::pi;

UnitVector e(std::size_t dim, std::size_t i) { return UnitVector::axis(dim, i); }

double chord(const UnitVector& a, const UnitVector& b) { return distance(a.coords(), b.coords()); }

}  // namespace

TEST_SUITE("sphere-geom") {
  TEST_CASE("unit vectors normalize and reject degenerate input") {
    const UnitVector u({3.0, 4.0});
    CHECK(std::abs(norm(u.coords()) - 1.0) <= 1e-12);
    CHECK(u[0] == doctest::Approx(0.6).epsilon(1e-15));
    Rng rng(11);
    for (int i = 0; i < 1000; ++i) {
      std::vector<double> v(3);
      for (double& x : v) x = rng.uniform(-1e6, 1e6);
      CHECK(std::abs(norm(UnitVector(v).coords()) - 1.0) <= 1e-12);
    }
    CHECK_THROWS_AS(UnitVector({1.0}), ArgumentError);
    CHECK_THROWS_AS(UnitVector({0.0, 0.0}), ArgumentError);
  }

  TEST_CASE("geodesic distance examples") {
    const auto e1 = e(2, 0);
    const auto e2 = e(2, 1);
    CHECK(geodesic_distance(e1, e1) == 0.0);
    CHECK(geodesic_distance(e1, -e1) == doctest::Approx(kPi).epsilon(1e-15));
    CHECK(geodesic_distance(e1, e2) == doctest::Approx(kPi / 2).epsilon(1e-15));
    CHECK_THROWS_AS(geodesic_distance(e(2, 0), e(3, 0)), ArgumentError);
  }

  TEST_CASE("geodesic distance is accurate for nearly equal vectors") {
    // arccos loses half the digits near 0; the angle here is 1e-9 exactly
    // up to rounding of the inputs.
    const UnitVector a = UnitVector::from_angle(0.3);
    const UnitVector b = UnitVector::from_angle(0.3 + 1e-9);
    CHECK(geodesic_distance(a, b) == doctest::Approx(1e-9).epsilon(1e-6));
  }

  TEST_CASE("polar distance examples") {
    CHECK(polar_distance(1, e(2, 0), 1, e(2, 0)) == 0.0);
    CHECK(polar_distance(1, e(2, 0), 2, e(2, 0)) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(polar_distance(1, e(2, 0), 1, e(2, 1)) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK_THROWS_AS(polar_distance(-1, e(2, 0), 1, e(2, 0)), ArgumentError);
  }

  TEST_CASE("polar distance equals the Euclidean distance of the points") {
    Rng rng(5);
    for (int d : {1, 2, 3}) {
      for (int i = 0; i < 10000; ++i) {
        const UnitVector a = random_unit_vector(d, rng);
        const UnitVector b = random_unit_vector(d, rng);
        const double r = rng.uniform(0.0, 1000.0);
        const double rho = rng.uniform(0.0, 1000.0);
        std::vector<double> p(a.dim()), q(a.dim());
        for (std::size_t k = 0; k < a.dim(); ++k) {
          p[k] = r * a[k];
          q[k] = rho * b[k];
        }
        const double ref = static_cast<double>(oracle::dist(p, q));
        const double got = polar_distance(r, a, rho, b);
        CHECK(std::abs(got - ref) <= 1e-10 * std::max(ref, 1e-3 * (r + rho)) + 1e-300);
      }
    }
  }

  TEST_CASE("polar distance comparability with |r - rho| + sqrt(r rho) |a - b|") {
    Rng rng(6);
    double lo = 1e300, hi = 0.0;
    for (double s : {1.0, 10.0, 1000.0}) {
      for (int i = 0; i < 10000; ++i) {
        const int d = 1 + static_cast<int>(rng.below(3));
        const UnitVector a = random_unit_vector(d, rng);
        const UnitVector b = random_unit_vector(d, rng);
        const double r = rng.uniform(0.5, 2.0) * s;
        const double rho = rng.uniform(0.5, 2.0) * s;
        const double ratio = polar_distance(r, a, rho, b) / (std::abs(r - rho) + std::sqrt(r * rho) * chord(a, b));
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
      }
    }
    CHECK(lo >= 0.25);
    CHECK(hi <= 4.0);
  }

  TEST_CASE("chordal and geodesic distances are comparable; triangle inequality") {
    Rng rng(7);
    for (int i = 0; i < 10000; ++i) {
      const int d = 1 + static_cast<int>(rng.below(3));
      const UnitVector a = random_unit_vector(d, rng);
      const UnitVector b = random_unit_vector(d, rng);
      const UnitVector c = random_unit_vector(d, rng);
      const double g = geodesic_distance(a, b);
      CHECK(g >= 0.0);
      CHECK(g <= kPi);
      CHECK(g == geodesic_distance(b, a));
      CHECK(chord(a, b) <= g + 1e-15);
      CHECK(g <= kPi / 2 * chord(a, b) + 1e-15);
      CHECK(geodesic_distance(a, c) <= g + geodesic_distance(b, c) + 1e-9);
    }
  }

  TEST_CASE("spherical caps") {
    const SphericalCap cap(e(3, 2), 0.5);
    CHECK(cap.contains(e(3, 2).coords()));
    CHECK_FALSE(cap.contains(e(3, 0).coords()));
    CHECK_THROWS_AS(SphericalCap(e(2, 0), -0.1), ArgumentError);
    CHECK_THROWS_AS(SphericalCap(e(2, 0), 4.0), ArgumentError);
  }

  TEST_CASE("circle nets") {
    const DirectionNet quarter = build_direction_net(1, kPi / 2);
    CHECK(quarter.size() == 4);
    CHECK(static_cast<double>(quarter.size()) <= net_count_bound(1) / (kPi / 2));
    // Quadrant points are exact.
    CHECK(quarter.center(1)[0] == 0.0);
    CHECK(quarter.center(1)[1] == 1.0);
    CHECK(quarter.center(2)[0] == -1.0);

    const DirectionNet fine = build_direction_net(1, 0.01);
    CHECK(static_cast<double>(fine.size()) >= kPi / 0.01);
    CHECK(static_cast<double>(fine.size()) <= 2 * kPi / 0.01);
    std::vector<long double> angles;
    for (std::size_t i = 0; i < fine.size(); ++i) angles.push_back(std::atan2(fine.center(i)[1], fine.center(i)[0]));
    CHECK(oracle::circle_covering(angles) <= 0.01);

    CHECK_THROWS_AS(build_direction_net(1, 0.0), ArgumentError);
    CHECK_THROWS_AS(build_direction_net(1, -1.0), ArgumentError);
  }

  TEST_CASE("sphere net covers random directions and respects the count bound") {
    const double delta = 0.2;
    const DirectionNet net = build_direction_net(2, delta);
    CHECK(net.seed() == kDefaultNetSeed);
    CHECK(static_cast<double>(net.size()) <= net_count_bound(2) / (delta * delta));
    CHECK(net.count_constant() <= net_count_bound(2));
    Rng rng(99);
    double worst = 0.0;
    for (int i = 0; i < 100000; ++i) {
      const UnitVector u = random_unit_vector(2, rng);
      double best = 10.0;
      for (std::size_t k = 0; k < net.size(); ++k) best = std::min(best, geodesic_distance(u.coords(), net.center(k)));
      worst = std::max(worst, best);
    }
    CHECK(worst <= delta);
  }

  TEST_CASE("nets are deterministic for a seed") {
    const DirectionNet a = build_direction_net(2, 0.3, 42);
    const DirectionNet b = build_direction_net(2, 0.3, 42);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a.center(i)[0] == b.center(i)[0]);
      CHECK(a.center(i)[2] == b.center(i)[2]);
    }
  }
}
