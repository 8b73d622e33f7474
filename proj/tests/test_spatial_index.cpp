#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "spiral/errors.hpp"
#include "spiral/rng.hpp"
#include "spiral/spatial_index.hpp"

using namespace spiral;

namespace {

std::vector<double> pt(double x, double y) { return {x, y}; }

struct Brute {
  const PointChunk& c;

  std::vector<std::int64_t> within(std::span<const double> a, std::span<const double> b, double eps) const {
    std::vector<std::int64_t> out;
    for (std::int64_t i = 0; i < c.size(); ++i) {
      if (oracle::segment_dist(c.point(i), a, b) <= eps) out.push_back(c.n_lo + i);
    }
    return out;
  }

  std::pair<std::int64_t, long double> nearest(std::span<const double> x) const {
    std::int64_t best = 0;
    long double bd = 1e300L;
    for (std::int64_t i = 0; i < c.size(); ++i) {
      const long double d = oracle::dist(c.point(i), x);
      if (d < bd) {
        bd = d;
        best = c.n_lo + i;
      }
    }
    return {best, bd};
  }
};

std::vector<std::int64_t> ids_of(const std::vector<HitWitness>& hs) {
  std::vector<std::int64_t> out;
  for (const auto& h : hs) out.push_back(h.n);
  return out;
}

// Pairs whose exact distance sits within rounding of eps may legitimately
// differ; count only clear disagreements.
std::int64_t mismatches(const std::vector<std::int64_t>& got, const std::vector<std::int64_t>& want,
                        const PointChunk& c, std::span<const double> a, std::span<const double> b, double eps) {
  std::vector<std::int64_t> diff;
  std::set_symmetric_difference(got.begin(), got.end(), want.begin(), want.end(), std::back_inserter(diff));
  std::int64_t bad = 0;
  for (std::int64_t n : diff) {
    const long double d = oracle::segment_dist(c.point(n - c.n_lo), a, b);
    if (std::abs(d - eps) > 1e-12L * std::max<long double>(1, d)) ++bad;
  }
  return bad;
}

}  // namespace

TEST_SUITE("spatial-index") {
  TEST_CASE("empty input is rejected") {
    CHECK_THROWS_AS(ShellIndex(1, {}, {}), ArgumentError);
  }

  TEST_CASE("one point is the nearest of anything") {
    const ShellIndex idx(1, {7}, {3.0, -4.0});
    for (const auto& q : {pt(0, 0), pt(100, 100), pt(3, -4), pt(-1e6, 5)}) {
      const auto h = idx.nearest(q);
      REQUIRE(h.has_value());
      CHECK(h->n == 7);
    }
  }

  TEST_CASE("Lambda nearest to (1.01, 0) is n = 1") {
    const SpiralSet lam(SequenceSpec::rational_ladder());
    const PointChunk c = generate_chunk(lam, 1, 10000);
    const ShellIndex idx = ShellIndex::from_chunk(c);
    const auto h = idx.nearest(pt(1.01, 0));
    REQUIRE(h.has_value());
    CHECK(h->n == 1);
    CHECK(h->n == Brute{c}.nearest(pt(1.01, 0)).first);
  }

  TEST_CASE("queries agree with an exhaustive scan over 10^5 points") {
    const SpiralSet gold(SequenceSpec::golden_angle());
    const PointChunk c = generate_chunk(gold, 1, 100000);
    const ShellIndex idx = ShellIndex::from_chunk(c);
    const Brute brute{c};
    Rng rng(2024);
    std::int64_t bad_seg = 0, bad_ball = 0, bad_near = 0, bad_witness = 0;
    for (int q = 0; q < 1000; ++q) {
      const double R = 330.0;
      const auto a = pt(rng.uniform(-R, R), rng.uniform(-R, R));
      const double len = rng.uniform(0.0, 30.0);
      const double ang = rng.uniform(0.0, 2 * std::numbers::pi);
      const auto b = pt(a[0] + len * std::cos(ang), a[1] + len * std::sin(ang));
      const double eps = rng.uniform(0.01, 1.5);

      const auto hits = idx.within_segment(a, b, eps);
      bad_seg += mismatches(ids_of(hits), brute.within(a, b, eps), c, a, b, eps);
      for (const auto& h : hits) {
        const auto p = c.point(h.n - 1);
        const double t_ref = [&] {
          double t = 0;
          segment_distance(p, a, b, &t);
          return t;
        }();
        if (std::abs(h.distance - static_cast<double>(oracle::segment_dist(p, a, b))) > 1e-9 ||
            std::abs(h.t - t_ref) > 1e-9 || h.t < -1e-12 || h.t > len + 1e-9) {
          ++bad_witness;
        }
      }

      const auto ball = idx.within_ball(a, eps);
      bad_ball += mismatches(ids_of(ball), brute.within(a, a, eps), c, a, a, eps);

      const auto near = idx.nearest(a);
      const auto [bn, bd] = brute.nearest(a);
      if (!near || (near->n != bn && std::abs(near->distance - static_cast<double>(bd)) > 1e-12)) ++bad_near;
    }
    CHECK(bad_seg == 0);
    CHECK(bad_ball == 0);
    CHECK(bad_near == 0);
    CHECK(bad_witness == 0);
  }

  TEST_CASE("nearest with exclusion skips the query point itself") {
    const SpiralSet lam(SequenceSpec::rational_ladder());
    const PointChunk c = generate_chunk(lam, 1, 20000);
    const ShellIndex idx = ShellIndex::from_chunk(c);
    for (std::int64_t n : {1LL, 50LL, 777LL, 19999LL}) {
      const auto p = c.point(n - 1);
      const auto h = idx.nearest(p, 1e-12);
      REQUIRE(h.has_value());
      CHECK(h->n != n);
      long double bd = 1e300L;
      for (std::int64_t i = 0; i < c.size(); ++i) {
        if (i == n - 1) continue;
        bd = std::min(bd, oracle::dist(c.point(i), p));
      }
      CHECK(h->distance == doctest::Approx(static_cast<double>(bd)).epsilon(1e-12));
    }
  }

  TEST_CASE("a point on the segment is a witness at distance zero") {
    const SpiralSet lam(SequenceSpec::rational_ladder());
    const ShellIndex idx = ShellIndex::from_chunk(generate_chunk(lam, 1, 1000));
    const auto hits = idx.within_segment(pt(0, 0), pt(2, 0), 0.1);
    const auto it = std::find_if(hits.begin(), hits.end(), [](const HitWitness& h) { return h.n == 1; });
    REQUIRE(it != hits.end());
    CHECK(it->t == 1.0);
    CHECK(it->distance == 0.0);
  }

  TEST_CASE("a segment inside the Lambda vacant strip has no hits") {
    const SpiralSet lam(SequenceSpec::rational_ladder());
    const PointChunk c = generate_chunk(lam, 1, 1'000'000);
    const ShellIndex idx = ShellIndex::from_chunk(c);
    CHECK(idx.within_segment(pt(10, 1), pt(20, 1), 0.5).empty());
    CHECK(Brute{c}.within(pt(10, 1), pt(20, 1), 0.5).empty());
  }

  TEST_CASE("every stored point is in its bucket; cells respect the resolution bound") {
    for (int d : {1, 2}) {
      const SpiralSet src(d == 1 ? SequenceSpec::golden_angle() : SequenceSpec::fibonacci_sphere());
      const ShellIndex idx = ShellIndex::from_chunk(generate_chunk(src, 1, 30000));
      std::int64_t missing = 0;
      std::int64_t total = 0;
      for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto [s, key] = idx.bucket_of(i);
        const auto members = idx.bucket_members(s, key);
        if (std::find(members.begin(), members.end(), i) == members.end()) ++missing;
        CHECK(idx.locate(idx.point(i)) == std::make_pair(s, key));
      }
      // Bucket diameters: the largest pairwise distance inside any bucket.
      double worst = 0.0;
      for (std::size_t i = 0; i < idx.size(); i += 7) {
        const auto [s, key] = idx.bucket_of(i);
        for (std::size_t j : idx.bucket_members(s, key)) {
          worst = std::max(worst, static_cast<double>(oracle::dist(idx.point(i), idx.point(j))));
          ++total;
        }
      }
      CHECK(missing == 0);
      CHECK(total > 0);
      CHECK(worst <= idx.resolution_bound());
      CHECK(idx.radially_ordered());
    }
  }

  TEST_CASE("segment queries over 10^7 points touch only buckets near the tube") {
    const SpiralSet gold(SequenceSpec::golden_angle());
    const ShellIndex idx = ShellIndex::from_chunk(generate_chunk(gold, 1, 10'000'000));
    const double w = idx.shell_width();
    const double cell_area = w * w;
    const double D = idx.resolution_bound();
    Rng rng(17);
    double worst_ratio = 0.0;
    for (int q = 0; q < 200; ++q) {
      const double R = 3000.0;
      const double r0 = rng.uniform(100.0, R);
      const double a0 = rng.uniform(0.0, 2 * std::numbers::pi);
      const auto a = pt(r0 * std::cos(a0), r0 * std::sin(a0));
      const double len = rng.uniform(1.0, 200.0);
      const double ang = rng.uniform(0.0, 2 * std::numbers::pi);
      const auto b = pt(a[0] + len * std::cos(ang), a[1] + len * std::sin(ang));
      const double eps = rng.uniform(0.05, 1.0);
      QueryStats st;
      (void)idx.within_segment(a, b, eps, &st);
      // Buckets meeting the tube lie inside the tube widened by one bucket diameter.
      const double reach = eps + D;
      const double area = (len + 2 * reach) * 2 * reach;
      worst_ratio = std::max(worst_ratio, static_cast<double>(st.buckets) / (area / cell_area));
    }
    MESSAGE("worst visited-bucket ratio " << worst_ratio);
    CHECK(worst_ratio <= 4.0);
  }

  TEST_CASE("index_ball enforces the budget") {
    const SpiralSet gold(SequenceSpec::golden_angle());
    CHECK_THROWS_AS(index_ball(gold, 1e4, 1000), BudgetExceeded);
    const ShellIndex idx = index_ball(gold, 50.0);
    CHECK(idx.size() == 2500);
    CHECK(idx.coverage_radius() >= 50.0);
  }
}
