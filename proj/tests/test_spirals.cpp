#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "oracles.hpp"
#include "spiral/errors.hpp"
#include "spiral/rng.hpp"
#include "spiral/spirals.hpp"

using namespace spiral;

namespace {

// Distance from p to the ray {t v : t >= 0}, written out independently.
double ray_dist(const std::vector<double>& p, const std::vector<double>& v) {
  const double t = std::max(0.0, p[0] * v[0] + p[1] * v[1]);
  return std::hypot(p[0] - t * v[0], p[1] - t * v[1]);
}

}  // namespace

TEST_SUITE("spirals") {
  TEST_CASE("radius satisfies radius^(d+1) = n") {
    for (int d = 1; d <= 4; ++d) {
      for (std::int64_t n : {1LL, 2LL, 3LL, 26LL, 27LL, 28LL, 1000LL, 999'999LL, 123'456'789LL, 1'000'000'000'000LL,
                             4'000'000'000'000'000LL}) {
        const double r = spiral_radius(n, d);
        const long double back = std::pow(static_cast<long double>(r), d + 1);
        CHECK(std::abs(back - n) <= 1e-9L * n);
      }
    }
    CHECK(spiral_radius(27, 2) == 3.0);
    CHECK(spiral_radius(100, 1) == 10.0);
    CHECK_THROWS_AS(spiral_radius(0, 1), ArgumentError);
  }

  TEST_CASE("spiral point examples") {
    const auto lam = SequenceSpec::rational_ladder();
    const auto p1 = spiral_point(lam, 1).cartesian();
    CHECK(p1[0] == 1.0);
    CHECK(p1[1] == 0.0);
    const auto p4 = spiral_point(lam, 4).cartesian();
    CHECK(p4[0] == -2.0);
    CHECK(p4[1] == 0.0);
    const SpiralPoint g = spiral_point(SequenceSpec::golden_angle(), 100);
    CHECK(g.radius == 10.0);
    const auto want = oracle::golden_point(100);
    const auto got = g.cartesian();
    CHECK(std::abs(got[0] - want[0]) <= 1e-13);
    CHECK(std::abs(got[1] - want[1]) <= 1e-13);
  }

  TEST_CASE("annulus index range examples") {
    auto r = annulus_index_range(1, 2, 1);
    CHECK(r.lo == 1);
    CHECK(r.hi == 4);
    r = annulus_index_range(0, 10, 1);
    CHECK(r.lo == 1);
    CHECK(r.hi == 100);
    r = annulus_index_range(3, 3, 2);
    CHECK(r.lo == 27);
    CHECK(r.hi == 27);
    CHECK_THROWS_AS(annulus_index_range(3, 2, 1), ArgumentError);
  }

  TEST_CASE("annulus index range agrees with a direct scan") {
    Rng rng(3);
    for (int trial = 0; trial < 300; ++trial) {
      const int d = 1 + static_cast<int>(rng.below(3));
      const double a = rng.uniform(0.0, 40.0) / d;
      const double b = a + rng.uniform(0.0, 10.0);
      const IndexRange got = annulus_index_range(a, b, d);
      std::int64_t lo = 0, hi = 0;
      const auto first = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::pow(a, d + 1)) - 5);
      const auto last = static_cast<std::int64_t>(std::pow(b, d + 1)) + 5;
      for (std::int64_t n = first; n <= last; ++n) {
        const long double rn = std::pow(static_cast<long double>(n), 1.0L / (d + 1));
        if (rn >= a && rn <= b) {
          if (lo == 0) lo = n;
          hi = n;
        }
      }
      if (lo == 0) {
        CHECK(got.lo > got.hi);
      } else {
        CHECK(got.lo == lo);
        CHECK(got.hi == hi);
      }
    }
  }

  TEST_CASE("finite density: exactly floor(T^(d+1)) points in B(0, T)") {
    for (int d : {1, 2}) {
      for (double T : {10.0, 30.0, 100.0}) {
        const IndexRange r = annulus_index_range(0.0, T, d);
        const auto expect = static_cast<std::int64_t>(std::floor(std::pow(T, d + 1) + 1e-9));
        CHECK(r.hi == expect);
        CHECK(static_cast<double>(r.hi) / std::pow(T, d + 1) <= 1.0);
      }
    }
  }

  TEST_CASE("chunk generation matches pointwise evaluation") {
    const SpiralSet src(SequenceSpec::golden_angle());
    const PointChunk c = generate_chunk(src, 5, 20004);
    CHECK(c.size() == 20000);
    CHECK(c.n_hi() == 20004);
    for (std::int64_t i = 0; i < c.size(); i += 997) {
      const auto want = spiral_point(SequenceSpec::golden_angle(), 5 + i).cartesian();
      CHECK(c.point(i)[0] == want[0]);
      CHECK(c.point(i)[1] == want[1]);
    }
    CHECK_THROWS_AS(generate_chunk(src, 0, 3), ArgumentError);
  }

  TEST_CASE("binary dump and CSV formats") {
    const SpiralSet src(SequenceSpec::fibonacci_sphere());
    const PointChunk c = generate_chunk(src, 3, 130);
    const std::string path = "/tmp/spiral_test_dump.bin";
    write_binary_dump(path, c);
    const PointChunk back = read_binary_dump(path);
    CHECK(back.d == 2);
    CHECK(back.n_lo == 3);
    CHECK(back.coords == c.coords);
    std::remove(path.c_str());

    std::ostringstream os;
    write_csv(os, c);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "n,x_0,x_1,x_2");
    std::size_t rows = 0;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 128);
    CHECK_THROWS_AS(read_binary_dump("/nonexistent.bin"), ArgumentError);
  }

  TEST_CASE("puncture spec validation and schedules") {
    PunctureSpec ps;
    ps.base = SequenceSpec::rational_ladder();
    ps.v0 = {0.0, 1.0};
    CHECK_NOTHROW(ps.validate());
    PunctureSpec bad = ps;
    bad.delta = 0;
    CHECK_THROWS_AS(bad.validate(), ArgumentError);
    bad = ps;
    bad.v0 = {1.0, 0.0, 0.0};
    CHECK_THROWS_AS(bad.validate(), ArgumentError);
    bad = ps;
    bad.outer = {10, 5};
    bad.thickness = {1, 1};
    CHECK_THROWS_AS(bad.validate(), ArgumentError);
    bad = ps;
    bad.outer = {10};
    bad.thickness = {11};
    CHECK_THROWS_AS(annulus_schedule(bad, 100), ArgumentError);

    const auto dy = annulus_schedule(ps, 1000);
    REQUIRE(!dy.empty());
    CHECK(dy.front().m == 4);
    for (const auto& a : dy) {
      CHECK(a.outer == std::ldexp(1.0, a.m));
      CHECK(a.thickness == doctest::Approx(2.0 * std::pow(2.0, a.m / 2.0)));
      CHECK(a.inner() > 0.0);
      CHECK(a.thickness / a.outer < 1.0);
    }
    CHECK(dy.back().outer > 1000);
    // Relative thickness shrinks, so the schedule's eps_m tends to 0.
    CHECK(dy.back().thickness / dy.back().outer < dy.front().thickness / dy.front().outer);

    PunctureSpec fact = ps;
    fact.schedule = AnnulusSchedule::Factorial;
    const auto fs = annulus_schedule(fact, 5000);
    for (const auto& a : fs) CHECK(a.inner() > 0.0);
    CHECK(fs.back().outer == 5040.0);
  }

  TEST_CASE("punctured rational ladder leaves the strip empty up to n = 10^6") {
    PunctureSpec ps;
    ps.base = SequenceSpec::rational_ladder();
    ps.v0 = {0.0, 1.0};
    ps.delta = 0.5;
    const double R = 1001.0;
    const PuncturedSpiral punct(ps, R);
    const SpiralSet base(ps.base);
    const std::int64_t N = 1'000'000;
    const PointChunk got = generate_chunk(punct, 1, N);
    const PointChunk raw = generate_chunk(base, 1, N);
    const auto& an = punct.annuli();
    auto in_annuli = [&](double r) {
      for (const auto& a : an) {
        if (r >= a.outer - a.thickness && r <= a.outer) return true;
      }
      return false;
    };
    std::int64_t inside = 0, changed_outside = 0, changed_on_annuli = 0, moved = 0, radius_changed = 0;
    for (std::int64_t i = 0; i < N; ++i) {
      const std::vector<double> p(got.point(i).begin(), got.point(i).end());
      const std::vector<double> q(raw.point(i).begin(), raw.point(i).end());
      const double rq = std::hypot(q[0], q[1]);
      const bool q_in_D = ray_dist(q, ps.v0) < ps.delta && !in_annuli(rq);
      const bool same = p == q;
      if (ray_dist(p, ps.v0) < ps.delta && !in_annuli(std::hypot(p[0], p[1]))) ++inside;
      if (!q_in_D && !same) ++changed_outside;
      if (in_annuli(rq) && !same) ++changed_on_annuli;
      if (!same) ++moved;
      if (std::abs(std::hypot(p[0], p[1]) - rq) > 1e-9 * rq) ++radius_changed;
    }
    CHECK(inside == 0);
    CHECK(changed_outside == 0);
    CHECK(changed_on_annuli == 0);
    CHECK(radius_changed == 0);
    CHECK(moved > 0);
  }

  TEST_CASE("punctured points use the first base direction outside the region") {
    PunctureSpec ps;
    ps.base = SequenceSpec::golden_angle();
    ps.v0 = {1.0, 0.0};
    ps.delta = 2.0;
    const PuncturedSpiral punct(ps, 200.0);
    const Sequence seq(ps.base);
    int checked = 0;
    for (std::int64_t n = 25; n <= 40000 && checked < 50; ++n) {
      const std::int64_t m = punct.replacement_index(n);
      if (m == n) continue;
      ++checked;
      const double r = spiral_radius(n, 1);
      for (std::int64_t j = 1; j < m; ++j) {
        const UnitVector u = seq.term(j);
        CHECK(punct.in_region(std::vector<double>{r * u[0], r * u[1]}));
      }
      const UnitVector u = seq.term(m);
      CHECK_FALSE(punct.in_region(std::vector<double>{r * u[0], r * u[1]}));
      CHECK(punct.transform(n).direction == u);
    }
    CHECK(checked == 50);
  }

  TEST_CASE("region membership is the Euclidean tube around the ray") {
    PunctureSpec ps;
    ps.base = SequenceSpec::golden_angle();
    ps.v0 = {0.0, 1.0};
    ps.delta = 0.5;
    ps.outer = {1e6};
    ps.thickness = {1.0};
    const PuncturedSpiral punct(ps, 100.0);
    // At radius r an angle of asin(delta / r) from the ray is the tube boundary.
    for (double r : {2.0, 10.0, 80.0}) {
      const double a = std::asin(0.5 / r);
      const double out = std::numbers::pi / 2 - a * 1.001;
      const double in = std::numbers::pi / 2 - a * 0.999;
      CHECK_FALSE(punct.in_region(std::vector<double>{r * std::cos(out), r * std::sin(out)}));
      CHECK(punct.in_region(std::vector<double>{r * std::cos(in), r * std::sin(in)}));
    }
    // The opposite ray is not part of the region.
    CHECK_FALSE(punct.in_region(std::vector<double>{0.0, -5.0}));
  }

  TEST_CASE("puncture scan cap failure names the index") {
    PunctureSpec ps;
    ps.base = SequenceSpec::constant(UnitVector({0.0, 1.0}));
    ps.v0 = {0.0, 1.0};
    ps.scan_cap = 10;
    const PuncturedSpiral punct(ps, 100.0);
    try {
      (void)punct.point(3);
      FAIL("expected PunctureUnresolved");
    } catch (const PunctureUnresolved& e) {
      CHECK(e.index() == 3);
      CHECK(std::string(e.what()).find("n = 3") != std::string::npos);
    }
  }

  TEST_CASE("puncture spec JSON round trip") {
    PunctureSpec ps;
    ps.base = SequenceSpec::rational_ladder();
    ps.v0 = {0.0, 1.0};
    ps.schedule = AnnulusSchedule::Factorial;
    ps.C = 0.5;
    const auto j = ps.to_json();
    CHECK(PunctureSpec::from_json(j).to_json() == j);
  }
}
