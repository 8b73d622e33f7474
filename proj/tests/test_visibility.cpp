#include <doctest.h>

#include <cmath>
#include <memory>
#include <numbers>

#include "oracles.hpp"
#include "spiral/errors.hpp"
#include "spiral/rng.hpp"
#include "spiral/visibility.hpp"

using namespace spiral;

namespace {

constexpr double kPi = std::numbers::pi;

std::shared_ptr<const PointSource> source(const SequenceSpec& s) { return std::make_shared<SpiralSet>(s); }

UnitVector perp(const UnitVector& u) { return UnitVector({-u[1], u[0]}); }

// Re-verify a witness against the segment {t c : t in window} with the oracle.
bool witness_ok(const PointSource& src, const std::vector<double>& c, double lo, double hi, const CheckWitness& w,
                double eps) {
  const auto p = src.point(w.hit.n);
  const std::vector<double> a{lo * c[0], lo * c[1]};
  const std::vector<double> b{hi * c[0], hi * c[1]};
  const long double d = oracle::segment_dist(p, a, b);
  const std::vector<double> at{w.hit.t * c[0], w.hit.t * c[1]};
  return d <= eps + 1e-9 && oracle::dist(p, at) <= eps + 1e-9 && w.hit.t >= lo - 1e-9 && w.hit.t <= hi + 1e-9;
}

}  // namespace

TEST_SUITE("visibility") {
  TEST_CASE("line parameters") {
    const UnitVector v({0.0, 1.0});
    const UnitVector w({1.0, 0.0});
    const LineParam l(2.0, v, w, -1.0, 3.0);
    CHECK(l.at(1.5)[0] == 1.5);
    CHECK(l.at(1.5)[1] == 2.0);
    CHECK_THROWS_AS(LineParam(1.0, v, UnitVector({1.0, 1.0}), 0, 1), ArgumentError);
    CHECK_THROWS_AS(LineParam(-1.0, v, w, 0, 1), ArgumentError);
    CHECK_THROWS_AS(LineParam(1.0, v, w, 2, 2), ArgumentError);
    const std::vector<double> x{3.0, 5.0};
    const LineParam t = LineParam::through(x, w, 0.0, 10.0);
    CHECK(t.lambda == doctest::Approx(5.0));
    CHECK(t.at(t.t0)[0] == doctest::Approx(3.0));
    CHECK(t.at(t.t0)[1] == doctest::Approx(5.0));
    CHECK(t.t1 - t.t0 == doctest::Approx(10.0));
  }

  TEST_CASE("required net mesh and refusal of coarse nets") {
    CHECK(required_net_mesh(0.1, 10.0) == doctest::Approx(0.1 / 40.0));
    CHECK(required_net_mesh(0.1, 10.0, 90.0) == doctest::Approx(0.1 / 400.0));
    SpiralIndexCache cache(source(SequenceSpec::rational_ladder()));
    const DirectionNet coarse = build_direction_net(1, 0.1);
    try {
      (void)check_orchard(cache, 0.1, 10.0, coarse);
      FAIL("expected NetTooCoarse");
    } catch (const NetTooCoarse& e) {
      CHECK(e.required_mesh() == doctest::Approx(required_net_mesh(0.1, 10.0)));
    }
    const DirectionNet ok = build_direction_net(1, required_net_mesh(0.1, 10.0));
    CHECK_THROWS_AS(check_orchard(cache, 1.5, 10.0, ok), ArgumentError);
  }

  TEST_CASE("Lambda is an orchard with V = 4 pi / eps") {
    const double eps = 0.1;
    const double V = 4 * kPi / eps;
    SpiralIndexCache cache(source(SequenceSpec::rational_ladder()));
    const DirectionNet net = build_direction_net(1, required_net_mesh(eps, V));
    CheckOptions opt;
    opt.max_listed = 100000;
    const VisibilityReport r = check_orchard(cache, eps, V, net, opt);
    CHECK(r.passed());
    CHECK(r.checked == net.size());
    CHECK(r.certified_tolerance <= 1.25 * eps + 1e-15);
    CHECK(r.witnesses.size() == net.size());
    std::size_t bad = 0;
    for (const auto& w : r.witnesses) {
      const auto c = net.center(w.item);
      if (!witness_ok(cache.source(), {c[0], c[1]}, 0.0, V, w, eps)) ++bad;
    }
    CHECK(bad == 0);
  }

  TEST_CASE("the constant sequence fails in the antipodal direction") {
    SpiralIndexCache cache(source(SequenceSpec::constant(UnitVector({1.0, 0.0}))));
    for (double eps : {0.5, 0.1}) {
      for (double V : {10.0, 100.0}) {
        const DirectionNet net = build_direction_net(1, required_net_mesh(eps, V));
        CheckOptions opt;
        opt.max_listed = 1'000'000;
        const VisibilityReport r = check_orchard(cache, eps, V, net, opt);
        CHECK_FALSE(r.passed());
        bool antipode_failed = false;
        for (const auto& f : r.failures) {
          if (f.direction[0] < -0.999) antipode_failed = true;
        }
        CHECK(antipode_failed);
      }
    }
  }

  TEST_CASE("pass is monotone in eps and V") {
    SpiralIndexCache cache(source(SequenceSpec::golden_angle()));
    CheckOptions opt;
    opt.fail_fast = true;
    for (double eps : {0.3, 0.1}) {
      for (double V : {2.0 / eps, 4.0 / eps, 8.0 / eps}) {
        const double Vb = 1.5 * V;
        const DirectionNet net = build_direction_net(1, required_net_mesh(eps / 2, Vb));
        const bool p = check_orchard(cache, eps, V, net, opt).passed();
        if (p) {
          CHECK(check_orchard(cache, std::min(0.99, 1.5 * eps), V, net, opt).passed());
          CHECK(check_orchard(cache, eps, Vb, net, opt).passed());
        }
        // The contrapositive in the other direction.
        if (!check_orchard(cache, eps, Vb, net, opt).passed()) CHECK_FALSE(p);
      }
    }
  }

  TEST_CASE("uniform at t0 = 0 implies orchard; lines through the origin reproduce uniform") {
    SpiralIndexCache cache(source(SequenceSpec::golden_angle()));
    const double eps = 0.1;
    for (double V : {20.0, 40.0, 80.0}) {
      const std::vector<double> t0s{0.0, 100.0};
      const DirectionNet net = build_direction_net(1, required_net_mesh(eps, V, 100.0));
      CheckOptions opt;
      opt.max_listed = 1'000'000;
      const VisibilityReport uni0 = check_uniform_orchard(cache, eps, V, {0.0}, net, opt);
      const VisibilityReport orch = check_orchard(cache, eps, V, net, opt);
      if (uni0.passed()) CHECK(orch.passed());
      CHECK(uni0.failed == orch.failed);

      // Restrict forest lines to lambda = 0: the same (direction, t0) pairs.
      const VisibilityReport uni = check_uniform_orchard(cache, eps, V, t0s, net, opt);
      std::vector<LineParam> lines;
      for (std::size_t i = 0; i < net.size(); i += 9) {
        const UnitVector w = net.center_vector(i);
        for (double t0 : t0s) lines.emplace_back(0.0, perp(w), w, t0, t0 + V);
      }
      const VisibilityReport forest = check_dense_forest(cache, eps, V, lines, opt);
      std::size_t sampled_uniform_failures = 0;
      for (const auto& f : uni.failures) {
        if (f.item % 9 == 0) ++sampled_uniform_failures;
      }
      CHECK(forest.failed == sampled_uniform_failures);
      if (forest.passed()) CHECK(sampled_uniform_failures == 0);
    }
  }

  TEST_CASE("dense forest: a line through a stored point passes at distance zero") {
    SpiralIndexCache cache(source(SequenceSpec::golden_angle()));
    const auto p = cache.source().point(777);
    const UnitVector w({0.6, 0.8});
    const double V = 5.0;
    const LineParam l = LineParam::through(p, w, -2.0, -2.0 + V);
    const VisibilityReport r = check_dense_forest(cache, 0.01, V, {l});
    CHECK(r.passed());
    REQUIRE(r.witnesses.size() == 1);
    CHECK(r.witnesses[0].hit.distance <= 1e-12);
    CHECK(r.witnesses[0].hit.t >= l.t0);
    CHECK(r.witnesses[0].hit.t <= l.t1);
  }

  TEST_CASE("dense forest: Lambda fails on y = 1 with the exact minimal distance") {
    SpiralIndexCache cache(source(SequenceSpec::rational_ladder()));
    const UnitVector v({0.0, 1.0});
    const UnitVector w({1.0, 0.0});
    std::vector<LineParam> lines;
    const double V = 100.0;
    for (double x0 : {10.0, 250.0, 900.0}) lines.emplace_back(1.0, v, w, x0, x0 + V);
    const VisibilityReport r = check_dense_forest(cache, 0.5, V, lines);
    CHECK(r.failed == 3);
    for (const auto& f : r.failures) {
      REQUIRE(f.min_distance.has_value());
      // Points on the x axis are 1 away; no point has 0 < |y| < 2.2.
      CHECK(*f.min_distance == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK_THROWS_AS(check_dense_forest(cache, 0.5, V + 1, lines), ArgumentError);
  }

  TEST_CASE("eqvisi examples") {
    const UnitVector v({0.0, 1.0});
    const UnitVector w({1.0, 0.0});
    const auto spec = SequenceSpec::constant(w);
    for (double eps : {1e-6, 0.1, 0.9}) {
      for (double c : {1e-6, 1.0, 10.0}) CHECK(eqvisi_check(spec, 1, 0.0, 1.0, v, w, eps, c));
    }
    for (double eps : {0.1, 1.0, 7.9}) CHECK_FALSE(eqvisi_check(spec, 1, 10.0, 0.0, v, w, eps, 10.0));
    CHECK_THROWS_AS(eqvisi_check(spec, 1, 0.0, 1.0, w, w, 0.1, 1.0), ArgumentError);
    CHECK_THROWS_AS(eqvisi_check(spec, 1, 0.0, 0.0, v, w, 0.1, 1.0), ArgumentError);
  }

  TEST_CASE("eqvisi against a direct evaluation") {
    const Sequence seq(SequenceSpec::golden_angle());
    Rng rng(8);
    std::size_t bad = 0;
    for (int i = 0; i < 10000; ++i) {
      const std::int64_t n = 1 + static_cast<std::int64_t>(rng.below(100000));
      const double eps = rng.uniform(0.01, 0.5);
      const double c = rng.uniform(0.5, 5.0);
      const auto q = oracle::golden_point(n);
      const UnitVector w = UnitVector::from_angle(rng.uniform(0, 2 * kPi));
      UnitVector v = perp(w);
      double lam = q[0] * v[0] + q[1] * v[1] + rng.uniform(-1, 1) * eps;
      if (lam < 0) {
        lam = -lam;
        v = -v;
      }
      const double t = q[0] * w[0] + q[1] * w[1] + rng.uniform(-1, 1) * eps;
      const double rho = std::hypot(lam, t);
      const double ang_target = std::atan2(lam * v[1] + t * w[1], lam * v[0] + t * w[0]);
      const double ang_u = std::atan2(q[1], q[0]);
      double da = std::abs(ang_target - ang_u);
      da = std::min(da, 2 * kPi - da);
      const bool want = std::abs(std::sqrt(static_cast<double>(n)) - rho) <= eps && da <= c * eps / rho;
      // Skip instances within rounding of a boundary.
      const double m1 = std::abs(std::abs(std::sqrt(static_cast<double>(n)) - rho) - eps);
      const double m2 = std::abs(da - c * eps / rho);
      if (m1 < 1e-9 || m2 < 1e-12) continue;
      if (eqvisi_check(seq, n, lam, t, v, w, eps, c) != want) ++bad;
    }
    CHECK(bad == 0);
  }

  TEST_CASE("visible points: the Lambda vacant strip") {
    const SpiralSet lam(SequenceSpec::rational_ladder());
    const std::vector<double> x{0.0, 1.0};
    VisibleOptions opt;
    opt.exhaustive = true;
    const auto vs = visible_point_test(lam, x, std::vector<UnitVector>{UnitVector({1.0, 0.0})}, 0.1, 1000.0, opt);
    REQUIRE(vs.size() == 1);
    const auto& r = vs[0];
    CHECK(r.complete);
    REQUIRE(r.min_distance.has_value());
    CHECK(*r.min_distance == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.eps_visible);
    CHECK(r.certified);
    CHECK(r.certificate == "vacant-strip");
    CHECK(r.certified_bound == doctest::Approx(1.0));
  }

  TEST_CASE("visible points: x itself is excluded") {
    const SpiralSet gold(SequenceSpec::golden_angle());
    const auto x = gold.point(500);
    VisibleOptions opt;
    opt.exhaustive = true;
    const auto vs = visible_point_test(gold, x, std::vector<UnitVector>{UnitVector({0.3, -0.7})}, 0.01, 3.0, opt);
    REQUIRE(vs.size() == 1);
    CHECK(vs[0].nearest_n != 500);
    CHECK(vs[0].lower_bound > 0.0);
    // Exhaustive oracle over nearby indices.
    const UnitVector v({0.3, -0.7});
    const std::vector<double> b{x[0] + 3.0 * v[0], x[1] + 3.0 * v[1]};
    long double best = 1e300L;
    for (std::int64_t n = 1; n <= 2000; ++n) {
      if (n == 500) continue;
      best = std::min(best, oracle::segment_dist(gold.point(n), x, b));
    }
    if (vs[0].min_distance) {
      CHECK(*vs[0].min_distance == doctest::Approx(static_cast<double>(best)).epsilon(1e-12));
    } else {
      CHECK(vs[0].lower_bound <= best);
    }
  }

  TEST_CASE("visible points: golden angle rays come close") {
    const SpiralSet gold(SequenceSpec::golden_angle());
    Rng rng(314);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const std::vector<double> x{rng.uniform(-50, 50), rng.uniform(-50, 50)};
      const UnitVector v = UnitVector::from_angle(rng.uniform(0, 2 * kPi));
      VisibleOptions opt;
      opt.stop_below = 0.2;
      const auto r = visible_point_test(gold, x, std::vector<UnitVector>{v}, 0.2, 1e4, opt);
      REQUIRE(r[0].min_distance.has_value());
      worst = std::max(worst, *r[0].min_distance);
    }
    MESSAGE("largest truncated distance " << worst);
    CHECK(worst < 0.2);
  }

  TEST_CASE("visible points: single-ray certificate") {
    const SpiralSet cst(SequenceSpec::constant(UnitVector({1.0, 0.0})));
    const std::vector<double> x{0.0, 2.0};
    const auto r = visible_point_test(cst, x, std::vector<UnitVector>{UnitVector({0.0, 1.0})}, 0.1, 100.0);
    CHECK(r[0].certified);
    CHECK(r[0].certificate == "single-ray");
    CHECK(r[0].certified_bound == doctest::Approx(std::sqrt(5.0)));
  }

  TEST_CASE("ray to half-line distance") {
    const std::vector<double> x{0.0, 2.0}, up{0.0, 1.0}, c{1.0, 0.0}, down{0.0, -1.0};
    CHECK(ray_halfline_distance(x, up, c, 1.0) == doctest::Approx(std::sqrt(5.0)));
    CHECK(ray_halfline_distance(x, down, c, 1.0) == doctest::Approx(1.0));
    CHECK(ray_halfline_distance(x, c, c, 1.0) == doctest::Approx(2.0));
  }

  TEST_CASE("estimates: constant diverges, Lambda stays under 4 pi / eps") {
    SpiralIndexCache cst(source(SequenceSpec::constant(UnitVector({1.0, 0.0}))));
    EstimateOptions opt;
    opt.V_cap = 200;
    const VisibilityCurve c = estimate_min_visibility(cst, VisibilityKind::Orchard, {0.3, 0.2}, opt);
    for (const auto& e : c.entries) CHECK(e.status == "diverged");

    SpiralIndexCache lam(source(SequenceSpec::rational_ladder()));
    const std::vector<double> grid{0.4, 0.2, 0.1, 0.05};
    const VisibilityCurve l = estimate_min_visibility(lam, VisibilityKind::Orchard, grid);
    REQUIRE(l.entries.size() == grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      CHECK(l.entries[i].status == "ok");
      CHECK(l.entries[i].V_hat <= 4 * kPi / grid[i]);
      if (i > 0) CHECK(l.entries[i].V_hat >= l.entries[i - 1].V_hat);
    }
    // Lower bound V(eps) >= c / eps.
    CHECK(l.scaled_min > 0.0);
    CHECK_THROWS_AS(estimate_min_visibility(lam, VisibilityKind::Orchard, {0.1, 0.2}), ArgumentError);
  }

  TEST_CASE("calibration returns the first passing doubling") {
    SpiralIndexCache cache(source(SequenceSpec::golden_angle()));
    const Calibration cal = calibrate_constant(cache, VisibilityKind::Uniform, {0.1}, {0.0, 100.0}, {}, 0.5, 64.0);
    REQUIRE(cal.ok);
    const double eps = 0.1;
    const DirectionNet net = build_direction_net(1, required_net_mesh(eps, cal.C / eps, 100.0));
    CHECK(check_uniform_orchard(cache, eps, cal.C / eps, {0.0, 100.0}, net).passed());
    if (cal.C > 0.5) {
      const double C = cal.C / 2;
      const DirectionNet n2 = build_direction_net(1, required_net_mesh(eps, C / eps, 100.0));
      CHECK_FALSE(check_uniform_orchard(cache, eps, C / eps, {0.0, 100.0}, n2).passed());
    }
  }

  TEST_CASE("reports are deterministic") {
    SpiralIndexCache a(source(SequenceSpec::golden_angle()));
    SpiralIndexCache b(source(SequenceSpec::golden_angle()));
    const double eps = 0.2, V = 30.0;
    const DirectionNet net = build_direction_net(1, required_net_mesh(eps, V));
    CHECK(check_orchard(a, eps, V, net).to_json().dump() == check_orchard(b, eps, V, net).to_json().dump());
  }
}
