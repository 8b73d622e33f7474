#include <doctest.h>

#include <cmath>
#include <memory>
#include <numbers>

#include "oracles.hpp"
#include "spiral/delone.hpp"
#include "spiral/errors.hpp"
#include "spiral/rng.hpp"

using namespace spiral;

namespace {

std::shared_ptr<const PointSource> golden(const std::string& theta = "phi") {
  return std::make_shared<SpiralSet>(SequenceSpec::golden_angle(theta));
}

}  // namespace

TEST_SUITE("delone") {
  TEST_CASE("golden-angle spiral T = 30 regression baseline") {
    const DeloneReport r = delone_report(golden(), 30.0, 0.25);
    CHECK(r.points == 900);
    CHECK(r.packing == doctest::Approx(1.601950).epsilon(1e-6));
    CHECK(r.covering == doctest::Approx(1.417616).epsilon(1e-6));
    CHECK(r.probe_resolution == 0.25);
    CHECK(r.probes > 0);
  }

  TEST_CASE("packing equals an exhaustive pairwise minimum") {
    for (const char* theta : {"phi", "sqrt2-1", "0.500001"}) {
      const auto src = golden(theta);
      const DeloneReport r = delone_report(src, 60.0, 1.0);
      std::vector<std::vector<double>> pts;
      for (std::int64_t n = 1; n <= 3600; ++n) pts.push_back(src->point(n));
      CHECK(r.points == 3600);
      CHECK(r.packing == doctest::Approx(oracle::min_pair(pts)).epsilon(1e-12));
    }
    Rng rng(5);
    std::vector<double> flat;
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < 3000; ++i) {
      const double x = rng.uniform(-40, 40), y = rng.uniform(-40, 40);
      if (std::hypot(x, y) > 40) continue;
      flat.insert(flat.end(), {x, y});
      pts.push_back({x, y});
    }
    const DeloneReport r = delone_report_points(1, flat, 40.0, 1.0);
    CHECK(r.packing == doctest::Approx(oracle::min_pair(pts)).epsilon(1e-12));
  }

  TEST_CASE("covering upper bound is honest on a sample") {
    const auto src = golden();
    const DeloneReport r = delone_report(src, 20.0, 0.25);
    std::vector<std::vector<double>> pts;
    for (std::int64_t n = 1; n <= 600; ++n) pts.push_back(src->point(n));
    Rng rng(9);
    double worst = 0.0;
    for (int i = 0; i < 20000; ++i) {
      const double a = rng.uniform(0, 2 * std::numbers::pi);
      const double rr = 20.0 * std::sqrt(rng.uniform());
      const std::vector<double> q{rr * std::cos(a), rr * std::sin(a)};
      long double best = 1e300L;
      for (const auto& p : pts) best = std::min(best, oracle::dist(p, q));
      worst = std::max(worst, static_cast<double>(best));
    }
    CHECK(worst <= r.covering + r.probe_resolution);
  }

  TEST_CASE("a Liouville-like angle loses packing as T grows") {
    const auto src = golden("0.500001");
    double prev = 1e300;
    for (double T : {10.0, 30.0, 100.0}) {
      const DeloneReport r = delone_report(src, T, 1.0);
      CHECK(r.packing < prev / 2);
      prev = r.packing;
    }
    CHECK(prev < 0.02);
  }

  TEST_CASE("a single annulus has covering radius about T") {
    std::vector<double> flat;
    const double T = 50.0;
    for (int k = 0; k < 2000; ++k) {
      const double a = 2 * std::numbers::pi * k / 2000.0;
      flat.insert(flat.end(), {T * std::cos(a), T * std::sin(a)});
    }
    const DeloneReport r = delone_report_points(1, flat, T, 0.5);
    CHECK(r.covering <= T);
    CHECK(r.covering >= T - r.probe_resolution);
  }

  TEST_CASE("argument checks") {
    CHECK_THROWS_AS(delone_report(golden(), 1.0, 0.25), ArgumentError);
    CHECK_THROWS_AS(delone_report(golden(), 10.0, 0.0), ArgumentError);
  }

  TEST_CASE("badness examples") {
    const double b = badness("phi", 1'000'000);
    CHECK(b == doctest::Approx(static_cast<double>(oracle::badness(oracle::big_phi(), 100000))).epsilon(1e-12));
    CHECK(b == doctest::Approx(2.0 - std::numbers::phi).epsilon(1e-12));
    // The tail minimum approaches the Hurwitz constant 1 / sqrt 5.
    const double tail = badness_tail("phi", 1000, 1'000'000);
    CHECK(tail >= 1.0 / std::sqrt(5.0) - 1e-6);
    CHECK(tail <= 1.0 / std::sqrt(5.0) + 1e-5);
    CHECK(badness("0.5", 2) == 0.0);
    CHECK(badness("0.5", 1000) == 0.0);
    const double s = badness("sqrt2-1", 10000);
    CHECK(s > 0.0);
    const oracle::Big s2 = boost::multiprecision::sqrt(oracle::Big(2)) - 1;
    CHECK(s == doctest::Approx(oracle::badness(s2, 10000)).epsilon(1e-12));
    CHECK_THROWS_AS(badness("phi", 0), ArgumentError);
  }

  TEST_CASE("badness is nonincreasing in Q and matches enumeration") {
    Rng rng(77);
    for (int trial = 0; trial < 30; ++trial) {
      const double theta = rng.uniform(0.0, 1.0);
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.17g", theta);
      const oracle::Big big(buf);
      double prev = 1e300;
      for (std::int64_t Q : {1, 3, 10, 100, 2000}) {
        const double b = badness(buf, Q);
        CHECK(b <= prev);
        CHECK(b == doctest::Approx(oracle::badness(big, Q)).epsilon(1e-10));
        prev = b;
      }
      for (std::int64_t q_min : {2, 50}) {
        oracle::Big best = 1e300;
        for (std::int64_t q = q_min; q <= 2000; ++q) {
          const oracle::Big x = q * big;
          oracle::Big f = x - boost::multiprecision::floor(x);
          if (f > 0.5) f = 1 - f;
          best = std::min(best, oracle::Big(q) * f);
        }
        CHECK(badness_tail(buf, q_min, 2000) == doctest::Approx(static_cast<double>(best)).epsilon(1e-10));
      }
    }
  }

  TEST_CASE("continued fraction convergents of phi are Fibonacci ratios") {
    const auto cs = convergents("phi", 1000);
    REQUIRE(cs.size() >= 10);
    for (std::size_t i = 2; i < cs.size(); ++i) {
      CHECK(cs[i].q == cs[i - 1].q + cs[i - 2].q);
      CHECK(cs[i].p == cs[i - 1].p + cs[i - 2].p);
    }
    for (const auto& c : cs) CHECK(c.q <= 1000);
  }
}
