#include "spiral/spirals.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>

#include "spiral/errors.hpp"
#include "spiral/parallel.hpp"

namespace spiral {

namespace {

std::string json_schedule_name(AnnulusSchedule s) { return s == AnnulusSchedule::Dyadic ? "dyadic" : "factorial"; }

double ray_distance(std::span<const double> p, std::span<const double> v0) {
  const double t = dot(p, v0);
  if (t <= 0.0) return norm(p);
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double x = p[i] - t * v0[i];
    s += x * x;
  }
  return std::sqrt(s);
}

}  // namespace

double spiral_radius(std::int64_t n, int d) {
  if (n < 1) throw ArgumentError("spiral index must be >= 1");
  if (d < 1) throw ArgumentError("sphere dimension must be >= 1");
  const double x = static_cast<double>(n);
  if (d == 1) return std::sqrt(x);
  const double e = d + 1.0;
  double r = std::exp(std::log(x) / e);
  const double rd = std::pow(r, d);
  r -= (rd * r - x) / (e * rd);
  return r;
}

std::vector<double> SpiralPoint::cartesian() const {
  std::vector<double> c(direction.coords().begin(), direction.coords().end());
  for (double& x : c) x *= radius;
  return c;
}

SpiralPoint spiral_point(const Sequence& seq, std::int64_t n) {
  return SpiralPoint{n, spiral_radius(n, seq.d()), seq.term(n)};
}

SpiralPoint spiral_point(const SequenceSpec& spec, std::int64_t n) { return spiral_point(Sequence(spec), n); }

IndexRange annulus_index_range(double r, double R, int d) {
  if (!(r >= 0.0) || !std::isfinite(R)) throw ArgumentError("annulus radii must be finite and non-negative");
  if (r > R) throw ArgumentError("annulus inner radius exceeds outer radius");
  const double e = d + 1.0;
  const double top = std::pow(R, e);
  if (top > 4e18) throw ArgumentError("annulus outer radius too large for 64-bit indices");
  IndexRange out;
  auto lo = static_cast<std::int64_t>(std::ceil(std::pow(r, e)));
  lo = std::max<std::int64_t>(lo, 1);
  while (lo > 1 && spiral_radius(lo - 1, d) >= r) --lo;
  while (spiral_radius(lo, d) < r) ++lo;
  auto hi = static_cast<std::int64_t>(std::floor(top)) + 1;
  while (hi >= 1 && spiral_radius(hi, d) > R) --hi;
  while (spiral_radius(hi + 1, d) <= R) ++hi;
  out.lo = lo;
  out.hi = hi;
  return out;
}

std::vector<double> PointSource::point(std::int64_t n) const {
  std::vector<double> p(dim());
  fill(n, n, p.data());
  return p;
}

void SpiralSet::fill(std::int64_t n_lo, std::int64_t n_hi, double* out) const {
  const std::size_t dm = dim();
  for (std::int64_t n = n_lo; n <= n_hi; ++n) {
    double* p = out + static_cast<std::size_t>(n - n_lo) * dm;
    seq_.term_into(n, p);
    const double r = spiral_radius(n, seq_.d());
    for (std::size_t i = 0; i < dm; ++i) p[i] *= r;
  }
}

PointChunk generate_chunk(const PointSource& src, std::int64_t n_lo, std::int64_t n_hi) {
  if (n_lo < 1 || n_hi < n_lo) throw ArgumentError("invalid index range for generation");
  if (auto len = src.length(); len && n_hi > *len) {
    throw OutOfRangeError("index " + std::to_string(n_hi) + " exceeds stored sequence length " +
                          std::to_string(*len));
  }
  PointChunk chunk;
  chunk.d = src.d();
  chunk.n_lo = n_lo;
  const auto count = static_cast<std::size_t>(n_hi - n_lo + 1);
  chunk.coords.resize(count * chunk.dim());
  constexpr std::size_t kBlock = 8192;
  const std::size_t blocks = (count + kBlock - 1) / kBlock;
  parallel_for(
      blocks,
      [&](std::size_t b) {
        const std::int64_t lo = n_lo + static_cast<std::int64_t>(b * kBlock);
        const std::int64_t hi = std::min(n_hi, lo + static_cast<std::int64_t>(kBlock) - 1);
        src.fill(lo, hi, chunk.coords.data() + static_cast<std::size_t>(lo - n_lo) * chunk.dim());
      },
      1);
  return chunk;
}

void PunctureSpec::validate() const {
  base.validate();
  if (v0.size() != static_cast<std::size_t>(base.d) + 1) throw ArgumentError("v0 must have d+1 coordinates");
  UnitVector check(v0);
  (void)check;
  if (!(delta > 0.0)) throw ArgumentError("strip half-width delta must be positive");
  if (!(C > 0.0)) throw ArgumentError("visibility constant C must be positive");
  if (outer.size() != thickness.size()) throw ArgumentError("outer radii and thicknesses differ in length");
  for (std::size_t i = 0; i < outer.size(); ++i) {
    if (!(thickness[i] > 0.0)) throw ArgumentError("annulus thickness must be positive");
    if (i > 0 && !(outer[i] > outer[i - 1])) throw ArgumentError("annulus outer radii must increase");
  }
  if (scan_cap < 1) throw ArgumentError("scan cap must be >= 1");
}

nlohmann::json PunctureSpec::to_json() const {
  nlohmann::json j = {{"base", base.to_json()},
                      {"v0", v0},
                      {"delta", delta},
                      {"schedule", json_schedule_name(schedule)},
                      {"m0", m0},
                      {"C", C},
                      {"scan_cap", scan_cap}};
  if (!outer.empty()) {
    j["outer"] = outer;
    j["thickness"] = thickness;
  }
  return j;
}

PunctureSpec PunctureSpec::from_json(const nlohmann::json& j) {
  PunctureSpec s;
  try {
    s.base = SequenceSpec::from_json(j.at("base"));
    s.v0 = j.at("v0").get<std::vector<double>>();
    s.delta = j.value("delta", s.delta);
    const std::string sched = j.value("schedule", std::string("dyadic"));
    if (sched == "dyadic") {
      s.schedule = AnnulusSchedule::Dyadic;
    } else if (sched == "factorial") {
      s.schedule = AnnulusSchedule::Factorial;
    } else {
      throw ArgumentError("unknown annulus schedule '" + sched + "'");
    }
    s.m0 = j.value("m0", 0);
    s.C = j.value("C", 1.0);
    s.scan_cap = j.value("scan_cap", s.scan_cap);
    if (j.contains("outer")) s.outer = j.at("outer").get<std::vector<double>>();
    if (j.contains("thickness")) s.thickness = j.at("thickness").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("malformed puncture spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::vector<Annulus> annulus_schedule(const PunctureSpec& spec, double max_radius) {
  std::vector<Annulus> out;
  auto push = [&](int m, double outer, double rho) {
    if (!(outer - rho > 0.0)) {
      throw ArgumentError("annulus " + std::to_string(m) + ": outer radius " + std::to_string(outer) +
                          " does not exceed thickness " + std::to_string(rho));
    }
    out.push_back({m, outer, rho});
  };
  if (!spec.outer.empty()) {
    for (std::size_t i = 0; i < spec.outer.size(); ++i) push(static_cast<int>(i), spec.outer[i], spec.thickness[i]);
    return out;
  }
  const double d = spec.base.d;
  if (spec.schedule == AnnulusSchedule::Dyadic) {
    // R_m = 2^m, eps_m = 2^{-m/(2d)}, rho_m = 2 V(eps_m) = 2 C 2^{m/2}.
    const int m0 = spec.m0 > 0 ? spec.m0 : 4;
    for (int m = m0; m < 1000; ++m) {
      const double outer = std::ldexp(1.0, m);
      push(m, outer, 2.0 * spec.C * std::pow(2.0, m / 2.0));
      if (outer > max_radius) break;
    }
    return out;
  }
  // R_m = m!, rho_m = 2 V(2^{-m}) = 2 C 2^{m d}.
  auto thickness = [&](int m) { return 2.0 * spec.C * std::pow(2.0, m * d); };
  double fact = 1.0;
  int m = 1;
  if (spec.m0 > 0) {
    for (; m < spec.m0; ++m) fact *= m + 1;
  } else {
    while (fact - thickness(m) <= 0.0 && m < 170) fact *= ++m;
  }
  for (; m < 170; ++m) {
    push(m, fact, thickness(m));
    if (fact > max_radius) break;
    fact *= m + 1;
  }
  return out;
}

PuncturedSpiral::PuncturedSpiral(PunctureSpec spec, double working_radius)
    : spec_(std::move(spec)), base_(spec_.base), working_radius_(working_radius) {
  spec_.validate();
  const UnitVector v(spec_.v0);
  v0_.assign(v.coords().begin(), v.coords().end());
  annuli_ = annulus_schedule(spec_, working_radius);
}

bool PuncturedSpiral::in_annuli(double r) const {
  for (const auto& a : annuli_) {
    if (r >= a.inner() && r <= a.outer) return true;
  }
  return false;
}

bool PuncturedSpiral::in_region(std::span<const double> p) const {
  return ray_distance(p, v0_) < spec_.delta && !in_annuli(norm(p));
}

std::int64_t PuncturedSpiral::redirect(std::int64_t n, double r, double* out) const {
  const std::size_t dm = dim();
  std::vector<double> q(dm);
  for (std::int64_t m = 1; m <= spec_.scan_cap; ++m) {
    if (auto len = base_.length(); len && m > *len) break;
    base_.term_into(m, q.data());
    for (double& x : q) x *= r;
    if (!in_region(q)) {
      std::copy(q.begin(), q.end(), out);
      return m;
    }
  }
  throw PunctureUnresolved(n);
}

void PuncturedSpiral::fill(std::int64_t n_lo, std::int64_t n_hi, double* out) const {
  const std::size_t dm = dim();
  const double limit = std::max(working_radius_, annuli_.empty() ? 0.0 : annuli_.back().outer);
  for (std::int64_t n = n_lo; n <= n_hi; ++n) {
    double* p = out + static_cast<std::size_t>(n - n_lo) * dm;
    const double r = spiral_radius(n, d());
    if (r > limit) {
      throw ArgumentError("annulus schedule does not cover radius " + std::to_string(r));
    }
    base_.term_into(n, p);
    for (std::size_t i = 0; i < dm; ++i) p[i] *= r;
    if (in_region(std::span<const double>(p, dm))) redirect(n, r, p);
  }
}

std::int64_t PuncturedSpiral::replacement_index(std::int64_t n) const {
  const std::size_t dm = dim();
  std::vector<double> p(dm);
  const double r = spiral_radius(n, d());
  base_.term_into(n, p.data());
  for (double& x : p) x *= r;
  if (!in_region(p)) return n;
  return redirect(n, r, p.data());
}

SpiralPoint PuncturedSpiral::transform(std::int64_t n) const {
  const std::int64_t m = replacement_index(n);
  return SpiralPoint{n, spiral_radius(n, d()), base_.term(m)};
}

SpiralPoint puncture_transform(const PunctureSpec& spec, std::int64_t n) {
  return PuncturedSpiral(spec, spiral_radius(n, spec.base.d)).transform(n);
}

void write_binary_dump(const std::string& path, const PointChunk& chunk) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write '" + path + "'");
  const std::int64_t header[3] = {chunk.d, chunk.n_lo, chunk.n_hi()};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  out.write(reinterpret_cast<const char*>(chunk.coords.data()),
            static_cast<std::streamsize>(chunk.coords.size() * sizeof(double)));
  if (!out) throw ArgumentError("short write to '" + path + "'");
}

PointChunk read_binary_dump(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot read '" + path + "'");
  std::int64_t header[3];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!in || header[0] < 1 || header[1] < 1 || header[2] < header[1] - 1) {
    throw ArgumentError("'" + path + "' is not a point dump");
  }
  PointChunk chunk;
  chunk.d = static_cast<int>(header[0]);
  chunk.n_lo = header[1];
  chunk.coords.resize(static_cast<std::size_t>(header[2] - header[1] + 1) * chunk.dim());
  in.read(reinterpret_cast<char*>(chunk.coords.data()),
          static_cast<std::streamsize>(chunk.coords.size() * sizeof(double)));
  if (!in) throw ArgumentError("'" + path + "' is truncated");
  return chunk;
}

void write_csv(std::ostream& os, const PointChunk& chunk) {
  os << "n";
  for (std::size_t i = 0; i < chunk.dim(); ++i) os << ",x_" << i;
  os << '\n';
  char buf[32];
  for (std::int64_t i = 0; i < chunk.size(); ++i) {
    os << chunk.n_lo + i;
    for (double x : chunk.point(i)) {
      std::snprintf(buf, sizeof(buf), "%.17g", x);
      os << ',' << buf;
    }
    os << '\n';
  }
}

}  // namespace spiral
