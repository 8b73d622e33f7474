#include "spiral/covering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "spiral/errors.hpp"
#include "spiral/parallel.hpp"
#include "spiral/spatial_index.hpp"

namespace spiral {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();

double sphere_area(int d) {
  const double n = d + 1.0;
  return 2.0 * std::pow(kPi, n / 2) / std::tgamma(n / 2);
}

std::vector<double> sorted_angles(std::span<const double> flat) {
  std::vector<double> a(flat.size() / 2);
  for (std::size_t i = 0; i < a.size(); ++i) {
    double t = std::atan2(flat[2 * i + 1], flat[2 * i]);
    if (t < 0.0) t += kTwoPi;
    a[i] = t;
  }
  std::sort(a.begin(), a.end());
  return a;
}

CoveringRadiusResult circle_exact(std::span<const double> flat) {
  const std::vector<double> a = sorted_angles(flat);
  double gap = a.front() + kTwoPi - a.back();
  for (std::size_t i = 1; i < a.size(); ++i) gap = std::max(gap, a[i] - a[i - 1]);
  return {std::min(kPi, gap / 2.0), true, 0.0};
}

double default_mesh(std::size_t m, int d) {
  const double spacing = std::pow(sphere_area(d) / static_cast<double>(m), 1.0 / d);
  double mesh = std::min(0.05, 0.25 * spacing);
  // Keep nets below a few million centers.
  const double cap = 2e6;
  if (d == 1) {
    mesh = std::max(mesh, kTwoPi / cap);
  } else {
    mesh = std::max(mesh, std::pow(net_count_bound(d) / cap, 1.0 / d));
  }
  return std::min(mesh, kPi);
}

CoveringRadiusResult net_mode(std::span<const double> flat, int d, double mesh) {
  const std::size_t dm = static_cast<std::size_t>(d) + 1;
  const std::size_t m = flat.size() / dm;
  if (!(mesh > 0.0)) mesh = default_mesh(m, d);
  const DirectionNet net = build_direction_net(d, mesh);
  std::vector<double> best(net.size(), 0.0);
  if (d == 1) {
    const std::vector<double> a = sorted_angles(flat);
    parallel_for(
        net.size(),
        [&](std::size_t i) {
          const auto c = net.center(i);
          double t = std::atan2(c[1], c[0]);
          if (t < 0.0) t += kTwoPi;
          const auto it = std::lower_bound(a.begin(), a.end(), t);
          const double hi = it == a.end() ? a.front() + kTwoPi : *it;
          const double lo = it == a.begin() ? a.back() - kTwoPi : *(it - 1);
          best[i] = std::min(hi - t, t - lo);
        },
        1024);
  } else {
    // Members placed on a sphere of radius rho inside one shell of width 1,
    // so the shell grid cells are about one member spacing wide.
    const double spacing = std::pow(sphere_area(d) / static_cast<double>(m), 1.0 / d);
    const double rho = std::floor(std::max(2.0, 1.0 / spacing)) + 0.5;
    std::vector<std::int64_t> ids(m);
    std::vector<double> coords(flat.begin(), flat.end());
    for (std::size_t i = 0; i < m; ++i) ids[i] = static_cast<std::int64_t>(i) + 1;
    for (double& x : coords) x *= rho;
    IndexOptions opt;
    opt.shell_width = 1.0;
    const ShellIndex idx(d, std::move(ids), std::move(coords), opt);
    parallel_for(
        net.size(),
        [&](std::size_t i) {
          std::vector<double> q(net.center(i).begin(), net.center(i).end());
          for (double& x : q) x *= rho;
          const auto hit = idx.nearest(q);
          const double chord = hit->distance / rho;
          best[i] = 2.0 * std::asin(std::min(1.0, chord / 2.0));
        },
        256);
  }
  double v = 0.0;
  for (double b : best) v = std::max(v, b);
  return {std::min(kPi, v), false, net.mesh()};
}

}  // namespace

CoveringRadiusResult covering_radius(std::span<const double> flat, int d, CoveringMode mode, double net_mesh) {
  if (d < 1) throw ArgumentError("sphere dimension must be >= 1");
  const std::size_t dm = static_cast<std::size_t>(d) + 1;
  if (flat.empty()) throw ArgumentError("covering radius of an empty set is undefined");
  if (flat.size() % dm != 0) throw ArgumentError("flat point array has the wrong length");
  if (mode == CoveringMode::Auto) mode = d == 1 ? CoveringMode::Exact : CoveringMode::Net;
  if (mode == CoveringMode::Exact) {
    if (d != 1) throw ArgumentError("exact covering radius is only available for d = 1");
    return circle_exact(flat);
  }
  return net_mode(flat, d, net_mesh);
}

CoveringRadiusResult covering_radius(const std::vector<UnitVector>& points, int d, CoveringMode mode,
                                     double net_mesh) {
  std::vector<double> flat;
  flat.reserve(points.size() * (static_cast<std::size_t>(d) + 1));
  for (const auto& p : points) {
    if (p.sphere_dim() != d) throw ArgumentError("point dimension mismatch");
    flat.insert(flat.end(), p.coords().begin(), p.coords().end());
  }
  return covering_radius(flat, d, mode, net_mesh);
}

std::vector<std::int64_t> WindowSet::indices() const {
  std::vector<std::int64_t> out(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = first + i;
  return out;
}

namespace {

std::int64_t checked_power(std::int64_t h, int e, std::int64_t budget) {
  std::int64_t r = 1;
  for (int i = 0; i < e; ++i) {
    if (r > budget / h) throw BudgetExceeded(budget + 1, budget);
    r *= h;
  }
  return r;
}

// Window with possibly zero members; used where x < 1 is meaningful.
WindowSet make_window(const Sequence& seq, std::int64_t h, double x, std::int64_t budget) {
  if (h < 1) throw ArgumentError("window scale h must be >= 1");
  if (!(x >= 0.0) || !std::isfinite(x)) throw ArgumentError("window length x must be finite and >= 0");
  const int d = seq.d();
  WindowSet w;
  w.h = h;
  w.x = x;
  w.d = d;
  const std::int64_t base = checked_power(h, d + 1, budget);
  const double fx = std::floor(x);
  if (fx > static_cast<double>(budget)) throw BudgetExceeded(budget + 1, budget);
  w.count = static_cast<std::int64_t>(fx);
  w.first = base + 1;
  check_budget(base + w.count, budget);
  if (auto len = seq.length(); len && base + w.count > *len) {
    throw OutOfRangeError("window reaches past the stored sequence");
  }
  w.members.resize(static_cast<std::size_t>(w.count) * seq.dim());
  parallel_for(
      static_cast<std::size_t>(w.count),
      [&](std::size_t i) { seq.term_into(w.first + static_cast<std::int64_t>(i), w.members.data() + i * seq.dim()); },
      4096);
  return w;
}

double window_radius(const WindowSet& w, const CoveringOptions& opt, double* resolution = nullptr) {
  if (w.count == 0) {
    if (resolution) *resolution = 0.0;
    return kPi;
  }
  const auto r = covering_radius(w.members, w.d, opt.mode, opt.net_mesh);
  if (resolution) *resolution = r.resolution;
  return r.value;
}

}  // namespace

WindowSet window_set(const Sequence& seq, std::int64_t h, double x, std::int64_t budget) {
  if (!(x >= 1.0)) throw ArgumentError("window length x must be >= 1");
  return make_window(seq, h, x, budget);
}

double PowerLaw::operator()(double eps) const { return A * std::pow(eps, -p); }

nlohmann::json UcpResult::to_json() const {
  nlohmann::json cs = nlohmann::json::array();
  for (const auto& c : cells) {
    cs.push_back({{"m", c.m},
                  {"N", c.N},
                  {"count", c.count},
                  {"radius", c.radius},
                  {"resolution", c.resolution},
                  {"value", c.value},
                  {"skipped", c.skipped}});
  }
  nlohmann::json j = {{"C", C}, {"m_grid", m_grid}, {"N_grid", N_grid}, {"cells", cs}, {"value", value}};
  j["argmax"] = cells.empty() ? nlohmann::json(nullptr) : nlohmann::json({{"m", cells[argmax].m}, {"N", cells[argmax].N}});
  return j;
}

UcpResult uniform_covering_parameter(const Sequence& seq, double C, const std::vector<std::int64_t>& m_grid,
                                     const std::vector<std::int64_t>& N_grid, const CoveringOptions& opt) {
  if (!(C > 0.0)) throw ArgumentError("C must be positive");
  if (m_grid.empty() || N_grid.empty()) throw ArgumentError("grids must be nonempty");
  const int d = seq.d();
  UcpResult res;
  res.C = C;
  res.m_grid = m_grid;
  res.N_grid = N_grid;
  for (std::int64_t m : m_grid) {
    if (m < 0) throw ArgumentError("offsets m must be >= 0");
    for (std::int64_t N : N_grid) {
      if (N < 1) throw ArgumentError("scales N must be >= 1");
      UcpCell cell;
      cell.m = m;
      cell.N = N;
      const double cn = std::floor(C * static_cast<double>(N));
      cell.count = static_cast<std::int64_t>(cn);
      if (cell.count < 1 || static_cast<double>(m) + cn > static_cast<double>(opt.budget)) {
        cell.skipped = true;
        res.cells.push_back(cell);
        continue;
      }
      std::vector<double> flat(static_cast<std::size_t>(cell.count) * seq.dim());
      parallel_for(
          static_cast<std::size_t>(cell.count),
          [&](std::size_t i) { seq.term_into(m + 1 + static_cast<std::int64_t>(i), flat.data() + i * seq.dim()); },
          4096);
      const auto r = covering_radius(flat, d, opt.mode, opt.net_mesh);
      cell.radius = r.value;
      cell.resolution = r.resolution;
      cell.value = std::pow(static_cast<double>(N), 1.0 / d) * r.value;
      res.cells.push_back(cell);
    }
  }
  bool any = false;
  for (std::size_t i = 0; i < res.cells.size(); ++i) {
    if (res.cells[i].skipped) continue;
    if (!any || res.cells[i].value > res.value) {
      res.value = res.cells[i].value;
      res.argmax = i;
      any = true;
    }
  }
  return res;
}

nlohmann::json CriterionResult::to_json() const {
  nlohmann::json cs = nlohmann::json::array();
  for (const auto& c : cells) {
    cs.push_back({{"eps", c.eps},
                  {"W", c.W},
                  {"multiplier", c.multiplier},
                  {"h", c.h},
                  {"x", c.x},
                  {"count", c.count},
                  {"R_d", c.radius},
                  {"value", c.value},
                  {"skipped", c.skipped}});
  }
  nlohmann::json j;
  j["grids"] = {{"eps", params.eps_grid}, {"h_multipliers", params.h_multipliers}};
  j["constants"] = {{"V", params.V.to_json()}, {"K", params.K}, {"c_U", params.c_U}, {"kappa_U", params.kappa_U}};
  j["cells"] = cs;
  j["sup"] = sup;
  j["argmax"] = cells.empty() ? nlohmann::json(nullptr)
                              : nlohmann::json({{"eps", cells[argmax].eps}, {"h", cells[argmax].h}});
  return j;
}

std::string CriterionResult::to_csv() const {
  std::string s = "eps,h,x,R_d,value\n";
  char buf[160];
  for (const auto& c : cells) {
    if (c.skipped) {
      std::snprintf(buf, sizeof(buf), "%.17g,%lld,%.17g,,\n", c.eps, static_cast<long long>(c.h), c.x);
    } else {
      std::snprintf(buf, sizeof(buf), "%.17g,%lld,%.17g,%.17g,%.17g\n", c.eps, static_cast<long long>(c.h), c.x,
                    c.radius, c.value);
    }
    s += buf;
  }
  return s;
}

CriterionResult criterion_2b(const Sequence& seq, const CriterionParams& params, const CoveringOptions& opt) {
  if (params.eps_grid.empty() || params.h_multipliers.empty()) throw ArgumentError("grids must be nonempty");
  if (!(params.K > 0.0 && params.c_U > 0.0 && params.kappa_U > 0.0)) {
    throw ArgumentError("criterion constants must be positive");
  }
  const int d = seq.d();
  CriterionResult res;
  res.params = params;
  for (double eps : params.eps_grid) {
    if (!(eps > 0.0)) throw ArgumentError("eps values must be positive");
    const double W = params.c_U * params.V(params.kappa_U * eps);
    for (double mult : params.h_multipliers) {
      if (!(mult >= 1.0)) throw ArgumentError("h multipliers must be >= 1 (the constraint is h >= W)");
      CriterionCell c;
      c.eps = eps;
      c.W = W;
      c.multiplier = mult;
      c.h = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(mult * W)));
      c.x = params.K * std::pow(static_cast<double>(c.h), d) * W;
      try {
        const WindowSet w = make_window(seq, c.h, c.x, opt.budget);
        c.count = w.count;
        c.radius = window_radius(w, opt);
        c.value = static_cast<double>(c.h) / eps * c.radius;
      } catch (const BudgetExceeded&) {
        c.skipped = true;
      }
      res.cells.push_back(c);
    }
  }
  bool any = false;
  for (std::size_t i = 0; i < res.cells.size(); ++i) {
    if (res.cells[i].skipped) continue;
    if (!any || res.cells[i].value > res.sup) {
      res.sup = res.cells[i].value;
      res.argmax = i;
      any = true;
    }
  }
  return res;
}

nlohmann::json DefvisiResult::to_json() const {
  nlohmann::json inner_j = nlohmann::json::array();
  for (double v : inner) inner_j.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr));
  return {{"eps_grid", eps_grid},
          {"x_grid", x_grid},
          {"h_cap", h_cap},
          {"inner_sup", inner_j},
          {"h_samples", h_samples},
          {"V_sup", V_sup},
          {"V_min", V_min},
          {"inner_nonincreasing", inner_nonincreasing}};
}

DefvisiResult visibility_from_covering(const Sequence& seq, const std::vector<double>& eps_grid,
                                       const std::vector<double>& x_grid, std::int64_t h_cap,
                                       const CoveringOptions& opt) {
  if (eps_grid.empty() || x_grid.empty()) throw ArgumentError("grids must be nonempty");
  if (h_cap < 1) throw ArgumentError("h_cap must be >= 1");
  const int d = seq.d();
  DefvisiResult res;
  res.eps_grid = eps_grid;
  res.x_grid = x_grid;
  res.h_cap = h_cap;
  for (double x : x_grid) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw ArgumentError("x grid values must be finite and >= 0");
    // Geometric h samples in (x, h_cap].
    std::vector<std::int64_t> hs;
    for (auto h = static_cast<std::int64_t>(std::floor(x)) + 1; h <= h_cap; h *= 2) hs.push_back(h);
    if (!hs.empty() && hs.back() != h_cap) hs.push_back(h_cap);
    double sup = hs.empty() ? kInf : 0.0;
    std::vector<std::int64_t> used;
    for (std::int64_t h : hs) {
      try {
        const WindowSet w = make_window(seq, h, std::pow(static_cast<double>(h), d) * x, opt.budget);
        sup = std::max(sup, static_cast<double>(h) * window_radius(w, opt));
        used.push_back(h);
      } catch (const BudgetExceeded&) {
        break;
      }
    }
    if (used.empty()) sup = kInf;
    res.inner.push_back(sup);
    res.h_samples.push_back(used);
  }
  for (double eps : eps_grid) {
    double vs = 0.0;
    double vm = 0.0;
    bool any = false;
    for (std::size_t j = 0; j < x_grid.size(); ++j) {
      if (!(res.inner[j] <= eps)) continue;
      vs = std::max(vs, x_grid[j]);
      vm = any ? std::min(vm, x_grid[j]) : x_grid[j];
      any = true;
    }
    res.V_sup.push_back(vs);
    res.V_min.push_back(vm);
  }
  std::vector<std::pair<double, double>> by_x;
  for (std::size_t j = 0; j < x_grid.size(); ++j) by_x.emplace_back(x_grid[j], res.inner[j]);
  std::sort(by_x.begin(), by_x.end());
  res.inner_nonincreasing = true;
  for (std::size_t j = 1; j < by_x.size(); ++j) {
    if (std::isfinite(by_x[j].second) && by_x[j].second > by_x[j - 1].second * (1 + 1e-12)) {
      res.inner_nonincreasing = false;
    }
  }
  return res;
}

}  // namespace spiral
