#include "spiral/visibility.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>

#include "spiral/errors.hpp"
#include "spiral/parallel.hpp"

namespace spiral {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> scaled(std::span<const double> v, double s) {
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x *= s;
  return out;
}

double max_of(const std::vector<double>& xs) {
  double m = 0.0;
  for (double x : xs) m = std::max(m, x);
  return m;
}

void require_eps(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw ArgumentError("eps must lie in (0, 1)");
}

void require_V(double V) {
  if (!(V > 0.0) || !std::isfinite(V)) throw ArgumentError("visibility value V must be positive and finite");
}

void require_net(const DirectionNet& net, int d, double required) {
  if (net.sphere_dim() != d) throw ArgumentError("direction net dimension does not match the point set");
  if (net.mesh() > required * (1 + 1e-12)) throw NetTooCoarse(net.mesh(), required);
}

// Per-item outcome of a segment check.
struct ItemResult {
  bool done = false;
  bool found = false;
  HitWitness hit;
  std::string route;
};

}  // namespace

SpiralIndexCache::SpiralIndexCache(std::shared_ptr<const PointSource> src, std::int64_t budget)
    : src_(std::move(src)), budget_(budget) {
  if (!src_) throw ArgumentError("null point source");
}

const ShellIndex& SpiralIndexCache::ensure(double R) {
  if (idx_ && idx_->coverage_radius() >= R) return *idx_;
  double target = R;
  if (idx_) target = std::max(R, 1.25 * idx_->coverage_radius());
  const IndexRange want = annulus_index_range(0.0, target, src_->d());
  if (want.hi > budget_ && idx_ == nullptr) target = R;
  if (want.hi > budget_) target = R;
  idx_ = std::make_unique<ShellIndex>(index_ball(*src_, target, budget_));
  return *idx_;
}

LineParam::LineParam(double lambda_, UnitVector v_, UnitVector w_, double t0_, double t1_)
    : lambda(lambda_), v(std::move(v_)), w(std::move(w_)), t0(t0_), t1(t1_) {
  if (v.dim() != w.dim()) throw ArgumentError("line directions differ in dimension");
  if (std::abs(v.dot(w)) > 1e-10) throw ArgumentError("line directions v and w must be orthogonal");
  if (!(lambda >= 0.0)) throw ArgumentError("line offset lambda must be >= 0");
  if (!(t1 > t0)) throw ArgumentError("degenerate line window: t1 must exceed t0");
}

LineParam LineParam::through(std::span<const double> x, const UnitVector& w, double s0, double s1) {
  if (x.size() != w.dim()) throw ArgumentError("point and direction differ in dimension");
  const double s = dot(x, w.coords());
  std::vector<double> perp(x.begin(), x.end());
  for (std::size_t i = 0; i < perp.size(); ++i) perp[i] -= s * w[i];
  const double lam = norm(perp);
  if (lam > 1e-12 * std::max(1.0, norm(x))) {
    // Re-orthogonalize after normalizing to keep |v.w| at rounding level.
    std::vector<double> v = scaled(perp, 1.0 / lam);
    const double c = dot(v, w.coords());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c * w[i];
    return LineParam(lam, UnitVector(v), w, s + s0, s + s1);
  }
  std::size_t k = 0;
  for (std::size_t i = 1; i < w.dim(); ++i) {
    if (std::abs(w[i]) < std::abs(w[k])) k = i;
  }
  std::vector<double> v(w.dim(), 0.0);
  v[k] = 1.0;
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= w[k] * w[i];
  return LineParam(0.0, UnitVector(v), w, s + s0, s + s1);
}

std::vector<double> LineParam::at(double t) const {
  std::vector<double> p(v.dim());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = lambda * v[i] + t * w[i];
  return p;
}

nlohmann::json LineParam::to_json() const {
  return {{"lambda", lambda},
          {"v", std::vector<double>(v.coords().begin(), v.coords().end())},
          {"w", std::vector<double>(w.coords().begin(), w.coords().end())},
          {"t0", t0},
          {"t1", t1}};
}

std::string to_string(VisibilityKind k) {
  switch (k) {
    case VisibilityKind::Orchard:
      return "orchard";
    case VisibilityKind::Uniform:
      return "uniform";
    case VisibilityKind::Forest:
      return "forest";
  }
  return "unknown";
}

VisibilityKind parse_visibility_kind(const std::string& s) {
  if (s == "orchard") return VisibilityKind::Orchard;
  if (s == "uniform") return VisibilityKind::Uniform;
  if (s == "forest") return VisibilityKind::Forest;
  throw ArgumentError("unknown visibility kind '" + s + "'");
}

std::string to_string(CheckRoute r) {
  switch (r) {
    case CheckRoute::Direct:
      return "direct";
    case CheckRoute::Certificate:
      return "certificate";
    case CheckRoute::Both:
      return "both";
  }
  return "unknown";
}

CheckRoute parse_check_route(const std::string& s) {
  if (s == "direct") return CheckRoute::Direct;
  if (s == "certificate") return CheckRoute::Certificate;
  if (s == "both") return CheckRoute::Both;
  throw ArgumentError("unknown check route '" + s + "'");
}

nlohmann::json VisibilityReport::to_json() const {
  nlohmann::json j;
  j["property"] = property;
  j["spec"] = spec;
  j["eps"] = eps;
  j["V"] = V;
  j["t0_list"] = t0_list;
  j["constants"] = {{"route", route},
                    {"K", K},
                    {"kappa", kappa},
                    {"implied_K", implied_K},
                    {"implied_kappa", implied_kappa}};
  if (has_net) {
    j["net"] = {{"delta", net_mesh}, {"count", net_count}, {"seed", net_seed}, {"required_delta", required_mesh}};
  } else {
    j["net"] = nullptr;
  }
  j["certified_tolerance"] = certified_tolerance;
  j["checked"] = checked;
  j["failed"] = failed;
  j["aborted"] = aborted;
  j["passed"] = passed();
  nlohmann::json fs = nlohmann::json::array();
  for (const auto& f : failures) {
    fs.push_back({{"item", f.item},
                  {"direction", f.direction},
                  {"t0", f.t0},
                  {"min_distance", f.min_distance ? nlohmann::json(*f.min_distance) : nlohmann::json(nullptr)}});
  }
  j["failures"] = fs;
  j["failures_truncated"] = failures.size() < failed;
  nlohmann::json ws = nlohmann::json::array();
  for (const auto& w : witnesses) {
    ws.push_back({{"item", w.item},
                  {"t0", w.t0},
                  {"n", w.hit.n},
                  {"t", w.hit.t},
                  {"distance", w.hit.distance},
                  {"route", w.route}});
  }
  j["witnesses"] = ws;
  j["witnesses_truncated"] = witnesses.size() < checked - failed;
  return j;
}

double required_net_mesh(double eps, double V, double t0_max) { return eps / (4.0 * (t0_max + V)); }

std::optional<double> min_distance_to_segment(SpiralIndexCache& cache, std::span<const double> a,
                                              std::span<const double> b, double start, double cap) {
  const double reach = std::max(norm(a), norm(b));
  for (double r = std::max(start, 1e-9);; r *= 2.0) {
    const double rr = std::min(r, cap);
    const ShellIndex& idx = cache.ensure(reach + rr);
    const auto hits = idx.within_segment(a, b, rr);
    if (!hits.empty()) {
      double m = kInf;
      for (const auto& h : hits) m = std::min(m, h.distance);
      return m;
    }
    if (rr >= cap) return std::nullopt;
  }
}

namespace {

// Shared driver: items are segments [a_i, b_i] with an absolute parameter
// offset t0_i; result slot i holds the smallest-n witness.
struct SegmentItem {
  std::vector<double> a;
  std::vector<double> b;
  double t0;
  std::size_t item;
  std::vector<double> direction;
};

void finish_report(VisibilityReport& rep, std::vector<SegmentItem>& items, std::vector<ItemResult>& results,
                   SpiralIndexCache& cache, const CheckOptions& opt) {
  rep.checked = items.size();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!results[i].done) {
      rep.aborted = true;
      continue;
    }
    if (results[i].found) {
      if (rep.witnesses.size() < opt.max_listed) {
        rep.witnesses.push_back({items[i].item, items[i].t0, results[i].hit, results[i].route});
      }
      continue;
    }
    ++rep.failed;
    if (rep.failures.size() < opt.max_listed) {
      CheckFailure f;
      f.item = items[i].item;
      f.direction = items[i].direction;
      f.t0 = items[i].t0;
      if (opt.failure_distances) {
        f.min_distance = min_distance_to_segment(cache, items[i].a, items[i].b, rep.eps, std::max(1.0, 64.0 * rep.eps));
      }
      rep.failures.push_back(std::move(f));
    }
  }
}

void run_items(const ShellIndex& idx, const std::vector<SegmentItem>& items, std::vector<ItemResult>& results,
               double eps, const CheckOptions& opt,
               const std::function<void(std::size_t, ItemResult&)>& extra) {
  results.assign(items.size(), ItemResult{});
  std::atomic<bool> stop{false};
  parallel_for(
      items.size(),
      [&](std::size_t i) {
        if (opt.fail_fast && stop.load(std::memory_order_relaxed)) return;
        ItemResult& r = results[i];
        if (auto hit = idx.first_index_within_segment(items[i].a, items[i].b, eps)) {
          r.found = true;
          r.hit = *hit;
          r.hit.t += items[i].t0;
          r.route = "direct";
        }
        if (extra) extra(i, r);
        r.done = true;
        if (!r.found && opt.fail_fast) stop.store(true, std::memory_order_relaxed);
      },
      16);
}

VisibilityReport net_check(SpiralIndexCache& cache, bool uniform, double eps, double V,
                           const std::vector<double>& t0_list, const DirectionNet& net, const CheckOptions& opt) {
  require_eps(eps);
  require_V(V);
  if (t0_list.empty()) throw ArgumentError("t0 list must be nonempty");
  for (double t0 : t0_list) {
    if (!(t0 >= 0.0) || !std::isfinite(t0)) throw ArgumentError("t0 values must be finite and >= 0");
  }
  const PointSource& src = cache.source();
  const int d = src.d();
  const double t0_max = max_of(t0_list);
  const double required = required_net_mesh(eps, V, t0_max);
  require_net(net, d, required);
  const bool use_direct = opt.route != CheckRoute::Certificate;
  const bool use_cert = opt.route != CheckRoute::Direct;
  if (uniform && use_cert) throw ArgumentError("the certificate route applies to the plain orchard check only");
  if (!(opt.K > 0.0 && opt.kappa > 0.0)) throw ArgumentError("certificate constants must be positive");

  VisibilityReport rep;
  rep.property = uniform ? "uniform-orchard" : "orchard";
  rep.spec = src.describe();
  rep.eps = eps;
  rep.V = V;
  rep.t0_list = t0_list;
  rep.has_net = true;
  rep.net_mesh = net.mesh();
  rep.net_count = net.size();
  rep.net_seed = net.seed();
  rep.required_mesh = required;
  rep.certified_tolerance = eps + (t0_max + V) * net.mesh();
  rep.route = to_string(opt.route);
  rep.K = opt.K;
  rep.kappa = opt.kappa;

  const double e1 = d + 1.0;
  const double n_cap = opt.K * std::pow(V, e1);
  const double R_cert = std::pow(opt.K, 1.0 / e1) * V;
  double reach = t0_max + V + eps;
  if (use_cert) reach = std::max(use_direct ? reach : 0.0, R_cert + opt.kappa * eps);
  const ShellIndex& idx = cache.ensure(reach);

  std::vector<SegmentItem> items;
  items.reserve(net.size() * t0_list.size());
  for (std::size_t i = 0; i < net.size(); ++i) {
    const auto c = net.center(i);
    for (double t0 : t0_list) {
      SegmentItem it;
      it.a = scaled(c, t0);
      it.b = scaled(c, t0 + V);
      it.t0 = t0;
      it.item = i;
      it.direction.assign(c.begin(), c.end());
      items.push_back(std::move(it));
    }
  }

  std::vector<ItemResult> results;
  std::vector<double> angle_scaled(items.size(), 0.0);
  auto certificate = [&](std::size_t i, ItemResult& r) {
    const auto v = net.center(items[i].item);
    if (r.found) {
      // Constants implied by the direct witness.
      const auto p = src.point(r.hit.n);
      const double rn = norm(p);
      angle_scaled[i] = rn * geodesic_distance(scaled(p, 1.0 / rn), v) / eps;
      return;
    }
    if (!use_cert) return;
    const std::vector<double> origin(v.size(), 0.0);
    const std::vector<double> end = scaled(v, R_cert);
    const double bound = opt.kappa * eps;
    ShellIndex::Filter filter = [&](std::int64_t n, std::span<const double> p) {
      if (static_cast<double>(n) > n_cap) return false;
      const double rn = norm(p);
      return rn * geodesic_distance(scaled(p, 1.0 / rn), v) <= bound;
    };
    if (auto hit = idx.first_index_within_segment(origin, end, bound, &filter)) {
      r.found = true;
      r.hit = *hit;
      r.route = "certificate";
    }
  };

  if (use_direct) {
    run_items(idx, items, results, eps, opt, certificate);
  } else {
    results.assign(items.size(), ItemResult{});
    std::atomic<bool> stop{false};
    parallel_for(
        items.size(),
        [&](std::size_t i) {
          if (opt.fail_fast && stop.load(std::memory_order_relaxed)) return;
          certificate(i, results[i]);
          results[i].done = true;
          if (!results[i].found && opt.fail_fast) stop.store(true);
        },
        16);
  }

  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!results[i].found || results[i].route != "direct") continue;
    rep.implied_K = std::max(rep.implied_K, static_cast<double>(results[i].hit.n) / std::pow(V, e1));
    rep.implied_kappa = std::max(rep.implied_kappa, angle_scaled[i]);
  }
  finish_report(rep, items, results, cache, opt);
  return rep;
}

}  // namespace

VisibilityReport check_orchard(SpiralIndexCache& cache, double eps, double V, const DirectionNet& net,
                               const CheckOptions& options) {
  return net_check(cache, false, eps, V, {0.0}, net, options);
}

VisibilityReport check_uniform_orchard(SpiralIndexCache& cache, double eps, double V,
                                       const std::vector<double>& t0_list, const DirectionNet& net,
                                       const CheckOptions& options) {
  return net_check(cache, true, eps, V, t0_list, net, options);
}

VisibilityReport check_dense_forest(SpiralIndexCache& cache, double eps, double V,
                                    const std::vector<LineParam>& lines, const CheckOptions& options) {
  require_eps(eps);
  require_V(V);
  if (options.route != CheckRoute::Direct) throw ArgumentError("dense-forest checks use the direct route only");
  const PointSource& src = cache.source();
  VisibilityReport rep;
  rep.property = "dense-forest";
  rep.spec = src.describe();
  rep.eps = eps;
  rep.V = V;
  rep.certified_tolerance = eps;
  rep.route = "direct";
  double reach = 0.0;
  std::vector<SegmentItem> items;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const LineParam& l = lines[i];
    if (l.v.sphere_dim() != src.d()) throw ArgumentError("line dimension does not match the point set");
    if (std::abs((l.t1 - l.t0) - V) > 1e-9 * std::max(1.0, V)) {
      throw ArgumentError("line window length must equal V");
    }
    SegmentItem it;
    it.a = l.at(l.t0);
    it.b = l.at(l.t1);
    it.t0 = l.t0;
    it.item = i;
    it.direction.assign(l.w.coords().begin(), l.w.coords().end());
    reach = std::max({reach, norm(it.a), norm(it.b)});
    items.push_back(std::move(it));
  }
  const ShellIndex& idx = cache.ensure(reach + eps);
  std::vector<ItemResult> results;
  run_items(idx, items, results, eps, options, nullptr);
  finish_report(rep, items, results, cache, options);
  return rep;
}

bool eqvisi_check(const Sequence& seq, std::int64_t n, double lambda, double t, const UnitVector& v,
                  const UnitVector& w, double eps, double c) {
  if (v.dim() != seq.dim() || w.dim() != seq.dim()) throw ArgumentError("direction dimension mismatch");
  if (std::abs(v.dot(w)) > 1e-10) throw ArgumentError("v and w must be orthogonal");
  if (!(lambda >= 0.0)) throw ArgumentError("lambda must be >= 0");
  const double rho = std::hypot(lambda, t);
  if (!(rho > 0.0)) throw ArgumentError("(lambda, t) must not both vanish");
  if (std::abs(spiral_radius(n, seq.d()) - rho) > eps) return false;
  std::vector<double> target(v.dim());
  for (std::size_t i = 0; i < target.size(); ++i) target[i] = (lambda * v[i] + t * w[i]) / rho;
  std::vector<double> u(seq.dim());
  seq.term_into(n, u.data());
  return geodesic_distance(u, target) <= c * eps / rho;
}

bool eqvisi_check(const SequenceSpec& spec, std::int64_t n, double lambda, double t, const UnitVector& v,
                  const UnitVector& w, double eps, double c) {
  return eqvisi_check(Sequence(spec), n, lambda, t, v, w, eps, c);
}

double ray_halfline_distance(std::span<const double> x, std::span<const double> v, std::span<const double> c,
                             double s0) {
  const std::size_t n = x.size();
  std::vector<double> w0(n);
  for (std::size_t i = 0; i < n; ++i) w0[i] = x[i] - s0 * c[i];
  const double wc = dot(w0, c);
  const double wv = dot(w0, v);
  const double b = dot(v, c);
  auto value = [&](double t, double s) {
    double q = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double y = w0[i] + t * v[i] - s * c[i];
      q += y * y;
    }
    return std::sqrt(q);
  };
  double best = value(0.0, std::max(0.0, wc));
  best = std::min(best, value(std::max(0.0, -wv), 0.0));
  const double det = 1.0 - b * b;
  if (det > 1e-14) {
    const double t = (b * wc - wv) / det;
    const double s = wc + t * b;
    if (t >= 0.0 && s >= 0.0) best = std::min(best, value(t, s));
  } else if (b > 0.0) {
    // Parallel, same orientation: the distance tends to the perpendicular offset.
    std::vector<double> perp(w0);
    for (std::size_t i = 0; i < n; ++i) perp[i] -= wc * c[i];
    best = std::min(best, norm(perp));
  }
  return best;
}

nlohmann::json VisibleVerdict::to_json() const {
  return {{"direction", direction},
          {"min_distance", min_distance ? nlohmann::json(*min_distance) : nlohmann::json(nullptr)},
          {"nearest_n", nearest_n},
          {"nearest_t", nearest_t},
          {"lower_bound", lower_bound},
          {"scanned_T", scanned_T},
          {"complete", complete},
          {"eps_visible", eps_visible},
          {"certified", certified},
          {"certified_bound", certified_bound},
          {"certificate", certificate}};
}

namespace {

VisibleVerdict scan_ray(const PointSource& src, std::span<const double> x, const UnitVector& dir, double eps_floor,
                        double T_max, const VisibleOptions& opt) {
  const std::size_t dm = src.dim();
  const double D = opt.search_radius > 0.0 ? opt.search_radius : std::max(4.0 * eps_floor, 1.0);
  const double stop = opt.stop_below > 0.0 ? opt.stop_below : eps_floor;
  const std::vector<double> a(x.begin(), x.end());
  std::vector<double> b(a);
  for (std::size_t i = 0; i < dm; ++i) b[i] += T_max * dir[i];
  const double tc = -dot(a, dir.coords());
  const double h = std::sqrt(std::max(0.0, dot(a, a) - tc * tc));
  const double rmin = std::hypot(std::clamp(tc, 0.0, T_max) - tc, h);
  const double rmax = std::max(norm(a), norm(b));
  const double xr = norm(a);
  const double self_tol = 1e-12 * std::max(1.0, xr);

  VisibleVerdict out;
  out.direction.assign(dir.coords().begin(), dir.coords().end());
  IndexRange range = annulus_index_range(std::max(0.0, rmin - D), rmax + D, src.d());
  if (auto len = src.length()) range.hi = std::min(range.hi, *len);

  double best = kInf;
  std::int64_t best_n = 0;
  double best_t = 0.0;
  bool stopped = false;
  bool budget_hit = false;
  std::int64_t n = range.lo;
  std::int64_t scanned_hi = range.lo - 1;
  std::int64_t block = 1 << 16;
  while (n <= range.hi) {
    std::int64_t hi = std::min(range.hi, n + block - 1);
    if (hi > opt.budget) {
      hi = opt.budget;
      budget_hit = true;
      if (hi < n) break;
    }
    const PointChunk chunk = generate_chunk(src, n, hi);
    for (std::int64_t i = 0; i < chunk.size(); ++i) {
      const auto p = chunk.point(i);
      if (distance(p, a) <= self_tol) continue;
      double t = 0.0;
      const double dist = segment_distance(p, a, b, &t);
      if (dist < best) {
        best = dist;
        best_n = chunk.n_lo + i;
        best_t = t;
      }
    }
    scanned_hi = hi;
    n = hi + 1;
    block = std::min<std::int64_t>(block * 2, 1 << 20);
    if (budget_hit) break;
    if (!opt.exhaustive && best < stop) {
      stopped = n <= range.hi;
      break;
    }
  }

  out.complete = !stopped && !budget_hit;
  if (out.complete) {
    out.scanned_T = T_max;
  } else {
    // Ray positions whose D-neighbourhood lies inside the examined ball.
    const double rho = scanned_hi >= 1 ? spiral_radius(scanned_hi, src.d()) - D : 0.0;
    out.scanned_T = (rho >= xr) ? std::min(T_max, tc + std::sqrt(std::max(0.0, (rho - h) * (rho + h)))) : 0.0;
  }
  if (best <= D) {
    out.min_distance = best;
    out.nearest_n = best_n;
    out.nearest_t = best_t;
    out.lower_bound = best;
  } else {
    out.lower_bound = D;
  }
  out.eps_visible = out.complete && out.lower_bound >= eps_floor;

  // Proven vacant regions.
  const nlohmann::json desc = src.describe();
  const std::string kind = desc.value("kind", std::string());
  if (kind == "rational-ladder" && dm == 2 && std::abs(dir[1]) == 0.0) {
    // Every point has y = 0 or |y| >= pi/sqrt(2): for k >= 4 the radius is at
    // least sqrt(k(k+1)/2) and a nonzero |sin(2 pi p/k)| is at least sin(pi/k),
    // whose product stays above pi/sqrt(2); k <= 3 is checked by hand.
    const double strip = std::numbers::pi / std::numbers::sqrt2;
    const double y0 = std::abs(x[1]);
    if (y0 > 0.0 && y0 < strip) {
      out.certified = true;
      out.certified_bound = std::min(y0, strip - y0);
      out.certificate = "vacant-strip";
    }
  } else if (kind == "constant" && src.single_ray()) {
    const auto c = src.point(1);
    bool x_on_set = false;
    const double bound = ray_halfline_distance(x, dir.coords(), c, 1.0);
    // x itself is excluded from Y, so a ray starting on the set is not certified here.
    const double s = dot(x, c);
    std::vector<double> off(a);
    for (std::size_t i = 0; i < dm; ++i) off[i] -= s * c[i];
    x_on_set = s >= 1.0 - 1e-12 && norm(off) <= self_tol;
    if (!x_on_set && bound > 1e-12) {
      out.certified = true;
      out.certified_bound = bound;
      out.certificate = "single-ray";
    }
  }
  return out;
}

}  // namespace

std::vector<VisibleVerdict> visible_point_test(const PointSource& src, std::span<const double> x,
                                               const std::vector<UnitVector>& directions, double eps_floor,
                                               double T_max, const VisibleOptions& options) {
  if (!(eps_floor > 0.0)) throw ArgumentError("eps_floor must be positive");
  if (!(T_max > 0.0) || !std::isfinite(T_max)) throw ArgumentError("T_max must be positive and finite");
  if (x.size() != src.dim()) throw ArgumentError("query point dimension mismatch");
  std::vector<VisibleVerdict> out;
  out.reserve(directions.size());
  for (const auto& v : directions) {
    if (v.dim() != src.dim()) throw ArgumentError("direction dimension mismatch");
    out.push_back(scan_ray(src, x, v, eps_floor, T_max, options));
  }
  return out;
}

std::vector<VisibleVerdict> visible_point_test(const PointSource& src, std::span<const double> x,
                                               const DirectionNet& directions, double eps_floor, double T_max,
                                               const VisibleOptions& options) {
  std::vector<UnitVector> dirs;
  dirs.reserve(directions.size());
  for (std::size_t i = 0; i < directions.size(); ++i) dirs.push_back(directions.center_vector(i));
  return visible_point_test(src, x, dirs, eps_floor, T_max, options);
}

nlohmann::json VisibilityCurve::to_json() const {
  nlohmann::json es = nlohmann::json::array();
  for (const auto& e : entries) {
    es.push_back({{"eps", e.eps},
                  {"V_hat", e.status == "ok" ? nlohmann::json(e.V_hat) : nlohmann::json(nullptr)},
                  {"status", e.status},
                  {"witnesses", e.witnesses},
                  {"net_count", e.net_count},
                  {"V_tested", e.V_tested}});
  }
  nlohmann::json j = {{"kind", kind}, {"entries", es}};
  if (has_fit) {
    j["fit"] = {{"slope", slope}, {"intercept", intercept}};
  } else {
    j["fit"] = nullptr;
  }
  j["scaled_range"] = {scaled_min, scaled_max};
  return j;
}

std::string VisibilityCurve::to_csv() const {
  std::string s = "eps,V_hat,status\n";
  char buf[96];
  for (const auto& e : entries) {
    if (e.status == "ok") {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%s\n", e.eps, e.V_hat, e.status.c_str());
    } else {
      std::snprintf(buf, sizeof(buf), "%.17g,,%s\n", e.eps, e.status.c_str());
    }
    s += buf;
  }
  return s;
}

namespace {

// Largest first-entry offset over all (direction, t0) pairs; empty when some
// pair has no entry within V.
std::optional<double> worst_entry(const ShellIndex& idx, const DirectionNet& net, const std::vector<double>& t0s,
                                  double eps, double V) {
  std::vector<double> need(net.size(), 0.0);
  const bool ok = parallel_all_of(
      net.size(),
      [&](std::size_t i) {
        const auto c = net.center(i);
        double worst = 0.0;
        for (double t0 : t0s) {
          const auto e = idx.first_entry_along_segment(scaled(c, t0), scaled(c, t0 + V), eps);
          if (!e) return false;
          worst = std::max(worst, e->entry);
        }
        need[i] = worst;
        return true;
      },
      16);
  if (!ok) return std::nullopt;
  return max_of(need);
}

}  // namespace

VisibilityCurve estimate_min_visibility(SpiralIndexCache& cache, VisibilityKind kind,
                                        const std::vector<double>& eps_grid, const EstimateOptions& opt) {
  if (eps_grid.empty()) throw ArgumentError("eps grid must be nonempty");
  for (std::size_t i = 0; i < eps_grid.size(); ++i) {
    require_eps(eps_grid[i]);
    if (i > 0 && !(eps_grid[i] < eps_grid[i - 1])) throw ArgumentError("eps grid must be strictly decreasing");
  }
  const int d = cache.source().d();
  VisibilityCurve curve;
  curve.kind = to_string(kind);
  const std::vector<double> t0s = kind == VisibilityKind::Orchard ? std::vector<double>{0.0} : opt.t0_list;
  if (t0s.empty()) throw ArgumentError("t0 list must be nonempty");
  const double t0_max = max_of(t0s);
  if (kind == VisibilityKind::Forest && opt.lines.empty()) throw ArgumentError("forest estimation needs lines");

  for (double eps : eps_grid) {
    CurveEntry entry;
    entry.eps = eps;
    entry.status = "diverged";
    if (kind == VisibilityKind::Forest) {
      // Entry offsets are exact; no net and no doubling needed.
      double reach = 0.0;
      for (const auto& l : opt.lines) reach = std::max({reach, norm(l.at(l.t0)), norm(l.at(l.t0 + opt.V_cap))});
      try {
        const ShellIndex& idx = cache.ensure(reach + eps);
        std::vector<double> need(opt.lines.size(), kInf);
        parallel_for(opt.lines.size(), [&](std::size_t i) {
          const auto& l = opt.lines[i];
          if (auto e = idx.first_entry_along_segment(l.at(l.t0), l.at(l.t0 + opt.V_cap), eps)) need[i] = e->entry;
        });
        const double worst = max_of(need);
        entry.V_tested = opt.V_cap;
        entry.witnesses = static_cast<std::size_t>(std::count_if(need.begin(), need.end(), [](double x) {
          return std::isfinite(x);
        }));
        if (std::isfinite(worst)) {
          entry.V_hat = worst;
          entry.status = "ok";
        }
      } catch (const BudgetExceeded&) {
      }
      curve.entries.push_back(entry);
      continue;
    }
    double V = opt.V0 / std::pow(eps, d);
    double V_lo = 0.0;
    while (V <= opt.V_cap) {
      const double mesh = required_net_mesh(eps, V, t0_max);
      const double predicted = d == 1 ? 2.0 * std::numbers::pi / mesh : net_count_bound(d) * std::pow(mesh, -d);
      if (predicted > static_cast<double>(opt.max_net)) break;
      entry.V_tested = V;
      try {
        const ShellIndex& idx = cache.ensure(t0_max + V + eps);
        const DirectionNet net = build_direction_net(d, mesh, opt.net_seed);
        entry.net_count = net.size();
        if (auto worst = worst_entry(idx, net, t0s, eps, V)) {
          entry.V_hat = std::max(V_lo, *worst);
          entry.witnesses = net.size() * t0s.size();
          entry.status = "ok";
          break;
        }
      } catch (const BudgetExceeded&) {
        break;
      } catch (const ArgumentError&) {
        break;
      }
      V_lo = V;
      V *= 2.0;
    }
    curve.entries.push_back(entry);
  }

  // Smaller eps never needs less visibility.
  double running = 0.0;
  for (auto& e : curve.entries) {
    if (e.status != "ok") continue;
    e.V_hat = std::max(e.V_hat, running);
    running = e.V_hat;
  }
  std::vector<std::pair<double, double>> pts;
  curve.scaled_min = kInf;
  curve.scaled_max = 0.0;
  for (const auto& e : curve.entries) {
    if (e.status != "ok" || !(e.V_hat > 0.0)) continue;
    pts.emplace_back(std::log(e.eps), std::log(e.V_hat));
    const double s = e.V_hat * std::pow(e.eps, d);
    curve.scaled_min = std::min(curve.scaled_min, s);
    curve.scaled_max = std::max(curve.scaled_max, s);
  }
  if (pts.empty()) curve.scaled_min = 0.0;
  if (pts.size() >= 2) {
    double mx = 0.0;
    double my = 0.0;
    for (auto [x, y] : pts) {
      mx += x;
      my += y;
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    double sxy = 0.0;
    double sxx = 0.0;
    for (auto [x, y] : pts) {
      sxy += (x - mx) * (y - my);
      sxx += (x - mx) * (x - mx);
    }
    if (sxx > 0.0) {
      curve.slope = sxy / sxx;
      curve.intercept = my - curve.slope * mx;
      curve.has_fit = true;
    }
  }
  return curve;
}

nlohmann::json Calibration::to_json() const {
  nlohmann::json rs = nlohmann::json::array();
  for (const auto& r : reports) rs.push_back(r.to_json());
  return {{"C", ok ? nlohmann::json(C) : nlohmann::json(nullptr)}, {"ok", ok}, {"steps", steps}, {"reports", rs}};
}

Calibration calibrate_constant(SpiralIndexCache& cache, VisibilityKind kind, const std::vector<double>& eps_list,
                               const std::vector<double>& t0_list, const std::vector<LineParam>& lines, double C0,
                               double C_cap, std::uint64_t net_seed) {
  if (eps_list.empty()) throw ArgumentError("calibration needs at least one eps");
  if (!(C0 > 0.0)) throw ArgumentError("starting constant must be positive");
  const int d = cache.source().d();
  Calibration cal;
  CheckOptions opt;
  opt.fail_fast = true;
  opt.failure_distances = false;
  const double t0_max = kind == VisibilityKind::Uniform ? max_of(t0_list) : 0.0;
  for (double C = C0; C <= C_cap; C *= 2.0) {
    ++cal.steps;
    std::vector<VisibilityReport> reports;
    bool all = true;
    try {
      for (double eps : eps_list) {
        const double V = C / std::pow(eps, d);
        VisibilityReport rep;
        if (kind == VisibilityKind::Forest) {
          std::vector<LineParam> ls;
          for (const auto& l : lines) ls.emplace_back(l.lambda, l.v, l.w, l.t0, l.t0 + V);
          rep = check_dense_forest(cache, eps, V, ls, opt);
        } else {
          const DirectionNet net = build_direction_net(d, required_net_mesh(eps, V, t0_max), net_seed);
          rep = kind == VisibilityKind::Orchard ? check_orchard(cache, eps, V, net, opt)
                                                : check_uniform_orchard(cache, eps, V, t0_list, net, opt);
        }
        const bool ok = rep.passed();
        reports.push_back(std::move(rep));
        if (!ok) {
          all = false;
          break;
        }
      }
    } catch (const BudgetExceeded&) {
      break;
    }
    if (all) {
      cal.C = C;
      cal.ok = true;
      cal.reports = std::move(reports);
      return cal;
    }
  }
  return cal;
}

}  // namespace spiral
