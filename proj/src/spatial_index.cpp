#include "spiral/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "spiral/errors.hpp"

namespace spiral {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Pruning slack; the final membership tests are exact.
constexpr double kRel = 1e-12;
constexpr double kAngleSlack = 1e-9;

double ball_volume(int dim, double r) {
  const double n = dim;
  return std::pow(std::numbers::pi, n / 2) / std::tgamma(n / 2 + 1) * std::pow(r, n);
}

double angle_of(double x, double y) {
  double a = std::atan2(y, x);
  if (a < 0.0) a += kTwoPi;
  if (a >= kTwoPi) a = 0.0;
  return a;
}

std::uint64_t clamp_cell(double x, std::uint64_t cells) {
  if (!(x > 0.0)) return 0;
  const double f = std::floor(x);
  if (f >= static_cast<double>(cells - 1)) return cells - 1;
  return static_cast<std::uint64_t>(f);
}

}  // namespace

double segment_distance(std::span<const double> p, std::span<const double> a, std::span<const double> b,
                        double* t_out) {
  const std::size_t n = p.size();
  double ll = 0.0;
  double proj = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = b[i] - a[i];
    ll += u * u;
    proj += (p[i] - a[i]) * u;
  }
  const double L = std::sqrt(ll);
  double s = 0.0;  // fraction along the segment
  if (ll > 0.0) s = std::clamp(proj / ll, 0.0, 1.0);
  double d2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double q = a[i] + s * (b[i] - a[i]);
    const double x = p[i] - q;
    d2 += x * x;
  }
  if (t_out) *t_out = s * L;
  return std::sqrt(d2);
}

struct ShellIndex::SegmentFrame {
  std::span<const double> a;
  std::span<const double> b;
  std::vector<double> u;
  double L = 0.0;
  double tc = 0.0;  // parameter of the closest approach of the line to the origin
  double h = 0.0;   // distance of the line to the origin

  SegmentFrame(std::span<const double> a_, std::span<const double> b_) : a(a_), b(b_), u(a_.size(), 0.0) {
    double ll = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      u[i] = b[i] - a[i];
      ll += u[i] * u[i];
    }
    L = std::sqrt(ll);
    if (L > 0.0) {
      for (double& x : u) x /= L;
    } else {
      u[0] = 1.0;
    }
    tc = -dot(a, u);
    double h2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double x = a[i] + tc * u[i];
      h2 += x * x;
    }
    h = std::sqrt(h2);
  }

  void at(double t, double* out) const {
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + t * u[i];
  }
  double radius_at(double t) const { return std::hypot(t - tc, h); }
};

ShellIndex::ShellIndex(int d, std::vector<std::int64_t> ids, std::vector<double> coords, IndexOptions options)
    : d_(d), w_(options.shell_width), coverage_(options.coverage_radius) {
  if (d < 1) throw ArgumentError("sphere dimension must be >= 1");
  const std::size_t dm = dim();
  if (ids.empty()) throw ArgumentError("cannot build an index over an empty point set");
  if (coords.size() != ids.size() * dm) throw ArgumentError("coordinate array does not match id count");
  if (ids.size() >= (std::size_t{1} << 32)) throw ArgumentError("too many points for one index");
  const std::size_t N = ids.size();

  std::vector<double> radii(N);
  for (std::size_t i = 0; i < N; ++i) {
    radii[i] = norm(std::span<const double>(coords).subspan(i * dm, dm));
    if (!std::isfinite(radii[i])) throw ArgumentError("non-finite point coordinates");
    max_radius_ = std::max(max_radius_, radii[i]);
  }
  if (!(w_ > 0.0)) {
    const double spacing = std::pow(ball_volume(d + 1, max_radius_) / static_cast<double>(N), 1.0 / (d + 1));
    w_ = 1.5 * spacing;
    if (!(w_ > 0.0) || !std::isfinite(w_)) w_ = 1.0;
  }
  // Keep the shell table and the per-shell cell grids bounded.
  w_ = std::max(w_, max_radius_ / 4e6);
  const std::size_t S = static_cast<std::size_t>(std::floor(max_radius_ / w_)) + 1;
  shells_.resize(S);
  for (std::size_t s = 0; s < S; ++s) {
    const double fs = static_cast<double>(s + 1);
    if (d == 1) {
      // Angle bins of arc length about w at the outer shell radius.
      shells_[s].cells = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::floor(kTwoPi * fs)));
      const double arc = (fs * w_) * kTwoPi / static_cast<double>(shells_[s].cells);
      resolution_ = std::max(resolution_, w_ + arc);
    } else {
      // Cube grid of side 2/G with G = 2(s+1): cells of size about w / R_outer.
      const auto g = static_cast<std::uint64_t>(2 * (s + 1));
      if (std::pow(static_cast<double>(g), d + 1) > 9e18) throw ArgumentError("index cell grid too fine");
      shells_[s].cells = g;
      const double side = 2.0 / static_cast<double>(g);
      resolution_ = std::max(resolution_, w_ + fs * w_ * side * std::sqrt(static_cast<double>(dm)));
    }
  }

  struct Slot {
    std::uint32_t shell;
    std::uint64_t key;
    std::uint32_t idx;
  };
  std::vector<Slot> slots(N);
  for (std::size_t i = 0; i < N; ++i) {
    const auto s = std::min<std::size_t>(S - 1, static_cast<std::size_t>(std::floor(radii[i] / w_)));
    slots[i] = {static_cast<std::uint32_t>(s), cell_key(s, std::span<const double>(coords).subspan(i * dm, dm)),
                static_cast<std::uint32_t>(i)};
  }
  radii.clear();
  radii.shrink_to_fit();
  std::sort(slots.begin(), slots.end(), [&](const Slot& x, const Slot& y) {
    if (x.shell != y.shell) return x.shell < y.shell;
    if (x.key != y.key) return x.key < y.key;
    return ids[x.idx] < ids[y.idx];
  });

  ids_.resize(N);
  coords_.resize(N * dm);
  std::size_t shell = 0;
  std::int64_t prev_max = std::numeric_limits<std::int64_t>::min();
  std::int64_t cur_min = std::numeric_limits<std::int64_t>::max();
  std::int64_t cur_max = std::numeric_limits<std::int64_t>::min();
  for (std::size_t j = 0; j < N; ++j) {
    const Slot& sl = slots[j];
    ids_[j] = ids[sl.idx];
    std::copy_n(coords.begin() + static_cast<std::ptrdiff_t>(sl.idx * dm), dm,
                coords_.begin() + static_cast<std::ptrdiff_t>(j * dm));
    while (shell < sl.shell) {
      shells_[shell].key_end = keys_.size();
      if (cur_min != std::numeric_limits<std::int64_t>::max()) {
        if (cur_min <= prev_max) radially_ordered_ = false;
        prev_max = std::max(prev_max, cur_max);
      }
      cur_min = std::numeric_limits<std::int64_t>::max();
      cur_max = std::numeric_limits<std::int64_t>::min();
      ++shell;
      shells_[shell].key_begin = keys_.size();
    }
    cur_min = std::min(cur_min, ids_[j]);
    cur_max = std::max(cur_max, ids_[j]);
    if (keys_.size() == shells_[shell].key_begin || keys_.back() != sl.key) {
      keys_.push_back(sl.key);
      key_start_.push_back(j);
    }
  }
  if (cur_min <= prev_max) radially_ordered_ = false;
  shells_[shell].key_end = keys_.size();
  for (std::size_t s = shell + 1; s < S; ++s) shells_[s].key_begin = shells_[s].key_end = keys_.size();
  key_start_.push_back(N);
}

ShellIndex ShellIndex::from_chunk(PointChunk chunk, double shell_width) {
  const std::int64_t count = chunk.size();
  if (count == 0) throw ArgumentError("cannot build an index over an empty point set");
  std::vector<std::int64_t> ids(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) ids[static_cast<std::size_t>(i)] = chunk.n_lo + i;
  IndexOptions opt;
  opt.shell_width = shell_width;
  opt.coverage_radius = chunk.n_lo == 1 ? norm(chunk.point(count - 1)) : 0.0;
  return ShellIndex(chunk.d, std::move(ids), std::move(chunk.coords), opt);
}

ShellIndex ShellIndex::from_points(const std::vector<SpiralPoint>& points, double shell_width) {
  if (points.empty()) throw ArgumentError("cannot build an index over an empty point set");
  const int d = points.front().direction.sphere_dim();
  std::vector<std::int64_t> ids;
  std::vector<double> coords;
  ids.reserve(points.size());
  coords.reserve(points.size() * (static_cast<std::size_t>(d) + 1));
  for (const auto& p : points) {
    if (p.direction.sphere_dim() != d) throw ArgumentError("mixed dimensions in point list");
    ids.push_back(p.n);
    for (double x : p.direction.coords()) coords.push_back(p.radius * x);
  }
  IndexOptions opt;
  opt.shell_width = shell_width;
  return ShellIndex(d, std::move(ids), std::move(coords), opt);
}

std::uint64_t ShellIndex::cell_key(std::size_t shell, std::span<const double> p) const {
  const std::uint64_t cells = shells_[shell].cells;
  if (d_ == 1) {
    return clamp_cell(angle_of(p[0], p[1]) / kTwoPi * static_cast<double>(cells), cells);
  }
  const double r = norm(p);
  const double side = 2.0 / static_cast<double>(cells);
  std::uint64_t key = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double u = r > 0.0 ? p[i] / r : (i == 0 ? 1.0 : 0.0);
    key = key * cells + clamp_cell((u + 1.0) / side, cells);
  }
  return key;
}

std::pair<std::size_t, std::uint64_t> ShellIndex::locate(std::span<const double> p) const {
  const std::size_t s =
      std::min(shells_.size() - 1, static_cast<std::size_t>(std::floor(norm(p) / w_)));
  return {s, cell_key(s, p)};
}

std::pair<std::size_t, std::uint64_t> ShellIndex::bucket_of(std::size_t i) const {
  const auto it = std::upper_bound(key_start_.begin(), key_start_.end(), i);
  const auto j = static_cast<std::size_t>(it - key_start_.begin()) - 1;
  std::size_t s = 0;
  while (!(j >= shells_[s].key_begin && j < shells_[s].key_end)) ++s;
  return {s, keys_[j]};
}

std::vector<std::size_t> ShellIndex::bucket_members(std::size_t shell, std::uint64_t key) const {
  std::vector<std::size_t> out;
  if (shell >= shells_.size()) return out;
  const auto b = keys_.begin() + static_cast<std::ptrdiff_t>(shells_[shell].key_begin);
  const auto e = keys_.begin() + static_cast<std::ptrdiff_t>(shells_[shell].key_end);
  const auto it = std::lower_bound(b, e, key);
  if (it == e || *it != key) return out;
  const auto j = static_cast<std::size_t>(it - keys_.begin());
  for (std::size_t i = key_start_[j]; i < key_start_[j + 1]; ++i) out.push_back(i);
  return out;
}

std::pair<std::size_t, std::size_t> ShellIndex::shell_span(const SegmentFrame& f, double eps) const {
  const double rmin = f.radius_at(std::clamp(f.tc, 0.0, f.L));
  const double rmax = std::max(norm(f.a), norm(f.b));
  const double lo = std::max(0.0, rmin - eps) / w_;
  const double hi = (rmax + eps) / w_;
  const std::size_t S = shells_.size();
  const auto s_lo = static_cast<std::size_t>(std::min<double>(static_cast<double>(S), std::floor(lo)));
  const auto s_hi = static_cast<std::size_t>(std::min<double>(static_cast<double>(S - 1), std::floor(hi)));
  return {s_lo, s_hi};
}

int ShellIndex::shell_pieces(const SegmentFrame& f, std::size_t s, double eps, Piece out[2]) const {
  const double s0 = static_cast<double>(s) * w_ - eps;
  const double s1 = static_cast<double>(s + 1) * w_ + eps;
  if (s1 < f.h) return 0;
  double B = std::sqrt((s1 - f.h) * (s1 + f.h));
  B = B * (1 + kRel) + kRel * (1 + s1);
  double A = s0 > f.h ? std::sqrt((s0 - f.h) * (s0 + f.h)) : 0.0;
  A = A * (1 - kRel) - kRel * (1 + s1);
  int n = 0;
  auto push = [&](double ta, double tb) {
    ta = std::max(ta, 0.0);
    tb = std::min(tb, f.L);
    if (ta <= tb) out[n++] = {ta, tb};
  };
  if (A <= 0.0) {
    push(f.tc - B, f.tc + B);
  } else {
    push(f.tc - B, f.tc - A);
    push(f.tc + A, f.tc + B);
  }
  return n;
}

void ShellIndex::key_range(std::size_t s, std::uint64_t lo, std::uint64_t hi, std::vector<Range>& out,
                           QueryStats* stats) const {
  const auto b = keys_.begin() + static_cast<std::ptrdiff_t>(shells_[s].key_begin);
  const auto e = keys_.begin() + static_cast<std::ptrdiff_t>(shells_[s].key_end);
  for (auto it = std::lower_bound(b, e, lo); it != e && *it <= hi; ++it) {
    const auto j = static_cast<std::size_t>(it - keys_.begin());
    if (stats) ++stats->buckets;
    if (!out.empty() && out.back().end == key_start_[j]) {
      out.back().end = key_start_[j + 1];
    } else {
      out.push_back({key_start_[j], key_start_[j + 1]});
    }
  }
}

void ShellIndex::collect(const SegmentFrame& f, std::size_t s, const Piece& piece, double eps,
                         std::vector<Range>& out, QueryStats* stats) const {
  const Shell& sh = shells_[s];
  const std::uint64_t cells = sh.cells;
  const double r0 = static_cast<double>(s) * w_;
  auto whole_shell = [&] { key_range(s, 0, std::numeric_limits<std::uint64_t>::max(), out, stats); };
  const double eps_p = eps * (1 + kRel) + kRel;

  if (d_ == 1) {
    const double smin = f.radius_at(std::clamp(f.tc, piece.ta, piece.tb));
    const double prod = r0 * smin;
    if (!(prod > 0.0)) return whole_shell();
    const double c = eps_p / (2.0 * std::sqrt(prod));
    if (c >= 1.0) return whole_shell();
    const double margin = 2.0 * std::asin(c) + kAngleSlack;
    double qa[2];
    double qb[2];
    f.at(piece.ta, qa);
    f.at(piece.tb, qb);
    const double sweep = std::atan2(qa[0] * qb[1] - qa[1] * qb[0], qa[0] * qb[0] + qa[1] * qb[1]);
    double start = sweep >= 0.0 ? angle_of(qa[0], qa[1]) : angle_of(qb[0], qb[1]);
    const double total = std::abs(sweep) + 2.0 * margin;
    if (total >= kTwoPi) return whole_shell();
    start -= margin;
    if (start < 0.0) start += kTwoPi;
    const double scale = static_cast<double>(cells) / kTwoPi;
    const double x = start * scale;
    const double y = (start + total) * scale;
    const auto i0 = static_cast<std::uint64_t>(std::floor(x));
    const auto i1 = static_cast<std::uint64_t>(std::floor(y));
    if (i1 - i0 + 1 >= cells) return whole_shell();
    if (i1 < cells) {
      key_range(s, i0, i1, out, stats);
    } else {
      key_range(s, 0, i1 - cells, out, stats);
      key_range(s, std::min(i0, cells - 1), cells - 1, out, stats);
    }
    return;
  }

  const std::size_t dm = dim();
  const double len = piece.tb - piece.ta;
  const std::size_t samples = len > 0.0 ? static_cast<std::size_t>(std::ceil(len / w_)) + 1 : 1;
  const double sp = samples > 1 ? len / static_cast<double>(samples - 1) : 0.0;
  const double side = 2.0 / static_cast<double>(cells);
  std::vector<double> q(dm);
  std::vector<std::uint64_t> lo(dm);
  std::vector<std::uint64_t> hi(dm);
  std::vector<std::uint64_t> cur(dm);
  for (std::size_t j = 0; j < samples; ++j) {
    f.at(piece.ta + sp * static_cast<double>(j), q.data());
    const double sigma = norm(q);
    const double prod = r0 * sigma;
    if (!(prod > 0.0)) return whole_shell();
    const double beta = (eps_p + 0.5 * sp) / std::sqrt(prod) * (1 + kRel) + kRel;
    if (beta >= 2.0) return whole_shell();
    for (double& x : q) x /= sigma;
    for (std::size_t i = 0; i + 1 < dm; ++i) {
      lo[i] = clamp_cell((q[i] - beta + 1.0) / side, cells);
      hi[i] = clamp_cell((q[i] + beta + 1.0) / side, cells);
      cur[i] = lo[i];
    }
    const double uz = q[dm - 1];
    for (;;) {
      double mn = 0.0;
      double mx = 0.0;
      double dd = 0.0;
      std::uint64_t prefix = 0;
      for (std::size_t i = 0; i + 1 < dm; ++i) {
        const double a = -1.0 + side * static_cast<double>(cur[i]);
        const double b = a + side;
        const double lo2 = a * a;
        const double hi2 = b * b;
        mn += (a <= 0.0 && b >= 0.0) ? 0.0 : std::min(lo2, hi2);
        mx += std::max(lo2, hi2);
        const double gap = std::max({0.0, a - q[i], q[i] - b});
        dd += gap * gap;
        prefix = prefix * cells + cur[i];
      }
      if (mn <= 1.0 + 1e-12 && dd <= beta * beta) {
        const double rem = std::sqrt(beta * beta - dd);
        const double zmax = std::sqrt(std::max(0.0, 1.0 - mn)) + 1e-12;
        const double zmin = std::max(0.0, std::sqrt(std::max(0.0, 1.0 - mx)) - 1e-12);
        const double zl = uz - rem;
        const double zh = uz + rem;
        const std::uint64_t base = prefix * cells;
        auto emit = [&](double a, double b) {
          a = std::max(a, zl);
          b = std::min(b, zh);
          if (a > b) return;
          key_range(s, base + clamp_cell((a + 1.0) / side, cells), base + clamp_cell((b + 1.0) / side, cells), out,
                    stats);
        };
        if (zmin <= 0.0) {
          emit(-zmax, zmax);
        } else {
          emit(-zmax, -zmin);
          emit(zmin, zmax);
        }
      }
      std::size_t i = 0;
      while (i + 1 < dm && cur[i] == hi[i]) {
        cur[i] = lo[i];
        ++i;
      }
      if (i + 1 >= dm) break;
      ++cur[i];
    }
  }
}

template <class Visit>
void ShellIndex::scan_shell(const SegmentFrame& f, std::size_t s, double eps, QueryStats* stats,
                            Visit&& visit) const {
  Piece pieces[2];
  const int np = shell_pieces(f, s, eps, pieces);
  if (np == 0) return;
  if (stats) ++stats->shells;
  if (shells_[s].key_begin == shells_[s].key_end) return;
  thread_local std::vector<Range> ranges;
  ranges.clear();
  for (int k = 0; k < np; ++k) collect(f, s, pieces[k], eps, ranges, stats);
  std::sort(ranges.begin(), ranges.end(), [](const Range& x, const Range& y) { return x.begin < y.begin; });
  std::size_t done = 0;
  for (const Range& r : ranges) {
    for (std::size_t i = std::max(done, r.begin); i < r.end; ++i) {
      if (stats) ++stats->points;
      visit(i);
    }
    done = std::max(done, r.end);
  }
}

std::vector<HitWitness> ShellIndex::within_segment(std::span<const double> a, std::span<const double> b, double eps,
                                                   QueryStats* stats) const {
  if (a.size() != dim() || b.size() != dim()) throw ArgumentError("query dimension mismatch");
  if (!(eps > 0.0)) throw ArgumentError("eps must be positive");
  const SegmentFrame f(a, b);
  std::vector<HitWitness> hits;
  const auto [s_lo, s_hi] = shell_span(f, eps);
  for (std::size_t s = s_lo; s <= s_hi && s < shells_.size(); ++s) {
    scan_shell(f, s, eps, stats, [&](std::size_t i) {
      double t = 0.0;
      const double dist = segment_distance(point(i), a, b, &t);
      if (dist <= eps) hits.push_back({ids_[i], t, dist});
    });
  }
  std::sort(hits.begin(), hits.end(), [](const HitWitness& x, const HitWitness& y) { return x.n < y.n; });
  return hits;
}

std::optional<HitWitness> ShellIndex::first_index_within_segment(std::span<const double> a,
                                                                 std::span<const double> b, double eps,
                                                                 const Filter* filter, QueryStats* stats) const {
  if (a.size() != dim() || b.size() != dim()) throw ArgumentError("query dimension mismatch");
  if (!(eps > 0.0)) throw ArgumentError("eps must be positive");
  const SegmentFrame f(a, b);
  std::optional<HitWitness> best;
  const auto [s_lo, s_hi] = shell_span(f, eps);
  for (std::size_t s = s_lo; s <= s_hi && s < shells_.size(); ++s) {
    scan_shell(f, s, eps, stats, [&](std::size_t i) {
      if (best && ids_[i] >= best->n) return;
      double t = 0.0;
      const double dist = segment_distance(point(i), a, b, &t);
      if (dist > eps) return;
      if (filter && !(*filter)(ids_[i], point(i))) return;
      best = HitWitness{ids_[i], t, dist};
    });
    if (best && radially_ordered_) break;
  }
  return best;
}

std::optional<EntryHit> ShellIndex::first_entry_along_segment(std::span<const double> a, std::span<const double> b,
                                                              double eps, QueryStats* stats) const {
  if (a.size() != dim() || b.size() != dim()) throw ArgumentError("query dimension mismatch");
  if (!(eps > 0.0)) throw ArgumentError("eps must be positive");
  const SegmentFrame f(a, b);
  const auto [s_lo, s_hi] = shell_span(f, eps);
  struct Cand {
    double lb;
    std::size_t s;
  };
  std::vector<Cand> order;
  for (std::size_t s = s_lo; s <= s_hi && s < shells_.size(); ++s) {
    Piece pieces[2];
    const int np = shell_pieces(f, s, eps, pieces);
    if (np == 0) continue;
    double lb = pieces[0].ta;
    for (int k = 1; k < np; ++k) lb = std::min(lb, pieces[k].ta);
    order.push_back({lb, s});
  }
  std::stable_sort(order.begin(), order.end(), [](const Cand& x, const Cand& y) { return x.lb < y.lb; });
  const std::size_t dm = dim();
  std::optional<EntryHit> best;
  for (const Cand& c : order) {
    if (best && c.lb > best->entry) break;
    scan_shell(f, c.s, eps, stats, [&](std::size_t i) {
      const auto p = point(i);
      double tp = 0.0;
      for (std::size_t k = 0; k < dm; ++k) tp += (p[k] - a[k]) * f.u[k];
      double perp2 = 0.0;
      for (std::size_t k = 0; k < dm; ++k) {
        const double x = p[k] - a[k] - tp * f.u[k];
        perp2 += x * x;
      }
      if (perp2 > eps * eps) return;
      const double half = std::sqrt(eps * eps - perp2);
      const double lo = std::max(0.0, tp - half);
      const double hi = std::min(f.L, tp + half);
      if (lo > hi) return;
      double t = 0.0;
      const double dist = segment_distance(p, a, b, &t);
      if (dist > eps) return;
      if (!best || lo < best->entry || (lo == best->entry && ids_[i] < best->n)) {
        best = EntryHit{ids_[i], lo, t, dist};
      }
    });
  }
  return best;
}

std::vector<HitWitness> ShellIndex::within_ball(std::span<const double> c, double r, QueryStats* stats) const {
  return within_segment(c, c, r, stats);
}

std::optional<HitWitness> ShellIndex::nearest(std::span<const double> x, double exclude_within,
                                              QueryStats* stats) const {
  if (x.size() != dim()) throw ArgumentError("query dimension mismatch");
  std::optional<HitWitness> best;
  auto consider = [&](std::size_t i) {
    if (stats) ++stats->points;
    const double dist = distance(point(i), x);
    if (dist <= exclude_within) return;
    if (!best || dist < best->distance || (dist == best->distance && ids_[i] < best->n)) best = HitWitness{ids_[i], 0.0, dist};
  };
  if (d_ != 1) {
    const double limit = 2.0 * (max_radius_ + norm(x)) + 2.0 * w_;
    for (double r = w_;; r *= 2.0) {
      const double rr = std::min(r, limit);
      for (const HitWitness& h : within_ball(x, rr, stats)) {
        if (h.distance <= exclude_within) continue;
        if (!best || h.distance < best->distance || (h.distance == best->distance && h.n < best->n)) best = h;
      }
      if (best || rr >= limit) return best;
    }
  }
  // Best-first over shells (by radial gap) and, inside a shell, over angle
  // bins moving away from the query angle; a bin is skipped once its polar
  // lower bound exceeds the best distance found.
  const double rho = std::hypot(x[0], x[1]);
  const double ax = angle_of(x[0], x[1]);
  const std::size_t S = shells_.size();
  const auto home = std::min(S - 1, static_cast<std::size_t>(std::floor(rho / w_)));
  auto gap = [&](std::size_t s) {
    const double r0 = static_cast<double>(s) * w_;
    const double r1 = r0 + w_;
    return std::max({0.0, r0 - rho, rho - r1});
  };
  auto bound = [&](std::size_t s, double dang) {
    const double r0 = static_cast<double>(s) * w_;
    const double r1 = r0 + w_;
    if (dang <= 0.0) return gap(s);
    const double c = std::cos(std::min(dang, std::numbers::pi));
    const double r = c > 0.0 ? std::clamp(rho * c, r0, r1) : r0;
    return std::sqrt(std::max(0.0, rho * rho + r * r - 2.0 * rho * r * c));
  };
  auto scan_key = [&](std::size_t j) {
    if (stats) ++stats->buckets;
    for (std::size_t i = key_start_[j]; i < key_start_[j + 1]; ++i) consider(i);
  };
  auto scan_shell_nn = [&](std::size_t s) {
    const std::size_t kb = shells_[s].key_begin;
    const std::size_t ke = shells_[s].key_end;
    if (kb == ke) return;
    if (stats) ++stats->shells;
    const std::uint64_t B = shells_[s].cells;
    const double width = kTwoPi / static_cast<double>(B);
    const std::uint64_t bx = clamp_cell(ax / width, B);
    const double off = ax - static_cast<double>(bx) * width;  // position inside the home bin
    const std::size_t n = ke - kb;
    // Walk the nonempty bins counterclockwise from bx and clockwise from the
    // bin before it; the angular gap to a bin's nearer edge bounds its points.
    const auto first = static_cast<std::size_t>(
        std::lower_bound(keys_.begin() + static_cast<std::ptrdiff_t>(kb), keys_.begin() + static_cast<std::ptrdiff_t>(ke), bx) -
        keys_.begin());
    std::size_t up = first == ke ? kb : first;
    std::size_t down = (up == kb ? ke : up) - 1;
    bool up_live = true;
    bool down_live = true;
    for (std::size_t visited = 0; visited < n && (up_live || down_live);) {
      if (up_live) {
        const std::uint64_t k = (keys_[up] + B - bx) % B;
        const double g = k == 0 ? 0.0 : static_cast<double>(k) * width - off;
        if (best && bound(s, g) > best->distance) {
          up_live = false;
        } else {
          scan_key(up);
          ++visited;
          up = up + 1 == ke ? kb : up + 1;
        }
      }
      if (down_live && visited < n) {
        const std::uint64_t k = (bx + B - keys_[down]) % B;
        const double g = static_cast<double>(k - 1) * width + off;
        if (best && bound(s, g) > best->distance) {
          down_live = false;
        } else {
          scan_key(down);
          ++visited;
          down = down == kb ? ke - 1 : down - 1;
        }
      }
    }
  };
  std::size_t lo = home;
  std::size_t hi = home + 1;
  while (lo > 0 || hi < S) {
    const bool take_lo = lo > 0 && (hi >= S || gap(lo - 1) <= gap(hi));
    if (lo == home && hi == home + 1) {
      scan_shell_nn(home);
      lo = home;
    }
    const std::size_t s = take_lo ? lo - 1 : hi;
    if (best && gap(s) > best->distance) break;
    scan_shell_nn(s);
    if (take_lo) {
      --lo;
    } else {
      ++hi;
    }
  }
  if (S == 1) scan_shell_nn(0);
  return best;
}

ShellIndex index_ball(const PointSource& src, double R, std::int64_t budget, double shell_width) {
  IndexRange range = annulus_index_range(0.0, std::max(R, 0.0), src.d());
  std::int64_t n_hi = std::max<std::int64_t>(range.hi, 1);
  bool complete = false;
  if (auto len = src.length(); len && n_hi >= *len) {
    n_hi = *len;
    complete = true;
  }
  check_budget(n_hi, budget);
  PointChunk chunk = generate_chunk(src, 1, n_hi);
  std::vector<std::int64_t> ids(static_cast<std::size_t>(n_hi));
  for (std::int64_t i = 0; i < n_hi; ++i) ids[static_cast<std::size_t>(i)] = i + 1;
  IndexOptions opt;
  opt.shell_width = shell_width;
  opt.coverage_radius = complete ? std::numeric_limits<double>::infinity() : R;
  return ShellIndex(src.d(), std::move(ids), std::move(chunk.coords), opt);
}

}  // namespace spiral
