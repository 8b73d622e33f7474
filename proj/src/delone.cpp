#include "spiral/delone.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>

#include "real_constant.hpp"
#include "spiral/errors.hpp"
#include "spiral/parallel.hpp"
#include "spiral/sequences.hpp"

namespace spiral {

namespace {

using detail::Big;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct PairHit {
  double dist = kInf;
  std::int64_t a = 0;
  std::int64_t b = 0;
};

bool better(const PairHit& x, const PairHit& y) {
  if (x.dist != y.dist) return x.dist < y.dist;
  if (x.a != y.a) return x.a < y.a;
  return x.b < y.b;
}

PairHit packing(const ShellIndex& idx, const std::vector<std::size_t>& members) {
  PairHit best;
  if (members.size() < 2) return best;
  // Start from an upper bound: the first two members.
  double radius = distance(idx.point(members[0]), idx.point(members[1]));
  std::mutex mu;
  std::vector<PairHit> local(members.size());
  parallel_for(
      members.size(),
      [&](std::size_t k) {
        const std::size_t i = members[k];
        double r;
        {
          std::lock_guard lock(mu);
          r = radius;
        }
        PairHit mine;
        for (const auto& h : idx.within_ball(idx.point(i), r)) {
          if (h.n == idx.id(i)) continue;
          PairHit c{h.distance, std::min(h.n, idx.id(i)), std::max(h.n, idx.id(i))};
          if (better(c, mine)) mine = c;
        }
        local[k] = mine;
        if (mine.dist < kInf) {
          std::lock_guard lock(mu);
          radius = std::min(radius, mine.dist);
        }
      },
      64);
  for (const auto& c : local) {
    if (better(c, best)) best = c;
  }
  return best;
}

}  // namespace

nlohmann::json DeloneReport::to_json() const {
  return {{"T", T},
          {"points", points},
          {"packing", packing},
          {"packing_pair", {packing_pair[0], packing_pair[1]}},
          {"covering", covering},
          {"covering_probe", covering_probe},
          {"probe_resolution", probe_resolution},
          {"probes", probes}};
}

namespace {

// Probe grid of spacing 2 res / sqrt(d+1): every point of the ball lies within
// res of a node; nodes outside the ball whose cell meets it are projected in.
// Nodes on the stride-4 sublattice are probed first; the nearest distance is
// 1-Lipschitz, so a node whose bound from its sublattice neighbour falls below
// the sublattice maximum cannot be the maximiser and is not probed.
template <class Nearest>
void probe_covering(int d, double T, double res, DeloneReport& rep, Nearest&& nearest_distance) {
  const std::size_t dm = static_cast<std::size_t>(d) + 1;
  const double s = 2.0 * res / std::sqrt(static_cast<double>(dm));
  const auto half = static_cast<std::int64_t>(std::ceil(T / s));
  const std::int64_t side = 2 * half + 1;
  const std::int64_t top = (side - 1) / 4 * 4;
  double total = 1.0;
  for (std::size_t i = 0; i < dm; ++i) total *= static_cast<double>(side);
  if (total > 1e8) throw ArgumentError("probe grid too fine: " + std::to_string(total) + " nodes");
  const auto count = static_cast<std::size_t>(total);
  auto digits = [&](std::size_t id, std::vector<std::int64_t>& j) {
    for (std::size_t i = 0; i < dm; ++i) {
      j[i] = static_cast<std::int64_t>(id % static_cast<std::size_t>(side));
      id /= static_cast<std::size_t>(side);
    }
  };
  auto node = [&](const std::vector<std::int64_t>& j, std::vector<double>& p) {
    for (std::size_t i = 0; i < dm; ++i) p[i] = static_cast<double>(j[i] - half) * s;
    const double r = norm(p);
    if (r > T) {
      if (r - s * std::sqrt(static_cast<double>(dm)) / 2.0 > T) return false;
      for (double& x : p) x *= T / r;
    }
    return true;
  };
  auto coarse = [&](const std::vector<std::int64_t>& j) {
    for (std::size_t i = 0; i < dm; ++i) {
      if (j[i] % 4 != 0) return false;
    }
    return true;
  };
  std::vector<double> dist(count, -1.0);
  std::vector<char> probed(count, 0);
  parallel_for(
      count,
      [&](std::size_t id) {
        std::vector<std::int64_t> j(dm);
        std::vector<double> p(dm);
        digits(id, j);
        if (!coarse(j) || !node(j, p)) return;
        dist[id] = nearest_distance(p);
        probed[id] = 1;
      },
      256);
  double floor_max = 0.0;
  for (std::size_t id = 0; id < count; ++id) {
    if (probed[id]) floor_max = std::max(floor_max, dist[id]);
  }
  parallel_for(
      count,
      [&](std::size_t id) {
        std::vector<std::int64_t> j(dm);
        std::vector<std::int64_t> c(dm);
        std::vector<double> p(dm);
        std::vector<double> q(dm);
        digits(id, j);
        if (coarse(j) || !node(j, p)) return;
        for (std::size_t i = 0; i < dm; ++i) c[i] = std::min(top, (j[i] + 2) / 4 * 4);
        std::size_t cid = 0;
        for (std::size_t i = dm; i-- > 0;) cid = cid * static_cast<std::size_t>(side) + static_cast<std::size_t>(c[i]);
        if (probed[cid] && node(c, q) && dist[cid] + distance(p, q) < floor_max) {
          dist[id] = 0.0;  // in the ball, bounded away from the maximum
          return;
        }
        dist[id] = nearest_distance(p);
      },
      256);
  rep.probes = 0;
  rep.covering = 0.0;
  std::size_t arg = 0;
  for (std::size_t id = 0; id < count; ++id) {
    if (dist[id] < 0.0) continue;
    ++rep.probes;
    if (dist[id] > rep.covering) {
      rep.covering = dist[id];
      arg = id;
    }
  }
  std::vector<std::int64_t> j(dm);
  std::vector<double> p(dm);
  digits(arg, j);
  node(j, p);
  rep.covering_probe = p;
}

void require_args(double T, double res) {
  if (!(T > 1.0) || !std::isfinite(T)) throw ArgumentError("T must be finite and > 1");
  if (!(res > 0.0)) throw ArgumentError("probe resolution must be positive");
}

}  // namespace

DeloneReport delone_report(SpiralIndexCache& cache, double T, double res) {
  require_args(T, res);
  const int d = cache.source().d();
  DeloneReport rep;
  rep.T = T;
  rep.probe_resolution = res;
  double reach = T + std::max(2.0, 4.0 * res);
  const ShellIndex* idx = &cache.ensure(reach);
  {
    // Packing runs on the points of B(0, T) alone.
    std::vector<std::int64_t> ids;
    std::vector<double> coords;
    for (std::size_t i = 0; i < idx->size(); ++i) {
      const auto p = idx->point(i);
      if (norm(p) > T) continue;
      ids.push_back(idx->id(i));
      coords.insert(coords.end(), p.begin(), p.end());
    }
    rep.points = static_cast<std::int64_t>(ids.size());
    if (ids.size() >= 2) {
      const ShellIndex ball(d, std::move(ids), std::move(coords));
      std::vector<std::size_t> all(ball.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      const PairHit pk = packing(ball, all);
      rep.packing = pk.dist;
      rep.packing_pair[0] = pk.a;
      rep.packing_pair[1] = pk.b;
    }
  }
  for (;;) {
    const double cover = idx->coverage_radius();
    double worst_invalid = 0.0;
    std::mutex mu;
    probe_covering(d, T, res, rep, [&](const std::vector<double>& p) {
      const auto hit = idx->nearest(p);
      const double dist = hit ? hit->distance : kInf;
      // An unindexed point lies beyond the coverage radius, so the indexed
      // nearest distance is exact only up to cover - |p|.
      if (dist > cover - norm(p)) {
        std::lock_guard lock(mu);
        worst_invalid = std::max(worst_invalid, std::isfinite(dist) ? dist : 2.0 * cover);
      }
      return dist;
    });
    if (worst_invalid == 0.0) break;
    reach = std::max(2.0 * reach, T + 2.0 * worst_invalid);
    idx = &cache.ensure(reach);
  }
  return rep;
}

DeloneReport delone_report(std::shared_ptr<const PointSource> src, double T, double res, std::int64_t budget) {
  SpiralIndexCache cache(std::move(src), budget);
  return delone_report(cache, T, res);
}

DeloneReport delone_report_points(int d, const std::vector<double>& flat, double T, double res) {
  require_args(T, res);
  const std::size_t dm = static_cast<std::size_t>(d) + 1;
  if (flat.empty() || flat.size() % dm != 0) throw ArgumentError("malformed point array");
  std::vector<std::int64_t> ids(flat.size() / dm);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::int64_t>(i) + 1;
  const ShellIndex idx(d, std::move(ids), flat);
  DeloneReport rep;
  rep.T = T;
  rep.probe_resolution = res;
  std::vector<std::int64_t> in_ids;
  std::vector<double> in_coords;
  for (std::size_t i = 0; i < flat.size() / dm; ++i) {
    const std::span<const double> p(flat.data() + i * dm, dm);
    if (norm(p) > T) continue;
    in_ids.push_back(static_cast<std::int64_t>(i) + 1);
    in_coords.insert(in_coords.end(), p.begin(), p.end());
  }
  rep.points = static_cast<std::int64_t>(in_ids.size());
  PairHit pk;
  if (in_ids.size() >= 2) {
    const ShellIndex ball(d, std::move(in_ids), std::move(in_coords));
    std::vector<std::size_t> all(ball.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    pk = packing(ball, all);
  }
  rep.packing = std::isfinite(pk.dist) ? pk.dist : 0.0;
  rep.packing_pair[0] = pk.a;
  rep.packing_pair[1] = pk.b;
  probe_covering(d, T, res, rep, [&](const std::vector<double>& p) {
    const auto hit = idx.nearest(p);
    return hit ? hit->distance : kInf;
  });
  return rep;
}

namespace {

Big parse_theta(const std::string& text) { return detail::parse_big(text); }

Big nearest_integer_distance(const Big& x) {
  const Big f = x - boost::multiprecision::floor(x);
  return f < Big(0.5) ? f : Big(1) - f;
}

}  // namespace

std::vector<Convergent> convergents(const std::string& theta, std::int64_t Q) {
  if (Q < 1) throw ArgumentError("Q must be >= 1");
  const Big t = parse_theta(theta);
  std::vector<Convergent> out;
  Big a = boost::multiprecision::floor(t);
  Big r = t - a;
  // p_{-1} = 1, q_{-1} = 0; p_0 = a_0, q_0 = 1.
  Big p_prev = 1, q_prev = 0;
  Big p = a, q = 1;
  const Big tiny("1e-45");
  for (;;) {
    out.push_back({static_cast<std::int64_t>(p), static_cast<std::int64_t>(q),
                   static_cast<double>(q * nearest_integer_distance(q * t)) + 0.0});
    if (r <= tiny) break;
    const Big x = 1 / r;
    a = boost::multiprecision::floor(x);
    r = x - a;
    if (a > Big(Q)) break;
    const Big p_next = a * p + p_prev;
    const Big q_next = a * q + q_prev;
    if (q_next > Big(Q)) break;
    p_prev = p;
    q_prev = q;
    p = p_next;
    q = q_next;
  }
  return out;
}

double badness(const std::string& theta, std::int64_t Q) {
  // For q_k <= q < q_{k+1}, ||q theta|| >= ||q_k theta|| (best approximation),
  // so q ||q theta|| >= q_k ||q_k theta|| and the minimum sits on a convergent.
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : convergents(theta, Q)) best = std::min(best, c.value);
  return best;
}

double badness_tail(const std::string& theta, std::int64_t q_min, std::int64_t Q) {
  if (q_min < 1 || q_min > Q) throw ArgumentError("need 1 <= q_min <= Q");
  const auto cs = convergents(theta, Q);
  double best = std::numeric_limits<double>::infinity();
  std::int64_t first_conv = Q + 1;
  for (const auto& c : cs) {
    if (c.q >= q_min) {
      best = std::min(best, c.value);
      first_conv = std::min(first_conv, c.q);
    }
  }
  // Between q_min and the first convergent at or above it the best
  // approximation bound does not apply; scan that stretch directly.
  const std::int64_t stop = std::min(first_conv - 1, Q);
  if (stop >= q_min) {
    check_budget(stop - q_min + 1, 50'000'000);
    const SplitReal t = parse_real_constant(theta);
    for (std::int64_t q = q_min; q <= stop; ++q) {
      const double f = fractional_product(q, t);
      best = std::min(best, static_cast<double>(q) * std::min(f, 1.0 - f));
    }
  }
  return best;
}

}  // namespace spiral
