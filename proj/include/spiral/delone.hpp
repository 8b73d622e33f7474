#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "spiral/visibility.hpp"

namespace spiral {

struct DeloneReport {
  double T = 0.0;
  std::int64_t points = 0;
  /// Minimal pairwise distance among points in B(0, T).
  double packing = 0.0;
  std::int64_t packing_pair[2] = {0, 0};
  /// Max over probes in B(0, T) of the distance to the set; the true covering
  /// radius of B(0, T) is at most covering + probe_resolution.
  double covering = 0.0;
  std::vector<double> covering_probe;
  double probe_resolution = 0.0;
  std::int64_t probes = 0;

  nlohmann::json to_json() const;
};

DeloneReport delone_report(SpiralIndexCache& cache, double T, double probe_resolution);
DeloneReport delone_report(std::shared_ptr<const PointSource> src, double T, double probe_resolution,
                           std::int64_t budget = kDefaultIndexBudget);
/// Same diagnostics for an explicit finite point set (ids 1..m in input order).
DeloneReport delone_report_points(int d, const std::vector<double>& flat, double T, double probe_resolution);

/// min over 1 <= q <= Q of q * ||q theta|| (distance to the nearest integer),
/// evaluated in 50-digit arithmetic over continued-fraction convergents,
/// which realize the minimum. theta accepts the forms of parse_real_constant.
double badness(const std::string& theta, std::int64_t Q);
/// The same minimum over q in [q_min, Q]; tends to liminf q ||q theta|| as
/// q_min grows.
double badness_tail(const std::string& theta, std::int64_t q_min, std::int64_t Q);

struct Convergent {
  std::int64_t p;
  std::int64_t q;
  double value;  ///< q * ||q theta||
};
/// Convergents of theta with denominators up to Q.
std::vector<Convergent> convergents(const std::string& theta, std::int64_t Q);

}  // namespace spiral
