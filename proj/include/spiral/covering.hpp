#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "spiral/sequences.hpp"

namespace spiral {

enum class CoveringMode { Auto, Exact, Net };

struct CoveringRadiusResult {
  double value = 0.0;  ///< radians
  bool exact = false;
  /// 0 when exact; otherwise the true radius lies in [value, value + resolution].
  double resolution = 0.0;
};

/// Covering radius of a finite subset of S^d: sup over v of the geodesic
/// distance to the nearest member. d = 1 exact mode scans circular gaps;
/// net mode maximizes over a direction net of the given mesh (0 picks one).
/// Auto means exact for d = 1 and net otherwise.
CoveringRadiusResult covering_radius(std::span<const double> flat, int d, CoveringMode mode = CoveringMode::Auto,
                                     double net_mesh = 0.0);
CoveringRadiusResult covering_radius(const std::vector<UnitVector>& points, int d,
                                     CoveringMode mode = CoveringMode::Auto, double net_mesh = 0.0);

/// Members u_{h^{d+1}+i}, 1 <= i <= floor(x).
struct WindowSet {
  std::int64_t h = 1;
  double x = 1.0;
  int d = 1;
  std::int64_t first = 1;  ///< index of the first member
  std::int64_t count = 0;
  std::vector<double> members;  ///< flat, (d+1) doubles each

  std::vector<std::int64_t> indices() const;
};

WindowSet window_set(const Sequence& seq, std::int64_t h, double x, std::int64_t budget = kDefaultIndexBudget);

/// Power law V(eps) = A * eps^{-p}.
struct PowerLaw {
  double A = 1.0;
  double p = 1.0;
  double operator()(double eps) const;
  nlohmann::json to_json() const { return {{"A", A}, {"p", p}}; }
};

struct CoveringOptions {
  CoveringMode mode = CoveringMode::Auto;
  double net_mesh = 0.0;
  std::int64_t budget = kDefaultIndexBudget;
};

struct UcpCell {
  std::int64_t m = 0;
  std::int64_t N = 0;
  std::int64_t count = 0;
  double radius = 0.0;
  double resolution = 0.0;
  double value = 0.0;  ///< N^{1/d} * radius
  bool skipped = false;
};

struct UcpResult {
  double C = 1.0;
  std::vector<std::int64_t> m_grid;
  std::vector<std::int64_t> N_grid;
  std::vector<UcpCell> cells;  ///< m-major order
  double value = 0.0;
  std::size_t argmax = 0;

  nlohmann::json to_json() const;
};

/// max over the grids of N^{1/d} * covering radius of {u_{m+n} : 1 <= n <= C N}.
UcpResult uniform_covering_parameter(const Sequence& seq, double C, const std::vector<std::int64_t>& m_grid,
                                     const std::vector<std::int64_t>& N_grid, const CoveringOptions& options = {});

struct CriterionCell {
  double eps = 0.0;
  double W = 0.0;
  double multiplier = 1.0;
  std::int64_t h = 0;
  double x = 0.0;  ///< K h^d W(eps)
  std::int64_t count = 0;
  double radius = 0.0;
  double value = 0.0;  ///< h eps^{-1} R
  bool skipped = false;
};

struct CriterionParams {
  PowerLaw V;
  double K = 1.0;
  double c_U = 1.0;
  double kappa_U = 1.0;
  std::vector<double> eps_grid{0.2, 0.1, 0.05, 0.025};
  std::vector<double> h_multipliers{1.0, 2.0, 4.0, 8.0};
};

struct CriterionResult {
  CriterionParams params;
  std::vector<CriterionCell> cells;  ///< eps-major order
  double sup = 0.0;
  std::size_t argmax = 0;

  nlohmann::json to_json() const;
  std::string to_csv() const;
};

/// Table of h eps^{-1} R_d(A_U(h, K h^d W(eps))) with W(eps) = c_U V(kappa_U eps),
/// h = ceil(multiplier * W(eps)).
CriterionResult criterion_2b(const Sequence& seq, const CriterionParams& params, const CoveringOptions& options = {});

struct DefvisiResult {
  std::vector<double> eps_grid;
  std::vector<double> x_grid;
  std::int64_t h_cap = 0;
  /// inner[j] = max over sampled h in (x_j, h_cap] of h R_d(A_U(h, h^d x_j));
  /// infinite when no h sample exists.
  std::vector<double> inner;
  std::vector<std::vector<std::int64_t>> h_samples;
  /// Largest feasible grid x (0 when none); nondecreasing in eps.
  std::vector<double> V_sup;
  /// Smallest feasible grid x (0 when none); smaller is better visibility.
  std::vector<double> V_min;
  bool inner_nonincreasing = false;

  nlohmann::json to_json() const;
};

DefvisiResult visibility_from_covering(const Sequence& seq, const std::vector<double>& eps_grid,
                                       const std::vector<double>& x_grid, std::int64_t h_cap,
                                       const CoveringOptions& options = {});

}  // namespace spiral
