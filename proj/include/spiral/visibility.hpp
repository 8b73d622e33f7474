#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spiral/spatial_index.hpp"

namespace spiral {

/// Lazily grown index over the points of a source inside B(0, R).
/// ensure() is not thread-safe; call it before fanning out queries.
class SpiralIndexCache {
 public:
  explicit SpiralIndexCache(std::shared_ptr<const PointSource> src, std::int64_t budget = kDefaultIndexBudget);

  const PointSource& source() const { return *src_; }
  std::shared_ptr<const PointSource> source_ptr() const { return src_; }
  std::int64_t budget() const { return budget_; }
  /// Index whose coverage radius is at least R. Throws BudgetExceeded.
  const ShellIndex& ensure(double R);
  bool has_index() const { return idx_ != nullptr; }

 private:
  std::shared_ptr<const PointSource> src_;
  std::int64_t budget_;
  std::unique_ptr<ShellIndex> idx_;
};

/// The line {lambda v + t w : t in [t0, t1]} with v orthogonal to w.
struct LineParam {
  LineParam(double lambda, UnitVector v, UnitVector w, double t0, double t1);

  /// The segment {x + s w : s in [s0, s1]} written in (lambda, v, w) form.
  static LineParam through(std::span<const double> x, const UnitVector& w, double s0, double s1);

  std::vector<double> at(double t) const;
  nlohmann::json to_json() const;

  double lambda;
  UnitVector v;
  UnitVector w;
  double t0;
  double t1;
};

enum class VisibilityKind { Orchard, Uniform, Forest };
enum class CheckRoute { Direct, Certificate, Both };

std::string to_string(VisibilityKind k);
VisibilityKind parse_visibility_kind(const std::string& s);
std::string to_string(CheckRoute r);
CheckRoute parse_check_route(const std::string& s);

struct CheckOptions {
  CheckRoute route = CheckRoute::Direct;
  /// Certificate constants: n <= K V^{d+1}, dist(u_n, v) <= kappa eps / n^{1/(d+1)}.
  double K = 1.0;
  double kappa = 1.0;
  /// Entries kept in failures[] and witnesses[]; counts are always complete.
  std::size_t max_listed = 64;
  /// Stop at the first failure (pass/fail only; used by calibration).
  bool fail_fast = false;
  /// Compute the exact minimal distance for listed failures.
  bool failure_distances = true;
};

struct CheckFailure {
  std::size_t item = 0;  ///< direction or line index
  std::vector<double> direction;
  double t0 = 0.0;
  std::optional<double> min_distance;  ///< over the window; empty when nothing within the search cap
};

struct CheckWitness {
  std::size_t item = 0;
  double t0 = 0.0;
  HitWitness hit;  ///< hit.t is the absolute line parameter
  std::string route;
};

/// Outcome of one orchard / uniform-orchard / dense-forest check.
struct VisibilityReport {
  std::string property;
  nlohmann::json spec;
  double eps = 0.0;
  double V = 0.0;
  std::vector<double> t0_list;
  // Net (absent for dense-forest).
  bool has_net = false;
  double net_mesh = 0.0;
  std::size_t net_count = 0;
  std::uint64_t net_seed = 0;
  double required_mesh = 0.0;
  double certified_tolerance = 0.0;
  // Constants used and implied by the witnesses.
  std::string route;
  double K = 0.0;
  double kappa = 0.0;
  double implied_K = 0.0;
  double implied_kappa = 0.0;

  std::size_t checked = 0;
  std::size_t failed = 0;
  bool aborted = false;  ///< fail_fast stopped early
  std::vector<CheckFailure> failures;
  std::vector<CheckWitness> witnesses;

  bool passed() const { return failed == 0 && !aborted; }
  nlohmann::json to_json() const;
};

/// Mesh a net needs so a pass on it certifies the continuum statement at
/// tolerance 2 eps: every segment point t v with t <= t_max moves by at most
/// t_max * mesh <= eps / 4 when v moves by mesh.
double required_net_mesh(double eps, double V, double t0_max = 0.0);

VisibilityReport check_orchard(SpiralIndexCache& cache, double eps, double V, const DirectionNet& net,
                               const CheckOptions& options = {});

VisibilityReport check_uniform_orchard(SpiralIndexCache& cache, double eps, double V,
                                       const std::vector<double>& t0_list, const DirectionNet& net,
                                       const CheckOptions& options = {});

VisibilityReport check_dense_forest(SpiralIndexCache& cache, double eps, double V,
                                    const std::vector<LineParam>& lines, const CheckOptions& options = {});

/// Smallest distance from [a, b] to the stored points, searching out to cap.
std::optional<double> min_distance_to_segment(SpiralIndexCache& cache, std::span<const double> a,
                                              std::span<const double> b, double start, double cap);

/// |n^{1/(d+1)} - sqrt(lambda^2 + t^2)| <= eps  and
/// dist(u_n, (lambda v + t w)/sqrt(lambda^2 + t^2)) <= c eps / sqrt(lambda^2 + t^2).
bool eqvisi_check(const Sequence& seq, std::int64_t n, double lambda, double t, const UnitVector& v,
                  const UnitVector& w, double eps, double c);
bool eqvisi_check(const SequenceSpec& spec, std::int64_t n, double lambda, double t, const UnitVector& v,
                  const UnitVector& w, double eps, double c);

struct VisibleOptions {
  /// Stop scanning a ray once its distance drops below this; 0 means eps_floor.
  double stop_below = 0.0;
  /// Scan the whole truncated ray regardless of stop_below.
  bool exhaustive = false;
  /// Points farther than this from the ray are not examined; 0 means max(4 eps_floor, 1).
  double search_radius = 0.0;
  std::int64_t budget = kDefaultIndexBudget;
};

struct VisibleVerdict {
  std::vector<double> direction;
  /// Minimal distance from the truncated ray to Y \ {x}; empty when nothing lies
  /// within the search radius (then the distance is at least lower_bound).
  std::optional<double> min_distance;
  std::int64_t nearest_n = 0;
  double nearest_t = 0.0;
  double lower_bound = 0.0;
  double scanned_T = 0.0;  ///< ray length actually covered
  bool complete = true;    ///< false when stopped early or at the budget
  bool eps_visible = false;
  bool certified = false;  ///< visibility proven for the infinite ray
  double certified_bound = 0.0;
  std::string certificate;

  nlohmann::json to_json() const;
};

std::vector<VisibleVerdict> visible_point_test(const PointSource& src, std::span<const double> x,
                                               const std::vector<UnitVector>& directions, double eps_floor,
                                               double T_max, const VisibleOptions& options = {});
std::vector<VisibleVerdict> visible_point_test(const PointSource& src, std::span<const double> x,
                                               const DirectionNet& directions, double eps_floor, double T_max,
                                               const VisibleOptions& options = {});

/// Exact distance between the ray {x + t v : t >= 0} and the half-line {s c : s >= s0}.
double ray_halfline_distance(std::span<const double> x, std::span<const double> v, std::span<const double> c,
                             double s0);

struct CurveEntry {
  double eps = 0.0;
  double V_hat = 0.0;
  std::string status;  ///< "ok" or "diverged"
  std::size_t witnesses = 0;
  std::size_t net_count = 0;
  double V_tested = 0.0;  ///< last V examined
};

struct VisibilityCurve {
  std::string kind;
  std::vector<CurveEntry> entries;
  double slope = 0.0;
  double intercept = 0.0;
  bool has_fit = false;
  /// Range of V_hat * eps^d over converged entries.
  double scaled_min = 0.0;
  double scaled_max = 0.0;

  nlohmann::json to_json() const;
  std::string to_csv() const;
};

struct EstimateOptions {
  /// Starting V is V0 / eps^d.
  double V0 = 0.5;
  double V_cap = 1e4;
  std::vector<double> t0_list{0.0};
  /// Lines for the forest kind; each line's start is shifted along by up to V.
  std::vector<LineParam> lines;
  std::uint64_t net_seed = kDefaultNetSeed;
  std::size_t max_net = 4'000'000;
};

VisibilityCurve estimate_min_visibility(SpiralIndexCache& cache, VisibilityKind kind,
                                        const std::vector<double>& eps_grid, const EstimateOptions& options = {});

struct Calibration {
  double C = 0.0;
  bool ok = false;
  int steps = 0;
  std::vector<VisibilityReport> reports;  ///< the passing run, one per eps

  nlohmann::json to_json() const;
};

/// Smallest C in {C0, 2 C0, 4 C0, ...} (up to C_cap) with the check passing at
/// V = C / eps^d for every eps.
Calibration calibrate_constant(SpiralIndexCache& cache, VisibilityKind kind, const std::vector<double>& eps_list,
                               const std::vector<double>& t0_list, const std::vector<LineParam>& lines,
                               double C0 = 1.0, double C_cap = 1024.0, std::uint64_t net_seed = kDefaultNetSeed);

}  // namespace spiral
