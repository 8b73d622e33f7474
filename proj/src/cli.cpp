#include "spiral/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>

#include "spiral/covering.hpp"
#include "spiral/delone.hpp"
#include "spiral/errors.hpp"
#include "spiral/plot.hpp"
#include "spiral/sequences.hpp"
#include "spiral/spirals.hpp"
#include "spiral/visibility.hpp"

namespace spiral::cli {

namespace {

using nlohmann::json;

struct Opts {
  // point source
  std::string seq = "golden-angle";
  int d = 0;
  std::string theta = "phi";
  std::vector<double> v;
  std::string path;
  bool punctured = false;
  std::vector<double> v0;
  double delta = 0.5;
  std::string schedule = "dyadic";
  int m0 = 0;
  double puncture_C = 1.0;
  std::vector<double> outer;
  std::vector<double> thickness;
  std::int64_t scan_cap = 1'000'000;

  std::uint64_t seed = kDefaultNetSeed;
  std::int64_t budget = kDefaultIndexBudget;
  std::string out;
  std::string csv;
  bool assert_property = false;

  // generate
  std::int64_t n = 0;
  std::int64_t n0 = 1;
  std::string format;

  // plot
  double T = 30.0;
  double marker_eps = 0.0;
  double puncture_T = 100.0;
  int size = 800;
  std::string report;
  std::vector<double> strip;
  bool vacant_strip = false;

  // orchard / uniform / forest
  std::vector<double> eps;
  std::vector<double> V;
  double C = 0.0;
  double mesh = 0.0;
  std::vector<double> t0;
  std::vector<std::string> lines;
  std::string route = "direct";
  double K = 1.0;
  double kappa = 1.0;
  bool fail_fast = false;
  std::size_t max_listed = 64;
  bool estimate = false;
  bool calibrate = false;
  double V0 = 0.5;
  double V_cap = 1e4;
  double C0 = 1.0;
  double C_cap = 1024.0;
  std::size_t max_net = 4'000'000;

  // visible
  std::vector<double> x;
  std::vector<std::string> dirs;
  double eps_floor = 0.1;
  double T_max = 1e3;
  double net_mesh = 0.0;
  bool exhaustive = false;
  double search_radius = 0.0;
  double stop_below = 0.0;

  // covering / criterion / defvisi
  std::int64_t offset = 0;
  std::int64_t count = 100;
  std::string mode = "auto";
  bool ucp = false;
  double ucp_C = 1.0;
  std::vector<std::int64_t> m_grid;
  std::vector<std::int64_t> N_grid;
  std::vector<double> mult;
  double A = 1.0;
  double p = 1.0;
  double c_U = 1.0;
  double kappa_U = 1.0;
  double bound = 0.0;
  std::vector<double> x_grid;
  std::int64_t h_cap = 4096;

  // delone
  std::vector<double> Ts;
  double resolution = 0.25;
  std::int64_t Q = 1'000'000;
  std::int64_t q_min = 1;
  double min_packing = 0.0;
  double max_covering = 0.0;
};

std::vector<double> parse_vector(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw ArgumentError("not a number: '" + item + "'");
    }
    if (used != item.size()) throw ArgumentError("not a number: '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ArgumentError("empty vector");
  return out;
}

double max_or_zero(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

SequenceSpec resolve_spec(const Opts& o) {
  const SequenceKind kind = parse_sequence_kind(o.seq);
  SequenceSpec s;
  switch (kind) {
    case SequenceKind::GoldenAngle:
    case SequenceKind::RationalLadder:
      if (o.d != 0 && o.d != 1) throw ArgumentError(o.seq + " lives on S^1; use --d 1");
      s = kind == SequenceKind::GoldenAngle ? SequenceSpec::golden_angle(o.theta) : SequenceSpec::rational_ladder();
      break;
    case SequenceKind::FibonacciSphere:
      if (o.d != 0 && o.d != 2) throw ArgumentError("fibonacci-sphere lives on S^2; use --d 2");
      s = SequenceSpec::fibonacci_sphere();
      break;
    case SequenceKind::Constant: {
      const int d = o.d != 0 ? o.d : (o.v.empty() ? 1 : static_cast<int>(o.v.size()) - 1);
      if (d < 1) throw ArgumentError("--d must be >= 1");
      std::vector<double> v = o.v;
      if (v.empty()) {
        v.assign(static_cast<std::size_t>(d) + 1, 0.0);
        v[0] = 1.0;
      }
      if (v.size() != static_cast<std::size_t>(d) + 1) throw ArgumentError("--v needs d+1 coordinates");
      s = SequenceSpec::constant(UnitVector(v));
      break;
    }
    case SequenceKind::File:
      if (o.path.empty()) throw ArgumentError("file sequences need --path");
      s = SequenceSpec::file(o.path, o.d != 0 ? o.d : 1);
      break;
  }
  s.validate();
  return s;
}

PunctureSpec resolve_puncture(const Opts& o, const SequenceSpec& base) {
  PunctureSpec ps;
  ps.base = base;
  ps.v0 = o.v0;
  if (ps.v0.empty()) {
    ps.v0.assign(static_cast<std::size_t>(base.d) + 1, 0.0);
    ps.v0[1] = 1.0;
  }
  ps.delta = o.delta;
  if (o.schedule == "dyadic") {
    ps.schedule = AnnulusSchedule::Dyadic;
  } else if (o.schedule == "factorial") {
    ps.schedule = AnnulusSchedule::Factorial;
  } else {
    throw ArgumentError("unknown annulus schedule '" + o.schedule + "'");
  }
  ps.m0 = o.m0;
  ps.C = o.puncture_C;
  ps.outer = o.outer;
  ps.thickness = o.thickness;
  ps.scan_cap = o.scan_cap;
  ps.validate();
  return ps;
}

std::shared_ptr<const PointSource> make_source(const Opts& o, const SequenceSpec& spec, double working_radius) {
  if (o.punctured) return std::make_shared<PuncturedSpiral>(resolve_puncture(o, spec), working_radius);
  return std::make_shared<SpiralSet>(spec);
}

void add_source(CLI::App* sub, Opts& o) {
  sub->add_option("--seq", o.seq, "golden-angle | rational-ladder | fibonacci-sphere | constant | file");
  sub->add_option("--d", o.d, "sphere dimension (0: the sequence's own)");
  sub->add_option("--theta", o.theta, "golden-angle rotation: phi, sqrt2, e, pi, name-1 or a decimal");
  sub->add_option("--v", o.v, "constant direction")->delimiter(',');
  sub->add_option("--path", o.path, "sequence file");
  sub->add_flag("--punctured", o.punctured, "use the punctured spiral");
  sub->add_option("--v0", o.v0, "puncture ray direction")->delimiter(',');
  sub->add_option("--delta", o.delta, "puncture strip half-width");
  sub->add_option("--schedule", o.schedule, "annulus schedule: dyadic | factorial");
  sub->add_option("--m0", o.m0, "first annulus index (0: default)");
  sub->add_option("--puncture-C", o.puncture_C, "thickness constant C of V(eps) = C / eps^d");
  sub->add_option("--outer", o.outer, "explicit annulus outer radii")->delimiter(',');
  sub->add_option("--thickness", o.thickness, "explicit annulus thicknesses")->delimiter(',');
  sub->add_option("--scan-cap", o.scan_cap, "redirection scan cap");
}

void add_run(CLI::App* sub, Opts& o) {
  sub->add_option("--seed", o.seed, "direction net seed");
  sub->add_option("--budget", o.budget, "largest sequence index any computation may touch");
  sub->add_option("--out", o.out, "output file (default: stdout)");
  sub->add_option("--csv", o.csv, "CSV table output");
  sub->add_flag("--assert", o.assert_property, "exit 1 when the checked property fails");
}

void add_check(CLI::App* sub, Opts& o, VisibilityKind kind) {
  sub->add_option("--eps", o.eps, "tolerances")->delimiter(',')->required();
  sub->add_option("--V", o.V, "visibility lengths (one, or one per eps)")->delimiter(',');
  sub->add_option("--C", o.C, "use V = C / eps^d");
  if (kind != VisibilityKind::Forest) sub->add_option("--mesh", o.mesh, "direction net mesh (0: required mesh)");
  if (kind != VisibilityKind::Orchard) {
    sub->add_option("--t0", o.t0, kind == VisibilityKind::Uniform ? "window offsets" : "window starts along each line")
        ->delimiter(',');
  }
  if (kind == VisibilityKind::Forest) sub->add_option("--line", o.lines, "line through x with direction w: 'x0,x1/w0,w1'");
  sub->add_option("--route", o.route, "direct | certificate | both");
  sub->add_option("--K", o.K, "certificate index constant");
  sub->add_option("--kappa", o.kappa, "certificate angle constant");
  sub->add_flag("--fail-fast", o.fail_fast, "stop at the first failure");
  sub->add_option("--max-listed", o.max_listed, "failures and witnesses listed in reports");
  sub->add_flag("--estimate", o.estimate, "estimate the minimal V for each eps");
  sub->add_flag("--calibrate", o.calibrate, "find the smallest C in C0 * 2^k passing at V = C / eps^d");
  sub->add_option("--V0", o.V0, "estimation start V0 / eps^d");
  sub->add_option("--V-cap", o.V_cap, "estimation cap");
  sub->add_option("--C0", o.C0, "calibration start");
  sub->add_option("--C-cap", o.C_cap, "calibration cap");
  sub->add_option("--max-net", o.max_net, "largest net built while estimating");
}

nlohmann::json run_config(const CLI::App* sub, const SequenceSpec& spec, const Opts& o) {
  json flags = json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name.empty()) continue;
    if (opt->get_expected_min() == 0) {
      flags[name] = opt->count() > 0;
    } else if (opt->count() > 0) {
      const auto& r = opt->results();
      if (r.size() == 1) {
        flags[name] = r.front();
      } else {
        flags[name] = r;
      }
    } else {
      const std::string def = opt->get_default_str();
      flags[name] = def == "{}" ? "" : def;
    }
  }
  json cfg = {{"subcommand", sub->get_name()}, {"sequence", spec.to_json()}, {"flags", flags}};
  if (o.punctured || sub->get_name() == "puncture") cfg["puncture"] = resolve_puncture(o, spec).to_json();
  return cfg;
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
  if (!f) throw std::runtime_error("write failed: " + path);
}

void emit(const Opts& o, const json& j, std::ostream& out) { write_text(o.out, j.dump(2) + "\n", out); }

int verdict(const Opts& o, bool ok) { return o.assert_property && !ok ? kExitPropertyFailed : kExitOk; }

std::vector<double> resolve_V(const Opts& o, int d) {
  std::vector<double> V;
  if (!o.V.empty()) {
    if (o.V.size() == 1) {
      V.assign(o.eps.size(), o.V[0]);
    } else if (o.V.size() == o.eps.size()) {
      V = o.V;
    } else {
      throw ArgumentError("--V needs one value or one per eps");
    }
  } else if (o.C > 0.0) {
    for (double e : o.eps) V.push_back(o.C / std::pow(e, d));
  } else {
    throw ArgumentError("give --V or --C");
  }
  for (double x : V) {
    if (!(x > 0.0) || !std::isfinite(x)) throw ArgumentError("V must be positive");
  }
  return V;
}

std::vector<LineParam> resolve_lines(const Opts& o, int d, double length) {
  std::vector<LineParam> out;
  const std::vector<double> starts = o.t0.empty() ? std::vector<double>{0.0} : o.t0;
  for (const std::string& s : o.lines) {
    const auto slash = s.find('/');
    if (slash == std::string::npos) throw ArgumentError("--line wants 'x/w', got '" + s + "'");
    const auto x = parse_vector(s.substr(0, slash));
    const auto w = parse_vector(s.substr(slash + 1));
    if (x.size() != static_cast<std::size_t>(d) + 1 || w.size() != x.size()) {
      throw ArgumentError("--line coordinates must have d+1 entries");
    }
    for (double s0 : starts) out.push_back(LineParam::through(x, UnitVector(w), s0, s0 + length));
  }
  return out;
}

int cmd_generate(const Opts& o, const json& cfg, std::ostream& out) {
  if (o.n < 1) throw ArgumentError("--n must be >= 1");
  if (o.n0 < 1) throw ArgumentError("--n0 must be >= 1");
  const std::int64_t hi = o.n0 + o.n - 1;
  check_budget(hi, o.budget);
  const SequenceSpec spec = resolve_spec(o);
  const auto src = make_source(o, spec, spiral_radius(hi, spec.d) + 1.0);
  const PointChunk chunk = generate_chunk(*src, o.n0, hi);
  std::string format = o.format;
  if (format.empty()) format = o.out.size() > 4 && o.out.ends_with(".bin") ? "bin" : "csv";
  if (format == "bin") {
    if (o.out.empty()) throw ArgumentError("binary dumps need --out");
    write_binary_dump(o.out, chunk);
  } else if (format == "csv") {
    std::ostringstream os;
    write_csv(os, chunk);
    write_text(o.out, os.str(), out);
  } else {
    throw ArgumentError("unknown format '" + format + "'");
  }
  if (!o.out.empty()) {
    const json meta = {{"config", cfg}, {"format", format}, {"n_lo", chunk.n_lo}, {"n_hi", chunk.n_hi()},
                       {"points", chunk.size()}};
    write_text(o.out + ".json", meta.dump(2) + "\n", out);
  }
  return kExitOk;
}

void overlay_from_report(const json& j, PlotOverlay& ov) {
  auto from_check = [&](const json& r) {
    if (r.contains("failures")) {
      for (const auto& f : r["failures"]) {
        if (f.contains("direction") && f["direction"].is_array() && !f["direction"].empty()) {
          ov.origin_rays.push_back(f["direction"].get<std::vector<double>>());
        }
      }
    }
    if (r.contains("witnesses")) {
      for (const auto& w : r["witnesses"]) ov.highlight.push_back(w.at("n").get<std::int64_t>());
    }
  };
  if (j.contains("reports")) {
    for (const auto& r : j["reports"]) from_check(r);
  }
  from_check(j);
  if (j.contains("verdicts") && j.contains("x")) {
    ov.ray_start = j["x"].get<std::vector<double>>();
    for (const auto& v : j["verdicts"]) ov.start_rays.push_back(v.at("direction").get<std::vector<double>>());
  }
  std::sort(ov.highlight.begin(), ov.highlight.end());
  ov.highlight.erase(std::unique(ov.highlight.begin(), ov.highlight.end()), ov.highlight.end());
}

int cmd_plot(const Opts& o, const json& cfg, std::ostream& out) {
  if (!(o.T > 0.0)) throw ArgumentError("--T must be positive");
  const SequenceSpec spec = resolve_spec(o);
  const IndexRange range = annulus_index_range(0.0, o.T, spec.d);
  check_budget(range.hi, o.budget);
  const auto src = make_source(o, spec, o.T + 1.0);
  PointChunk chunk;
  chunk.d = spec.d;
  if (range.hi >= 1) chunk = generate_chunk(*src, 1, range.hi);
  PlotOverlay ov;
  if (!o.report.empty()) {
    std::ifstream f(o.report);
    if (!f) throw ArgumentError("cannot read report " + o.report);
    json j;
    try {
      j = json::parse(f);
    } catch (const json::exception& e) {
      throw ArgumentError("report is not JSON: " + std::string(e.what()));
    }
    overlay_from_report(j, ov);
  }
  if (!o.strip.empty()) {
    if (o.strip.size() != 2 || !(o.strip[0] < o.strip[1])) throw ArgumentError("--strip wants lo,hi with lo < hi");
    ov.strip = std::array<double, 2>{o.strip[0], o.strip[1]};
  } else if (o.vacant_strip) {
    ov.strip = std::array<double, 2>{0.0, std::numbers::pi / std::sqrt(2.0)};
  }
  PlotOptions po;
  po.T = o.T;
  po.eps = o.marker_eps;
  po.size = o.size;
  po.title = "spiral set " + spec.to_json().dump() + " in B(0, " + json(o.T).dump() + ")";
  po.description = cfg.dump();
  write_text(o.out, render_svg(chunk, po, ov), out);
  return kExitOk;
}

int cmd_check(const Opts& o, const json& cfg, VisibilityKind kind, std::ostream& out) {
  if (o.eps.empty()) throw ArgumentError("--eps is required");
  for (double e : o.eps) {
    if (!(e > 0.0)) throw ArgumentError("eps must be positive");
  }
  if (o.estimate && o.calibrate) throw ArgumentError("--estimate and --calibrate are exclusive");
  const SequenceSpec spec = resolve_spec(o);
  const int d = spec.d;
  const std::vector<double> t0 =
      kind == VisibilityKind::Uniform ? (o.t0.empty() ? std::vector<double>{0.0} : o.t0) : std::vector<double>{};
  if (kind == VisibilityKind::Forest && o.lines.empty()) throw ArgumentError("forest checks need --line");
  double reach = max_or_zero(t0) + max_or_zero(o.t0) + 4.0;
  for (const std::string& s : o.lines) reach += norm(parse_vector(s.substr(0, s.find('/'))));
  json j = {{"config", cfg}};

  if (o.estimate || o.calibrate) {
    reach += o.estimate ? o.V_cap : o.C_cap / std::pow(*std::min_element(o.eps.begin(), o.eps.end()), d);
    SpiralIndexCache cache(make_source(o, spec, reach), o.budget);
    // Lines are rebuilt per V inside the estimators; the window here is a placeholder.
    const std::vector<LineParam> lines = resolve_lines(o, d, 1.0);
    if (o.estimate) {
      EstimateOptions eo;
      eo.V0 = o.V0;
      eo.V_cap = o.V_cap;
      eo.t0_list = kind == VisibilityKind::Uniform ? t0 : std::vector<double>{0.0};
      eo.lines = lines;
      eo.net_seed = o.seed;
      eo.max_net = o.max_net;
      const VisibilityCurve curve = estimate_min_visibility(cache, kind, o.eps, eo);
      j["curve"] = curve.to_json();
      if (!o.csv.empty()) write_text(o.csv, curve.to_csv(), out);
      bool ok = true;
      for (const auto& e : curve.entries) ok = ok && e.status == "ok";
      j["passed"] = ok;
      emit(o, j, out);
      return verdict(o, ok);
    }
    const Calibration cal = calibrate_constant(cache, kind, o.eps, kind == VisibilityKind::Uniform ? t0 : std::vector<double>{},
                                               lines, o.C0, o.C_cap, o.seed);
    j["calibration"] = cal.to_json();
    j["passed"] = cal.ok;
    emit(o, j, out);
    return verdict(o, cal.ok);
  }

  const std::vector<double> V = resolve_V(o, d);
  reach += *std::max_element(V.begin(), V.end());
  SpiralIndexCache cache(make_source(o, spec, reach), o.budget);
  CheckOptions co;
  co.route = parse_check_route(o.route);
  co.K = o.K;
  co.kappa = o.kappa;
  co.max_listed = o.max_listed;
  co.fail_fast = o.fail_fast;
  json reports = json::array();
  bool ok = true;
  for (std::size_t i = 0; i < o.eps.size(); ++i) {
    VisibilityReport rep;
    if (kind == VisibilityKind::Forest) {
      rep = check_dense_forest(cache, o.eps[i], V[i], resolve_lines(o, d, V[i]), co);
    } else {
      const double t0_max = kind == VisibilityKind::Uniform ? *std::max_element(t0.begin(), t0.end()) : 0.0;
      const double mesh = o.mesh > 0.0 ? o.mesh : required_net_mesh(o.eps[i], V[i], t0_max);
      const DirectionNet net = build_direction_net(d, mesh, o.seed);
      rep = kind == VisibilityKind::Orchard ? check_orchard(cache, o.eps[i], V[i], net, co)
                                            : check_uniform_orchard(cache, o.eps[i], V[i], t0, net, co);
    }
    ok = ok && rep.passed();
    reports.push_back(rep.to_json());
  }
  j["reports"] = reports;
  j["passed"] = ok;
  emit(o, j, out);
  return verdict(o, ok);
}

int cmd_visible(const Opts& o, const json& cfg, std::ostream& out) {
  const SequenceSpec spec = resolve_spec(o);
  const std::size_t dim = static_cast<std::size_t>(spec.d) + 1;
  if (o.x.size() != dim) throw ArgumentError("--x needs d+1 coordinates");
  if (!(o.eps_floor > 0.0)) throw ArgumentError("--eps must be positive");
  VisibleOptions vo;
  vo.stop_below = o.stop_below;
  vo.exhaustive = o.exhaustive;
  vo.search_radius = o.search_radius;
  vo.budget = o.budget;
  const double reach = norm(o.x) + o.T_max + std::max({o.search_radius, 4.0 * o.eps_floor, 1.0}) + 2.0;
  const auto src = make_source(o, spec, reach);
  std::vector<VisibleVerdict> verdicts;
  if (!o.dirs.empty()) {
    std::vector<UnitVector> dirs;
    for (const std::string& s : o.dirs) {
      const auto v = parse_vector(s);
      if (v.size() != dim) throw ArgumentError("--dir needs d+1 coordinates");
      dirs.emplace_back(v);
    }
    verdicts = visible_point_test(*src, o.x, dirs, o.eps_floor, o.T_max, vo);
  } else if (o.net_mesh > 0.0) {
    verdicts = visible_point_test(*src, o.x, build_direction_net(spec.d, o.net_mesh, o.seed), o.eps_floor, o.T_max, vo);
  } else {
    throw ArgumentError("give --dir or --net-mesh");
  }
  json vs = json::array();
  bool hidden = true;
  bool certified = false;
  std::optional<double> best;
  for (const auto& v : verdicts) {
    vs.push_back(v.to_json());
    hidden = hidden && !v.eps_visible;
    certified = certified || v.certified;
    const double m = v.min_distance ? *v.min_distance : v.lower_bound;
    if (!best || m < *best) best = m;
  }
  const json j = {{"config", cfg},
                  {"property", "hidden"},
                  {"x", o.x},
                  {"eps", o.eps_floor},
                  {"T_max", o.T_max},
                  {"verdicts", vs},
                  {"min_distance", best ? json(*best) : json(nullptr)},
                  {"hidden", hidden},
                  {"certified_visible", certified},
                  {"passed", hidden}};
  emit(o, j, out);
  return verdict(o, hidden);
}

CoveringMode parse_mode(const std::string& s) {
  if (s == "auto") return CoveringMode::Auto;
  if (s == "exact") return CoveringMode::Exact;
  if (s == "net") return CoveringMode::Net;
  throw ArgumentError("unknown covering mode '" + s + "'");
}

void require_sequence_only(const Opts& o) {
  if (o.punctured) throw ArgumentError("this subcommand works on the sequence; --punctured does not apply");
}

int cmd_covering(const Opts& o, const json& cfg, std::ostream& out) {
  require_sequence_only(o);
  const Sequence seq(resolve_spec(o));
  const CoveringMode mode = parse_mode(o.mode);
  json j = {{"config", cfg}};
  if (o.ucp) {
    if (o.m_grid.empty() || o.N_grid.empty()) throw ArgumentError("--ucp needs --m-grid and --N-grid");
    const UcpResult r = uniform_covering_parameter(seq, o.ucp_C, o.m_grid, o.N_grid, {mode, o.mesh, o.budget});
    j["ucp"] = r.to_json();
    const bool ok = o.bound <= 0.0 || r.value <= o.bound;
    j["passed"] = ok;
    emit(o, j, out);
    return verdict(o, ok);
  }
  if (o.count < 1 || o.offset < 0) throw ArgumentError("need --count >= 1 and --m >= 0");
  check_budget(o.offset + o.count, o.budget);
  const std::size_t dim = static_cast<std::size_t>(seq.d()) + 1;
  std::vector<double> flat(static_cast<std::size_t>(o.count) * dim);
  for (std::int64_t i = 0; i < o.count; ++i) seq.term_into(o.offset + i + 1, flat.data() + static_cast<std::size_t>(i) * dim);
  const CoveringRadiusResult r = covering_radius(flat, seq.d(), mode, o.mesh);
  j["m"] = o.offset;
  j["count"] = o.count;
  j["covering_radius"] = {{"value", r.value}, {"exact", r.exact}, {"resolution", r.resolution}};
  const bool ok = o.bound <= 0.0 || r.value <= o.bound;
  j["passed"] = ok;
  emit(o, j, out);
  return verdict(o, ok);
}

int cmd_criterion(const Opts& o, const json& cfg, std::ostream& out) {
  require_sequence_only(o);
  if (o.assert_property && !(o.bound > 0.0)) throw ArgumentError("--assert needs --bound");
  const Sequence seq(resolve_spec(o));
  CriterionParams cp;
  cp.V = PowerLaw{o.A, o.p};
  cp.K = o.K;
  cp.c_U = o.c_U;
  cp.kappa_U = o.kappa_U;
  if (!o.eps.empty()) cp.eps_grid = o.eps;
  if (!o.mult.empty()) cp.h_multipliers = o.mult;
  const CriterionResult r = criterion_2b(seq, cp, {parse_mode(o.mode), o.mesh, o.budget});
  if (!o.csv.empty()) write_text(o.csv, r.to_csv(), out);
  const bool ok = o.bound <= 0.0 || r.sup <= o.bound;
  json j = {{"config", cfg}, {"criterion", r.to_json()}, {"passed", ok}};
  emit(o, j, out);
  return verdict(o, ok);
}

int cmd_defvisi(const Opts& o, const json& cfg, std::ostream& out) {
  require_sequence_only(o);
  const Sequence seq(resolve_spec(o));
  const std::vector<double> eps = o.eps.empty() ? std::vector<double>{0.5, 1.0, 2.0, 4.0, 8.0} : o.eps;
  const std::vector<double> xs = o.x_grid.empty() ? std::vector<double>{1, 2, 4, 8, 16, 32} : o.x_grid;
  const DefvisiResult r = visibility_from_covering(seq, eps, xs, o.h_cap, {parse_mode(o.mode), o.mesh, o.budget});
  json j = {{"config", cfg}, {"defvisi", r.to_json()}, {"passed", r.inner_nonincreasing}};
  emit(o, j, out);
  return verdict(o, r.inner_nonincreasing);
}

int cmd_delone(const Opts& o, const json& cfg, std::ostream& out) {
  const SequenceSpec spec = resolve_spec(o);
  const std::vector<double> Ts = o.Ts.empty() ? std::vector<double>{10.0, 30.0, 100.0} : o.Ts;
  const double reach = *std::max_element(Ts.begin(), Ts.end()) + std::max(2.0, 4.0 * o.resolution) + 1.0;
  SpiralIndexCache cache(make_source(o, spec, 4.0 * reach), o.budget);
  json reps = json::array();
  bool ok = true;
  for (double T : Ts) {
    const DeloneReport r = delone_report(cache, T, o.resolution);
    json e = r.to_json();
    e["density"] = static_cast<double>(r.points) / std::pow(T, spec.d + 1);
    reps.push_back(e);
    ok = ok && r.packing > 0.0 && std::isfinite(r.covering);
    if (o.min_packing > 0.0) ok = ok && r.packing >= o.min_packing;
    if (o.max_covering > 0.0) ok = ok && r.covering <= o.max_covering;
  }
  json j = {{"config", cfg}, {"reports", reps}};
  if (spec.kind == SequenceKind::GoldenAngle) {
    j["badness"] = {{"theta", spec.theta},
                    {"Q", o.Q},
                    {"q_min", o.q_min},
                    {"min", badness(spec.theta, o.Q)},
                    {"tail_min", badness_tail(spec.theta, o.q_min, o.Q)}};
  }
  j["passed"] = ok;
  emit(o, j, out);
  return verdict(o, ok);
}

int cmd_puncture(Opts o, const json& cfg, std::ostream& out) {
  o.punctured = true;
  const SequenceSpec spec = resolve_spec(o);
  const PunctureSpec ps = resolve_puncture(o, spec);
  const IndexRange range = annulus_index_range(0.0, o.puncture_T, spec.d);
  check_budget(range.hi, o.budget);
  const PuncturedSpiral src(ps, o.puncture_T + 1.0);
  const SpiralSet base(spec);
  std::int64_t moved = 0;
  std::int64_t in_region = 0;
  std::int64_t annulus_mismatch = 0;
  PointChunk chunk;
  chunk.d = spec.d;
  if (range.hi >= 1) {
    chunk = generate_chunk(src, 1, range.hi);
    const PointChunk raw = generate_chunk(base, 1, range.hi);
    for (std::int64_t i = 0; i < chunk.size(); ++i) {
      const auto p = chunk.point(i);
      const auto q = raw.point(i);
      const bool same = std::equal(p.begin(), p.end(), q.begin());
      if (!same) ++moved;
      if (src.in_region(p)) ++in_region;
      if (src.in_annuli(norm(q)) && !same) ++annulus_mismatch;
    }
  }
  if (!o.csv.empty()) {
    std::ostringstream os;
    write_csv(os, chunk);
    write_text(o.csv, os.str(), out);
  }
  json an = json::array();
  for (const Annulus& a : src.annuli()) {
    an.push_back({{"m", a.m}, {"outer", a.outer}, {"thickness", a.thickness}, {"inner", a.inner()}});
  }
  const bool ok = in_region == 0 && annulus_mismatch == 0;
  const json j = {{"config", cfg},
                  {"T", o.puncture_T},
                  {"points", chunk.size()},
                  {"moved", moved},
                  {"in_region", in_region},
                  {"annulus_mismatch", annulus_mismatch},
                  {"annuli", an},
                  {"passed", ok}};
  emit(o, j, out);
  return verdict(o, ok);
}

/// Appends flags from a JSON config file for every key not given on the
/// command line, so explicit flags win.
std::vector<std::string> merge_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ArgumentError("--config needs a path");
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (path.empty()) return args;
  std::ifstream f(path);
  if (!f) throw ArgumentError("cannot read config " + path);
  json cfg;
  try {
    cfg = json::parse(f);
  } catch (const json::exception& e) {
    throw ArgumentError("config is not JSON: " + std::string(e.what()));
  }
  if (!cfg.is_object()) throw ArgumentError("config must be a JSON object");
  if (cfg.contains("subcommand") && (args.empty() || args[0].rfind("-", 0) == 0)) {
    args.insert(args.begin(), cfg["subcommand"].get<std::string>());
  }
  auto given = [&](const std::string& flag) {
    return std::any_of(args.begin(), args.end(),
                       [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
  };
  auto scalar = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
  for (const auto& [key, value] : cfg.items()) {
    if (key == "subcommand") continue;
    const std::string flag = "--" + key;
    if (given(flag)) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back(flag);
    } else if (value.is_array()) {
      const bool strings = std::any_of(value.begin(), value.end(), [](const json& e) { return e.is_string(); });
      if (strings) {
        for (const auto& e : value) {
          args.push_back(flag);
          args.push_back(scalar(e));
        }
      } else {
        std::string joined;
        for (const auto& e : value) joined += (joined.empty() ? "" : ",") + scalar(e);
        args.push_back(flag + "=" + joined);
      }
    } else {
      args.push_back(flag + "=" + scalar(value));
    }
  }
  return args;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  Opts o;
  CLI::App app{"Spiral sets on S^d: generation, visibility checks, covering and Delone diagnostics", "spiral"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  CLI::App* gen = app.add_subcommand("generate", "write spiral points n0 .. n0+n-1 (CSV or binary dump)");
  CLI::App* plot = app.add_subcommand("plot", "SVG scatter of the points in B(0, T)");
  CLI::App* orchard = app.add_subcommand("orchard", "orchard check over a direction net");
  CLI::App* uniform = app.add_subcommand("uniform", "uniform orchard check over a net and window offsets");
  CLI::App* forest = app.add_subcommand("forest", "dense forest check along given lines");
  CLI::App* visible = app.add_subcommand("visible", "visible-point test from x");
  CLI::App* covering = app.add_subcommand("covering", "covering radius of sequence windows");
  CLI::App* criterion = app.add_subcommand("criterion", "windowed covering criterion table");
  CLI::App* defvisi = app.add_subcommand("defvisi", "visibility function from window covering radii");
  CLI::App* delone = app.add_subcommand("delone", "packing and covering radii in balls, badness of theta");
  CLI::App* puncture = app.add_subcommand("puncture", "punctured spiral construction and its checks");
  for (CLI::App* s : {gen, plot, orchard, uniform, forest, visible, covering, criterion, defvisi, delone, puncture}) {
    add_source(s, o);
    add_run(s, o);
  }

  gen->add_option("--n", o.n, "number of points")->required();
  gen->add_option("--n0", o.n0, "first index");
  gen->add_option("--format", o.format, "csv | bin (default from the --out extension)");

  plot->add_option("--T", o.T, "plot radius");
  plot->add_option("--eps", o.marker_eps, "marker radius in data units");
  plot->add_option("--size", o.size, "image side in pixels");
  plot->add_option("--report", o.report, "JSON report to overlay (failures, witnesses, visible rays)");
  plot->add_option("--strip", o.strip, "band lo,hi in y")->delimiter(',');
  plot->add_flag("--vacant-strip", o.vacant_strip, "band 0 < y < pi/sqrt(2)");

  add_check(orchard, o, VisibilityKind::Orchard);
  add_check(uniform, o, VisibilityKind::Uniform);
  add_check(forest, o, VisibilityKind::Forest);

  visible->add_option("--x", o.x, "base point")->delimiter(',')->required();
  visible->add_option("--dir", o.dirs, "ray direction (repeatable)");
  visible->add_option("--net-mesh", o.net_mesh, "test every direction of a net of this mesh");
  visible->add_option("--eps", o.eps_floor, "visibility tolerance");
  visible->add_option("--Tmax", o.T_max, "ray truncation");
  visible->add_flag("--exhaustive", o.exhaustive, "scan whole rays");
  visible->add_option("--search-radius", o.search_radius, "ignore points farther than this from the ray");
  visible->add_option("--stop-below", o.stop_below, "stop a ray once its distance drops below this");

  for (CLI::App* s : {covering, criterion, defvisi}) {
    s->add_option("--mode", o.mode, "auto | exact | net");
    s->add_option("--mesh", o.mesh, "net mesh (0: default)");
  }
  covering->add_option("--m", o.offset, "window offset: members u_{m+1} .. u_{m+count}");
  covering->add_option("--count", o.count, "window size");
  covering->add_flag("--ucp", o.ucp, "uniform covering parameter over --m-grid x --N-grid");
  covering->add_option("--C", o.ucp_C, "window size factor of the uniform covering parameter");
  covering->add_option("--m-grid", o.m_grid, "offsets")->delimiter(',');
  covering->add_option("--N-grid", o.N_grid, "scales")->delimiter(',');
  covering->add_option("--bound", o.bound, "property: value <= bound");

  criterion->add_option("--eps", o.eps, "eps grid")->delimiter(',');
  criterion->add_option("--mult", o.mult, "h multipliers")->delimiter(',');
  criterion->add_option("--A", o.A, "V(eps) = A eps^-p");
  criterion->add_option("--p", o.p, "V(eps) = A eps^-p");
  criterion->add_option("--K", o.K, "x = K h^d W");
  criterion->add_option("--cU", o.c_U, "W(eps) = cU V(kappaU eps)");
  criterion->add_option("--kappaU", o.kappa_U, "W(eps) = cU V(kappaU eps)");
  criterion->add_option("--bound", o.bound, "property: sup <= bound");

  defvisi->add_option("--eps", o.eps, "eps grid")->delimiter(',');
  defvisi->add_option("--x-grid", o.x_grid, "window length grid")->delimiter(',');
  defvisi->add_option("--h-cap", o.h_cap, "largest h sampled");

  delone->add_option("--T", o.Ts, "ball radii")->delimiter(',');
  delone->add_option("--res", o.resolution, "probe resolution");
  delone->add_option("--Q", o.Q, "badness: largest q");
  delone->add_option("--q-min", o.q_min, "badness tail: smallest q");
  delone->add_option("--min-packing", o.min_packing, "property: packing >= this");
  delone->add_option("--max-covering", o.max_covering, "property: covering <= this");

  puncture->add_option("--T", o.puncture_T, "ball radius");

  try {
    std::vector<std::string> args = merge_config(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    for (CLI::App* s : app.get_subcommands()) {
      if (s->parsed()) {
        err << s->help();
        break;
      }
    }
    err << "error: " << e.what() << "\n";
    return kExitBadArguments;
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << "\n";
    return kExitBadArguments;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    const json cfg = run_config(sub, resolve_spec(o), o);
    const std::string name = sub->get_name();
    if (name == "generate") return cmd_generate(o, cfg, out);
    if (name == "plot") return cmd_plot(o, cfg, out);
    if (name == "orchard") return cmd_check(o, cfg, VisibilityKind::Orchard, out);
    if (name == "uniform") return cmd_check(o, cfg, VisibilityKind::Uniform, out);
    if (name == "forest") return cmd_check(o, cfg, VisibilityKind::Forest, out);
    if (name == "visible") return cmd_visible(o, cfg, out);
    if (name == "covering") return cmd_covering(o, cfg, out);
    if (name == "criterion") return cmd_criterion(o, cfg, out);
    if (name == "defvisi") return cmd_defvisi(o, cfg, out);
    if (name == "delone") return cmd_delone(o, cfg, out);
    if (name == "puncture") return cmd_puncture(o, cfg, out);
    err << "error: unknown subcommand\n";
    return kExitBadArguments;
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << "\n";
    return kExitBadArguments;
  } catch (const OutOfRangeError& e) {
    err << "error: " << e.what() << "\n";
    return kExitBadArguments;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace spiral::cli
