#include "spiral/sequences.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "real_constant.hpp"
#include "spiral/errors.hpp"

namespace spiral {

namespace {

using detail::Big;
using detail::parse_big;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

void write_angle(double frac, double* out) {
  const double a = kTwoPi * frac;
  out[0] = std::cos(a);
  out[1] = std::sin(a);
}

}  // namespace

std::string to_string(SequenceKind kind) {
  switch (kind) {
    case SequenceKind::GoldenAngle:
      return "golden-angle";
    case SequenceKind::RationalLadder:
      return "rational-ladder";
    case SequenceKind::FibonacciSphere:
      return "fibonacci-sphere";
    case SequenceKind::Constant:
      return "constant";
    case SequenceKind::File:
      return "file";
  }
  return "unknown";
}

SequenceKind parse_sequence_kind(const std::string& name) {
  for (auto k : {SequenceKind::GoldenAngle, SequenceKind::RationalLadder, SequenceKind::FibonacciSphere,
                 SequenceKind::Constant, SequenceKind::File}) {
    if (to_string(k) == name) return k;
  }
  throw ArgumentError("unknown sequence kind '" + name + "'");
}

SequenceSpec SequenceSpec::golden_angle(std::string theta) {
  SequenceSpec s;
  s.kind = SequenceKind::GoldenAngle;
  s.d = 1;
  s.theta = std::move(theta);
  return s;
}

SequenceSpec SequenceSpec::rational_ladder() {
  SequenceSpec s;
  s.kind = SequenceKind::RationalLadder;
  s.d = 1;
  return s;
}

SequenceSpec SequenceSpec::fibonacci_sphere() {
  SequenceSpec s;
  s.kind = SequenceKind::FibonacciSphere;
  s.d = 2;
  return s;
}

SequenceSpec SequenceSpec::constant(const UnitVector& v) {
  SequenceSpec s;
  s.kind = SequenceKind::Constant;
  s.d = v.sphere_dim();
  s.v.assign(v.coords().begin(), v.coords().end());
  return s;
}

SequenceSpec SequenceSpec::file(std::string path, int d) {
  SequenceSpec s;
  s.kind = SequenceKind::File;
  s.d = d;
  s.path = std::move(path);
  return s;
}

void SequenceSpec::validate() const {
  if (d < 1) throw ArgumentError("sequence dimension d must be >= 1");
  switch (kind) {
    case SequenceKind::GoldenAngle:
      if (d != 1) throw ArgumentError("golden-angle requires d = 1");
      parse_real_constant(theta);
      break;
    case SequenceKind::RationalLadder:
      if (d != 1) throw ArgumentError("rational-ladder requires d = 1");
      break;
    case SequenceKind::FibonacciSphere:
      if (d != 2) throw ArgumentError("fibonacci-sphere requires d = 2");
      break;
    case SequenceKind::Constant:
      if (v.size() != static_cast<std::size_t>(d) + 1) {
        throw ArgumentError("constant direction must have d+1 = " + std::to_string(d + 1) + " coordinates");
      }
      break;
    case SequenceKind::File:
      if (path.empty()) throw ArgumentError("file sequence needs a path");
      break;
  }
}

nlohmann::json SequenceSpec::to_json() const {
  nlohmann::json params = nlohmann::json::object();
  switch (kind) {
    case SequenceKind::GoldenAngle:
      params["theta"] = theta;
      break;
    case SequenceKind::Constant:
      params["v"] = v;
      break;
    case SequenceKind::File:
      params["path"] = path;
      break;
    default:
      break;
  }
  return {{"kind", to_string(kind)}, {"d", d}, {"params", params}};
}

SequenceSpec SequenceSpec::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind")) throw ArgumentError("sequence spec must be an object with 'kind'");
  SequenceSpec s;
  try {
    s.kind = parse_sequence_kind(j.at("kind").get<std::string>());
    const nlohmann::json params = j.value("params", nlohmann::json::object());
    switch (s.kind) {
      case SequenceKind::GoldenAngle: {
        s.d = 1;
        if (params.contains("theta")) {
          const auto& t = params.at("theta");
          if (t.is_number()) {
            std::ostringstream os;
            os.precision(17);
            os << t.get<double>();
            s.theta = os.str();
          } else {
            s.theta = t.get<std::string>();
          }
        }
        break;
      }
      case SequenceKind::RationalLadder:
        s.d = 1;
        break;
      case SequenceKind::FibonacciSphere:
        s.d = 2;
        break;
      case SequenceKind::Constant:
        s.v = params.at("v").get<std::vector<double>>();
        s.d = static_cast<int>(s.v.size()) - 1;
        break;
      case SequenceKind::File:
        s.path = params.at("path").get<std::string>();
        s.d = j.at("d").get<int>();
        break;
    }
    if (j.contains("d") && j.at("d").get<int>() != s.d) {
      throw ArgumentError("sequence spec: d = " + std::to_string(j.at("d").get<int>()) +
                          " is incompatible with kind " + to_string(s.kind));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("malformed sequence spec: ") + e.what());
  }
  s.validate();
  return s;
}

TriangularDecomposition triangular_decompose(std::int64_t n) {
  if (n <= 0) throw ArgumentError("triangular_decompose needs n >= 1");
  // Largest k with k(k+1)/2 <= n. 8n + 1 overflows int64 past ~1.1e18, so
  // the estimate comes from a double sqrt and is corrected in 128 bits.
  using U = unsigned __int128;
  auto tri = [](std::int64_t k) { return static_cast<U>(k) * static_cast<U>(k + 1) / 2; };
  const U un = static_cast<U>(n);
  auto k = static_cast<std::int64_t>((std::sqrt(8.0 * static_cast<double>(n) + 1.0) - 1.0) / 2.0);
  while (k > 0 && tri(k) > un) --k;
  while (tri(k + 1) <= un) ++k;
  const auto p = static_cast<std::int64_t>(un - tri(k));
  // n = T_k + p with 0 <= p <= k.
  return {k, p};
}

SplitReal parse_real_constant(const std::string& text) {
  if (text.empty()) throw ArgumentError("empty real constant");
  const Big v = parse_big(text);
  SplitReal s;
  s.hi = static_cast<double>(v);
  s.lo = static_cast<double>(v - Big(s.hi));
  if (!std::isfinite(s.hi)) throw ArgumentError("real constant out of range: '" + text + "'");
  return s;
}

double fractional_product(std::int64_t n, SplitReal theta) {
  const double x = static_cast<double>(n);
  const double p = x * theta.hi;
  const double err = std::fma(x, theta.hi, -p);
  double f = p - std::floor(p);
  f += err + x * theta.lo;
  f -= std::floor(f);
  if (f >= 1.0) f = 0.0;
  return f;
}

Sequence::Sequence(SequenceSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  switch (spec_.kind) {
    case SequenceKind::GoldenAngle:
      theta_ = parse_real_constant(spec_.theta);
      break;
    case SequenceKind::FibonacciSphere:
      theta_ = parse_real_constant("phi-1");
      break;
    case SequenceKind::Constant: {
      const UnitVector u(spec_.v);
      data_.assign(u.coords().begin(), u.coords().end());
      break;
    }
    case SequenceKind::File: {
      std::ifstream in(spec_.path);
      if (!in) throw ArgumentError("cannot open sequence file '" + spec_.path + "'");
      std::string line;
      std::size_t lineno = 0;
      while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        std::vector<double> row;
        double x = 0.0;
        while (ls >> x) row.push_back(x);
        if (!ls.eof() || row.size() != dim()) {
          throw ArgumentError(spec_.path + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(dim()) + " numbers");
        }
        const UnitVector u(row);
        data_.insert(data_.end(), u.coords().begin(), u.coords().end());
      }
      if (data_.empty()) throw ArgumentError("sequence file '" + spec_.path + "' has no points");
      break;
    }
    case SequenceKind::RationalLadder:
      break;
  }
}

std::optional<std::int64_t> Sequence::length() const {
  if (spec_.kind == SequenceKind::File) return static_cast<std::int64_t>(data_.size() / dim());
  return std::nullopt;
}

void Sequence::term_into(std::int64_t n, double* out) const {
  if (n < 1) throw ArgumentError("sequence index must be >= 1");
  switch (spec_.kind) {
    case SequenceKind::GoldenAngle:
      write_angle(fractional_product(n, theta_), out);
      return;
    case SequenceKind::RationalLadder: {
      const auto [k, p] = triangular_decompose(n);
      // Quarter turns are emitted exactly so axis points have zero ordinates.
      if ((4 * p) % k == 0) {
        static constexpr double xs[5] = {1.0, 0.0, -1.0, 0.0, 1.0};
        static constexpr double ys[5] = {0.0, 1.0, 0.0, -1.0, 0.0};
        const auto q = static_cast<std::size_t>(4 * p / k);
        out[0] = xs[q];
        out[1] = ys[q];
        return;
      }
      write_angle(static_cast<double>(p) / static_cast<double>(k), out);
      return;
    }
    case SequenceKind::FibonacciSphere: {
      const auto un = static_cast<std::uint64_t>(n);
      const int b = std::bit_width(un) - 1;
      const std::int64_t m = std::int64_t{1} << b;
      const std::int64_t i = n - m;
      const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(m);
      const double r = std::sqrt(std::max(0.0, (1.0 - z) * (1.0 + z)));
      const double a = kTwoPi * fractional_product(i, theta_);
      out[0] = r * std::cos(a);
      out[1] = r * std::sin(a);
      out[2] = z;
      return;
    }
    case SequenceKind::Constant:
      std::copy(data_.begin(), data_.end(), out);
      return;
    case SequenceKind::File: {
      const auto len = static_cast<std::int64_t>(data_.size() / dim());
      if (n > len) {
        throw OutOfRangeError("index " + std::to_string(n) + " exceeds stored sequence length " +
                              std::to_string(len));
      }
      const auto off = static_cast<std::size_t>(n - 1) * dim();
      std::copy(data_.begin() + static_cast<std::ptrdiff_t>(off),
                data_.begin() + static_cast<std::ptrdiff_t>(off + dim()), out);
      return;
    }
  }
}

UnitVector Sequence::term(std::int64_t n) const {
  std::vector<double> c(dim());
  term_into(n, c.data());
  return UnitVector::from_unit(c);
}

UnitVector sequence_term(const SequenceSpec& spec, std::int64_t n) { return Sequence(spec).term(n); }

}  // namespace spiral
