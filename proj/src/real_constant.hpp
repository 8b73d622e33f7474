#pragma once

// High-precision parsing of real constants, shared by the sequence and
// Diophantine code. Internal to the library.

#include <cctype>
#include <string>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "spiral/errors.hpp"

namespace spiral::detail {

using Big = boost::multiprecision::cpp_bin_float_50;

inline Big named_constant(const std::string& name, bool& ok) {
  ok = true;
  if (name == "phi") return (1 + boost::multiprecision::sqrt(Big(5))) / 2;
  if (name == "sqrt2") return boost::multiprecision::sqrt(Big(2));
  if (name == "sqrt3") return boost::multiprecision::sqrt(Big(3));
  if (name == "sqrt5") return boost::multiprecision::sqrt(Big(5));
  if (name == "e") return boost::multiprecision::exp(Big(1));
  if (name == "pi") return boost::math::constants::pi<Big>();
  ok = false;
  return Big(0);
}

inline Big parse_big(const std::string& raw) {
  std::string text = raw;
  bool negative = false;
  if (!text.empty() && text[0] == '-') {
    negative = true;
    text = text.substr(1);
  }
  // "name-1", "name+2" style offsets on a named constant.
  std::string name = text;
  Big offset = 0;
  if (const auto pos = text.find_first_of("+-"); pos != std::string::npos && pos > 0) {
    name = text.substr(0, pos);
    const std::string rest = text.substr(pos + 1);
    try {
      std::size_t used = 0;
      const long long k = std::stoll(rest, &used);
      if (used != rest.size()) throw ArgumentError("bad offset");
      offset = text[pos] == '-' ? Big(-k) : Big(k);
    } catch (const std::exception&) {
      name = text;
      offset = 0;
    }
  }
  bool ok = false;
  Big value = named_constant(name, ok);
  if (ok) {
    value += offset;
  } else {
    for (char c : text) {
      if (!(std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == 'e' || c == 'E' ||
            c == '+' || c == '-')) {
        throw ArgumentError("not a real constant: '" + raw + "'");
      }
    }
    try {
      value = Big(text);
    } catch (const std::exception&) {
      throw ArgumentError("not a real constant: '" + raw + "'");
    }
  }
  return negative ? Big(-value) : value;
}

}  // namespace spiral::detail
