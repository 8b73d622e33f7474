#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace spiral {

/// Invalid input to a library call. The CLI maps this to exit code 2.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An index beyond a finite sequence was requested.
class OutOfRangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// A computation would touch sequence indices beyond the configured budget.
class BudgetExceeded : public ArgumentError {
 public:
  BudgetExceeded(std::int64_t needed, std::int64_t budget)
      : ArgumentError("index budget exceeded: needs n up to " + std::to_string(needed) +
                      ", budget is " + std::to_string(budget)),
        needed_(needed),
        budget_(budget) {}
  std::int64_t needed() const { return needed_; }
  std::int64_t budget() const { return budget_; }

 private:
  std::int64_t needed_;
  std::int64_t budget_;
};

/// Direction net is too coarse for the requested (eps, V).
class NetTooCoarse : public ArgumentError {
 public:
  NetTooCoarse(double mesh, double required)
      : ArgumentError("direction net mesh " + std::to_string(mesh) + " exceeds required mesh " +
                      std::to_string(required)),
        mesh_(mesh),
        required_(required) {}
  double mesh() const { return mesh_; }
  double required_mesh() const { return required_; }

 private:
  double mesh_;
  double required_;
};

/// The punctured-spiral redirection scan hit its cap.
class PunctureUnresolved : public std::runtime_error {
 public:
  explicit PunctureUnresolved(std::int64_t n)
      : std::runtime_error("puncture-unresolved: no replacement direction found for n = " +
                           std::to_string(n)),
        n_(n) {}
  std::int64_t index() const { return n_; }

 private:
  std::int64_t n_;
};

inline constexpr std::int64_t kDefaultIndexBudget = 10'000'000;

inline void check_budget(std::int64_t needed, std::int64_t budget) {
  if (needed > budget) throw BudgetExceeded(needed, budget);
}

}  // namespace spiral
