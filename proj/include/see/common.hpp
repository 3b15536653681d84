#pragma once

#include <cstdint>
#include <cstdio>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace see {

// Default numeric tolerances, shared across modules.
inline constexpr double kKernelTol = 1e-12;   // kernel row normalization
inline constexpr double kValueTol = 1e-10;    // policy-evaluation residual
inline constexpr double kCertTol = 1e-8;      // equilibrium certification
inline constexpr double kCompareTol = 1e-9;   // Pareto / selection comparisons
inline constexpr unsigned long long kDefaultBudget = 4'000'000ULL;

class ModelError : public std::runtime_error {
 public:
  explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

class SolveError : public std::runtime_error {
 public:
  SolveError(const std::string& what, double last_residual)
      : std::runtime_error(what), last_residual(last_residual) {}
  double last_residual;
};

class BudgetError : public std::runtime_error {
 public:
  BudgetError(const std::string& what, unsigned long long required,
              unsigned long long budget)
      : std::runtime_error(what), required(required), budget(budget) {}
  unsigned long long required;
  unsigned long long budget;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line, std::string key)
      : std::runtime_error(what), line(line), key(std::move(key)) {}
  int line;
  std::string key;
};

/// Formats a double with 12 significant digits. All serialized numbers go
/// through here so that golden files are stable across runs and platforms.
inline std::string format_g12(double v) {
  if (v == 0.0) return "0";  // normalize -0
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

/// FNV-1a 64-bit over a byte string; used for model fingerprints.
inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string to_hex(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Uniform inclusive grid with `count` points from lo to hi.
inline std::vector<double> linspace(double lo, double hi, int count) {
  if (count < 1) throw ModelError("linspace: count must be >= 1");
  std::vector<double> g(count);
  if (count == 1) {
    g[0] = lo;
    return g;
  }
  const double step = (hi - lo) / (count - 1);
  for (int i = 0; i < count; ++i) g[i] = lo + step * i;
  g.back() = hi;
  return g;
}

/// Index of the grid point nearest to v. Exact midpoints round up
/// (toward the larger value) so snapping is deterministic.
inline int nearest_index(const std::vector<double>& grid, double v) {
  if (grid.empty()) throw ModelError("nearest_index: empty grid");
  int best = 0;
  double best_d = std::abs(v - grid[0]);
  for (int i = 1; i < static_cast<int>(grid.size()); ++i) {
    const double d = std::abs(v - grid[i]);
    if (d < best_d || (d == best_d && grid[i] > grid[best])) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

}  // namespace see
