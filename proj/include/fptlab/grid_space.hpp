#pragma once

// Dyadic piecewise-constant model of L1([0,1]) with Lebesgue measure.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "fptlab/error.hpp"

namespace fptlab {

/// Finest grid the dense representation accepts (2^24 cells, 128 MiB).
inline constexpr int max_grid_level = 24;

/// A function on [0,1] that is constant on each of the 2^level dyadic cells
/// [i 2^-level, (i+1) 2^-level).
class GridFunction {
 public:
  GridFunction() : values_(1, 0.0) {}

  GridFunction(int level, std::vector<double> values)
      : level_(level), values_(std::move(values)) {
    if (level < 0 || level > max_grid_level)
      throw std::invalid_argument(fmt::format("grid level {} outside [0, {}]", level, max_grid_level));
    if (values_.size() != (std::size_t{1} << level))
      throw std::invalid_argument(fmt::format("grid level {} needs {} values, got {}", level,
                                              std::size_t{1} << level, values_.size()));
    for (double v : values_)
      if (!std::isfinite(v)) throw std::invalid_argument("grid values must be finite");
  }

  static GridFunction constant(double c, int level) {
    check_level(level);
    return GridFunction(level, std::vector<double>(std::size_t{1} << level, c));
  }
  static GridFunction zero(int level) { return constant(0.0, level); }

  int level() const noexcept { return level_; }
  std::size_t size() const noexcept { return values_.size(); }
  double cell_width() const noexcept { return std::ldexp(1.0, -level_); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  GridFunction& operator+=(const GridFunction& other) { return combine(other, 1.0); }
  GridFunction& operator-=(const GridFunction& other) { return combine(other, -1.0); }
  GridFunction& operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
  }

  friend bool operator==(const GridFunction&, const GridFunction&) = default;

 private:
  static void check_level(int level) {
    if (level < 0 || level > max_grid_level)
      throw std::invalid_argument(fmt::format("grid level {} outside [0, {}]", level, max_grid_level));
  }

  GridFunction& combine(const GridFunction& other, double sign);

  int level_ = 0;
  std::vector<double> values_;
};

/// Duplicates each cell 2^(new_level - level) times. Integrals and pointwise
/// values are unchanged; coarsening is not offered.
inline GridFunction refine(const GridFunction& f, int new_level) {
  if (new_level < f.level())
    throw std::invalid_argument(
        fmt::format("cannot refine level {} down to level {}", f.level(), new_level));
  if (new_level > max_grid_level)
    throw std::invalid_argument(fmt::format("grid level {} exceeds {}", new_level, max_grid_level));
  if (new_level == f.level()) return f;
  const std::size_t factor = std::size_t{1} << (new_level - f.level());
  std::vector<double> out;
  out.reserve(f.size() * factor);
  for (double v : f.values()) out.insert(out.end(), factor, v);
  return GridFunction(new_level, std::move(out));
}

/// Both operands refined to the finer of the two levels.
inline std::pair<GridFunction, GridFunction> co_refine(const GridFunction& f, const GridFunction& g) {
  const int level = std::max(f.level(), g.level());
  return {refine(f, level), refine(g, level)};
}

inline GridFunction& GridFunction::combine(const GridFunction& other, double sign) {
  if (other.level_ > level_) *this = refine(*this, other.level_);
  if (other.level_ == level_) {
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += sign * other.values_[i];
  } else {
    const int shift = level_ - other.level_;
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += sign * other.values_[i >> shift];
  }
  return *this;
}

inline GridFunction operator+(GridFunction f, const GridFunction& g) { return f += g; }
inline GridFunction operator-(GridFunction f, const GridFunction& g) { return f -= g; }
inline GridFunction operator*(double s, GridFunction f) { return f *= s; }
inline GridFunction operator*(GridFunction f, double s) { return f *= s; }
inline GridFunction operator/(GridFunction f, double s) { return f *= 1.0 / s; }
inline GridFunction operator-(GridFunction f) { return f *= -1.0; }

inline double l1_norm(const GridFunction& f) {
  double sum = 0.0;
  for (double v : f.values()) sum += std::abs(v);
  return sum * f.cell_width();
}

inline double norm(const GridFunction& f) { return l1_norm(f); }

inline double integral(const GridFunction& f) {
  double sum = 0.0;
  for (double v : f.values()) sum += v;
  return sum * f.cell_width();
}

/// Integral of the negative part.
inline double negative_mass(const GridFunction& f) {
  double sum = 0.0;
  for (double v : f.values()) sum += std::max(-v, 0.0);
  return sum * f.cell_width();
}

/// Ky Fan metric for convergence in measure: the integral of min(|f - g|, 1).
inline double ky_fan_distance(const GridFunction& f, const GridFunction& g) {
  const int level = std::max(f.level(), g.level());
  const int fs = level - f.level();
  const int gs = level - g.level();
  const std::size_t n = std::size_t{1} << level;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::min(std::abs(f[i >> fs] - g[i >> gs]), 1.0);
  return sum * std::ldexp(1.0, -level);
}

inline bool is_power_of_two(std::uint64_t n) { return n != 0 && std::has_single_bit(n); }

/// n * indicator of [0, 1/n): unit mass escaping to the origin.
inline GridFunction peak_sequence(std::uint64_t n, int level) {
  if (!is_power_of_two(n)) throw std::invalid_argument(fmt::format("peak index {} is not a power of 2", n));
  if (level < 0 || level > max_grid_level)
    throw std::invalid_argument(fmt::format("grid level {} outside [0, {}]", level, max_grid_level));
  const std::size_t cells = std::size_t{1} << level;
  if (n > cells) throw std::invalid_argument(fmt::format("peak {} not resolvable at level {}", n, level));
  std::vector<double> v(cells, 0.0);
  std::fill_n(v.begin(), cells / n, static_cast<double>(n));
  return GridFunction(level, std::move(v));
}

/// Rademacher function r_n: +1, -1 alternating on blocks of width 2^-n.
inline GridFunction rademacher(int n, int level) {
  if (n < 1) throw std::invalid_argument("rademacher index must be >= 1");
  if (level < n)
    throw std::invalid_argument(fmt::format("rademacher r_{} needs level >= {}, got {}", n, n, level));
  if (level > max_grid_level)
    throw std::invalid_argument(fmt::format("grid level {} exceeds {}", level, max_grid_level));
  const std::size_t cells = std::size_t{1} << level;
  std::vector<double> v(cells);
  for (std::size_t i = 0; i < cells; ++i) v[i] = ((i >> (level - n)) % 2 == 0) ? 1.0 : -1.0;
  return GridFunction(level, std::move(v));
}

/// Indicator of [lo, hi); both endpoints must sit on the level's dyadic grid.
inline GridFunction indicator(double lo, double hi, int level) {
  if (level < 0 || level > max_grid_level)
    throw std::invalid_argument(fmt::format("grid level {} outside [0, {}]", level, max_grid_level));
  if (!(0.0 <= lo && lo <= hi && hi <= 1.0))
    throw std::invalid_argument(fmt::format("bad interval [{}, {})", lo, hi));
  const double scale = std::ldexp(1.0, level);
  const double a = lo * scale;
  const double b = hi * scale;
  if (a != std::floor(a) || b != std::floor(b))
    throw std::invalid_argument(fmt::format("[{}, {}) is not dyadic at level {}", lo, hi, level));
  std::vector<double> v(std::size_t{1} << level, 0.0);
  std::fill(v.begin() + static_cast<std::ptrdiff_t>(a), v.begin() + static_cast<std::ptrdiff_t>(b), 1.0);
  return GridFunction(level, std::move(v));
}

inline void to_json(nlohmann::json& j, const GridFunction& f) {
  j = nlohmann::json{{"level", f.level()},
                     {"values", std::vector<double>(f.values().begin(), f.values().end())}};
}

inline void from_json(const nlohmann::json& j, GridFunction& f) {
  for (const auto& [key, _] : j.items())
    if (key != "level" && key != "values")
      throw std::invalid_argument(fmt::format("unknown grid function key '{}'", key));
  f = GridFunction(j.at("level").get<int>(), j.at("values").get<std::vector<double>>());
}

// ---------------------------------------------------------------------------
// Finite-window surrogates for limsup / liminf.

/// A finite prefix of a real sequence together with the fraction of trailing
/// terms that stands in for "eventually".
struct RealSequenceWindow {
  std::vector<double> terms;
  double window_fraction = 0.5;
};

/// Number of trailing terms, ceil(fraction * n), kept by the tail operations.
inline std::size_t tail_count(std::size_t n, double window_fraction) {
  if (!(window_fraction > 0.0 && window_fraction <= 1.0))
    throw std::invalid_argument(fmt::format("window fraction {} outside (0, 1]", window_fraction));
  // the guard keeps e.g. 0.1 * 30 from rounding up to 4
  const auto k = static_cast<std::size_t>(std::ceil(window_fraction * static_cast<double>(n) - 1e-9));
  return std::clamp<std::size_t>(k, 1, n);
}

inline std::span<const double> tail(std::span<const double> terms, double window_fraction) {
  if (terms.empty()) throw std::invalid_argument("tail of an empty sequence");
  const std::size_t k = tail_count(terms.size(), window_fraction);
  return terms.subspan(terms.size() - k);
}

inline double limsup_tail(std::span<const double> terms, double window_fraction = 0.5) {
  const auto t = tail(terms, window_fraction);
  return *std::max_element(t.begin(), t.end());
}

inline double liminf_tail(std::span<const double> terms, double window_fraction = 0.5) {
  const auto t = tail(terms, window_fraction);
  return *std::min_element(t.begin(), t.end());
}

inline double limsup_tail(const RealSequenceWindow& s) { return limsup_tail(s.terms, s.window_fraction); }
inline double liminf_tail(const RealSequenceWindow& s) { return liminf_tail(s.terms, s.window_fraction); }

}  // namespace fptlab
