#pragma once

// What the generic algorithms need from a point type, and the two point types
// the library ships.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include <fmt/format.h>

#include "fptlab/coord_point.hpp"
#include "fptlab/grid_space.hpp"

namespace fptlab {

template <class P>
concept Point = std::regular<P> && requires(const P& a, const P& b, double s) {
  { a + b } -> std::same_as<P>;
  { a - b } -> std::same_as<P>;
  { s * a } -> std::same_as<P>;
  { norm(a) } -> std::convertible_to<double>;
  { integral(a) } -> std::convertible_to<double>;
  { ky_fan_distance(a, b) } -> std::convertible_to<double>;
};

template <Point P>
double distance(const P& a, const P& b) {
  return norm(a - b);
}

/// lambda * x + (1 - lambda) * y
template <Point P>
P convex_combination(double lambda, const P& x, const P& y) {
  return lambda * x + (1.0 - lambda) * y;
}

inline std::span<const double> components(const GridFunction& f) { return f.values(); }
inline std::span<const double> components(const CoordPoint& x) { return x.coeffs(); }

inline GridFunction with_components(const GridFunction& like, std::vector<double> v) {
  return GridFunction(like.level(), std::move(v));
}
inline CoordPoint with_components(const CoordPoint& like, std::vector<double> v) {
  return CoordPoint(like.t(), std::move(v));
}

/// Measure of the cell carrying component i.
inline double component_measure(const GridFunction& f, std::size_t) { return f.cell_width(); }
inline double component_measure(const CoordPoint&, std::size_t i) {
  return std::ldexp(1.0, -static_cast<int>(i) - 1);
}

/// Brings a sequence onto a common component layout (finest grid level).
inline std::vector<GridFunction> common_layout(std::span<const GridFunction> seq) {
  int level = 0;
  for (const auto& f : seq) level = std::max(level, f.level());
  std::vector<GridFunction> out;
  out.reserve(seq.size());
  for (const auto& f : seq) out.push_back(refine(f, level));
  return out;
}

inline std::vector<CoordPoint> common_layout(std::span<const CoordPoint> seq) {
  for (const auto& x : seq)
    if (x.size() != seq.front().size() || x.t() != seq.front().t())
      throw std::invalid_argument("coordinate sequence mixes truncations or t values");
  return {seq.begin(), seq.end()};
}

/// CSV with columns index, l1_norm, ky_fan_to_limit (1-based index).
template <Point P>
void write_sequence_csv(std::ostream& out, std::span<const P> seq, const P& limit) {
  out << "index,l1_norm,ky_fan_to_limit\n";
  for (std::size_t i = 0; i < seq.size(); ++i)
    out << fmt::format("{},{},{}\n", i + 1, norm(seq[i]), ky_fan_distance(seq[i], limit));
}

}  // namespace fptlab
