#pragma once

// Coordinates in a disjointly supported normalized basis (g_n) of L1, with the
// first basis vector shrunk by the factor (t - 1).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace fptlab {

/// The function s_1 (t-1) g_1 + sum_{n>=2} s_n g_n, truncated after M
/// coordinates. Arithmetic is coordinatewise, so differences of members (which
/// carry negative entries) are representable too.
///
/// For the measure-side operations the basis is realized concretely as
/// g_n = 2^n * indicator[2^-n, 2^(1-n)), which is normalized, disjoint, and
/// tends to 0 in measure.
class CoordPoint {
 public:
  CoordPoint() = default;

  CoordPoint(double t, std::vector<double> coeffs) : t_(t), coeffs_(std::move(coeffs)) {
    if (!(t > 1.0 && t < 2.0)) throw std::invalid_argument(fmt::format("t = {} outside (1, 2)", t));
    if (coeffs_.empty()) throw std::invalid_argument("coordinate point needs at least one coordinate");
    for (double v : coeffs_)
      if (!std::isfinite(v)) throw std::invalid_argument("coordinates must be finite");
  }

  static CoordPoint zero(double t, std::size_t m) { return CoordPoint(t, std::vector<double>(m, 0.0)); }

  /// Basis vertex with s_n = 1 (n is 1-based). n = 1 is the shrunk vertex (t-1) g_1.
  static CoordPoint vertex(double t, std::size_t m, std::size_t n) {
    if (n < 1 || n > m) throw std::invalid_argument(fmt::format("vertex {} outside 1..{}", n, m));
    CoordPoint p = zero(t, m);
    p.coeffs_[n - 1] = 1.0;
    return p;
  }

  double t() const noexcept { return t_; }
  std::size_t size() const noexcept { return coeffs_.size(); }
  std::span<const double> coeffs() const noexcept { return coeffs_; }
  double operator[](std::size_t i) const { return coeffs_[i]; }

  /// L1 norm of basis vector n (0-based index): t-1 for the first, 1 otherwise.
  double weight(std::size_t i) const noexcept { return i == 0 ? t_ - 1.0 : 1.0; }

  CoordPoint& operator+=(const CoordPoint& o) { return combine(o, 1.0); }
  CoordPoint& operator-=(const CoordPoint& o) { return combine(o, -1.0); }
  CoordPoint& operator*=(double s) {
    for (double& v : coeffs_) v *= s;
    return *this;
  }

  friend bool operator==(const CoordPoint&, const CoordPoint&) = default;

 private:
  CoordPoint& combine(const CoordPoint& o, double sign) {
    if (o.t_ != t_ || o.coeffs_.size() != coeffs_.size())
      throw std::invalid_argument(fmt::format("incompatible coordinate points (t {} vs {}, M {} vs {})", t_,
                                              o.t_, coeffs_.size(), o.coeffs_.size()));
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += sign * o.coeffs_[i];
    return *this;
  }

  double t_ = 1.5;
  std::vector<double> coeffs_{0.0};
};

inline CoordPoint operator+(CoordPoint a, const CoordPoint& b) { return a += b; }
inline CoordPoint operator-(CoordPoint a, const CoordPoint& b) { return a -= b; }
inline CoordPoint operator*(double s, CoordPoint a) { return a *= s; }
inline CoordPoint operator*(CoordPoint a, double s) { return a *= s; }
inline CoordPoint operator/(CoordPoint a, double s) { return a *= 1.0 / s; }
inline CoordPoint operator-(CoordPoint a) { return a *= -1.0; }

/// (t-1)|s_1| + sum_{n>=2} |s_n|, the L1 norm of the represented function.
inline double norm(const CoordPoint& x) {
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += x.weight(i) * std::abs(x[i]);
  return sum;
}

/// (t-1) s_1 + sum_{n>=2} s_n, the integral of the represented function.
inline double integral(const CoordPoint& x) {
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += x.weight(i) * x[i];
  return sum;
}

inline double coefficient_sum(const CoordPoint& x) {
  double sum = 0.0;
  for (double v : x.coeffs()) sum += v;
  return sum;
}

/// Ky Fan distance of the represented functions under the concrete basis:
/// sum_n min(|c_n| 2^n, 1) 2^-n with c_n the difference of the function
/// coefficients.
inline double ky_fan_distance(const CoordPoint& x, const CoordPoint& y) {
  if (x.t() != y.t() || x.size() != y.size())
    throw std::invalid_argument("ky_fan_distance: incompatible coordinate points");
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    const double c = x.weight(i) * std::abs(x[i] - y[i]);
    sum += std::min(c * std::ldexp(1.0, n), 1.0) * std::ldexp(1.0, -n);
  }
  return sum;
}

inline void to_json(nlohmann::json& j, const CoordPoint& x) {
  j = nlohmann::json{{"t", x.t()}, {"coeffs", std::vector<double>(x.coeffs().begin(), x.coeffs().end())}};
}

inline void from_json(const nlohmann::json& j, CoordPoint& x) {
  for (const auto& [key, _] : j.items())
    if (key != "t" && key != "coeffs")
      throw std::invalid_argument(fmt::format("unknown coordinate point key '{}'", key));
  x = CoordPoint(j.at("t").get<double>(), j.at("coeffs").get<std::vector<double>>());
}

}  // namespace fptlab
