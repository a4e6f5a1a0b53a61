#pragma once

#include <stdexcept>
#include <string>

namespace fptlab {

/// Absolute tolerance used by every comparison that does not take an explicit one.
inline constexpr double default_tolerance = 1e-9;

class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point was handed to an operator outside the operator's domain.
class domain_error : public error {
 public:
  using error::error;
};

/// The fixed-point hypotheses cannot be met (no admissible contraction margin,
/// neither dichotomy branch holds, ...). Expected on the sharp counterexamples.
class hypothesis_violation : public error {
 public:
  using error::error;
};

/// A numerical estimator could not produce a usable value (no cluster, all
/// sample pairs degenerate, no usable sequence family).
class estimation_error : public error {
 public:
  using error::error;
};

}  // namespace fptlab
