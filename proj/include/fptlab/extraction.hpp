#pragma once

// Finite-dimensional stand-in for Komlos extraction: find a cluster of
// mutually close (in measure) trailing terms and read off its limit.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <fmt/format.h>

#include "fptlab/error.hpp"
#include "fptlab/point.hpp"

namespace fptlab {

struct ExtractionOptions {
  double tol = 1e-3;            // Ky Fan radius of a cluster
  std::size_t min_length = 8;   // shortest sequence accepted
  std::size_t min_cluster = 3;  // fewest terms a cluster may have
  double window_fraction = 0.5;
  std::size_t max_candidates = 256;  // trailing terms examined
  std::size_t max_seeds = 32;
  double norm_bound = 1e6;
};

template <Point P>
struct Extraction {
  std::vector<std::size_t> indices;  // 0-based, increasing
  P limit;
  double quality = 0.0;  // max Ky Fan distance from the limit to a selected term
};

namespace detail {

// Function value carried by one unit of component i.
inline double component_scale(const GridFunction&, std::size_t) { return 1.0; }
inline double component_scale(const CoordPoint& x, std::size_t i) {
  return x.weight(i) / component_measure(x, i);
}

}  // namespace detail

/// Cellwise median of the given terms. A cell whose values spread over at
/// least 1 across the terms carries mass that is still moving (it escapes in
/// measure) and is set to 0.
template <Point P>
P median_limit(std::span<const P> terms) {
  if (terms.empty()) throw std::invalid_argument("median_limit of no terms");
  const auto laid = common_layout(terms);
  const std::size_t dim = components(laid.front()).size();
  std::vector<double> out(dim);
  std::vector<double> column(laid.size());
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t k = 0; k < laid.size(); ++k) column[k] = components(laid[k])[i];
    const auto [lo, hi] = std::minmax_element(column.begin(), column.end());
    if ((*hi - *lo) * detail::component_scale(laid.front(), i) >= 1.0) {
      out[i] = 0.0;
      continue;
    }
    const std::size_t mid = column.size() / 2;
    std::nth_element(column.begin(), column.begin() + static_cast<std::ptrdiff_t>(mid), column.end());
    double m = column[mid];
    if (column.size() % 2 == 0) {
      const double below = *std::max_element(column.begin(), column.begin() + static_cast<std::ptrdiff_t>(mid));
      m = 0.5 * (m + below);
    }
    out[i] = m;
  }
  return with_components(laid.front(), std::move(out));
}

/// Limit in measure of a sequence read off its trailing window, with the
/// largest Ky Fan distance from it to a trailing term.
template <Point P>
std::pair<P, double> detect_limit(std::span<const P> seq, double window_fraction = 0.5) {
  if (seq.empty()) throw std::invalid_argument("detect_limit of an empty sequence");
  const std::size_t k = tail_count(seq.size(), window_fraction);
  const auto trailing = seq.subspan(seq.size() - k);
  P limit = median_limit(trailing);
  double quality = 0.0;
  for (const auto& x : trailing) quality = std::max(quality, ky_fan_distance(limit, x));
  return {limit, quality};
}

/// Greedy cluster growth on the trailing window in the Ky Fan metric. Each of
/// up to `max_seeds` trailing terms (latest first) seeds a cluster, candidates
/// join in order of distance to the seed when within tol of every member, and
/// the largest cluster whose median limit stays within tol of all its members
/// wins.
template <Point P>
Extraction<P> komlos_extract(std::span<const P> seq, const ExtractionOptions& opts = {}) {
  if (seq.size() < opts.min_length)
    throw estimation_error(
        fmt::format("sequence of length {} is shorter than {}: extend the sequence", seq.size(), opts.min_length));
  for (const auto& x : seq)
    if (!(norm(x) <= opts.norm_bound))
      throw std::invalid_argument(fmt::format("sequence is not norm-bounded by {}", opts.norm_bound));

  const std::size_t n = seq.size();
  const std::size_t k = std::min(tail_count(n, opts.window_fraction), std::max<std::size_t>(opts.max_candidates, 1));
  const std::size_t first = n - k;
  const auto laid = common_layout(seq.subspan(first));

  std::vector<double> dist(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) dist[i * k + j] = dist[j * k + i] = ky_fan_distance(laid[i], laid[j]);

  std::vector<std::size_t> seeds;
  const std::size_t n_seeds = std::min(k, std::max<std::size_t>(opts.max_seeds, 1));
  for (std::size_t q = 0; q < n_seeds; ++q) seeds.push_back(k - 1 - q * k / n_seeds);

  std::optional<Extraction<P>> best;
  double best_cluster_distance = 0.0;
  std::vector<std::size_t> order(k);
  for (std::size_t seed : seeds) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dist[seed * k + a] < dist[seed * k + b]; });
    std::vector<std::size_t> members;
    for (std::size_t c : order) {
      if (dist[seed * k + c] > opts.tol) break;
      if (std::all_of(members.begin(), members.end(), [&](std::size_t m) { return dist[c * k + m] <= opts.tol; }))
        members.push_back(c);
    }
    if (members.size() < opts.min_cluster) continue;
    std::sort(members.begin(), members.end());

    std::vector<P> cluster;
    for (std::size_t m : members) cluster.push_back(laid[m]);
    P limit = median_limit(std::span<const P>(cluster));
    Extraction<P> candidate{{}, limit, 0.0};
    for (std::size_t m : members) {
      const double d = ky_fan_distance(limit, laid[m]);
      if (d <= opts.tol) {
        candidate.indices.push_back(first + m);
        candidate.quality = std::max(candidate.quality, d);
      }
    }
    if (candidate.indices.size() < opts.min_cluster) continue;
    if (!best || candidate.indices.size() > best->indices.size() ||
        (candidate.indices.size() == best->indices.size() && candidate.quality < best_cluster_distance)) {
      best_cluster_distance = candidate.quality;
      best = std::move(candidate);
    }
  }
  if (!best)
    throw estimation_error(fmt::format("no cluster of {} terms within Ky Fan {} among the last {}: extend the sequence",
                                       opts.min_cluster, opts.tol, k));
  return *best;
}

}  // namespace fptlab
