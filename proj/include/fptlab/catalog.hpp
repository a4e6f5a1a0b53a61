#pragma once

// Name + parameter JSON to catalog operators and bodies.

#include <cstddef>
#include <set>
#include <string>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "fptlab/operators.hpp"
#include "fptlab/sets.hpp"

namespace fptlab {

namespace detail {

inline void check_keys(const nlohmann::json& j, std::string_view what, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw std::invalid_argument(fmt::format("{} spec must be a JSON object", what));
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw std::invalid_argument(fmt::format("unknown {} parameter '{}'", what, key));
  }
}

inline std::string spec_name(const nlohmann::json& j, const char* key) {
  if (!j.is_object() || !j.contains(key) || !j.at(key).is_string())
    throw std::invalid_argument(fmt::format("spec needs a string \"{}\" entry", key));
  return j.at(key).get<std::string>();
}

}  // namespace detail

/// True for specs that live on coordinate points rather than grid functions.
inline bool is_coordinate_operator(const nlohmann::json& spec) { return detail::spec_name(spec, "op") == "ct_shift"; }
inline bool is_coordinate_body(const nlohmann::json& spec) { return detail::spec_name(spec, "set") == "ct"; }

inline AffineOperator<GridFunction> make_grid_operator(const nlohmann::json& spec) {
  const auto name = detail::spec_name(spec, "op");
  detail::check_keys(spec, "operator", {"op"});
  if (name == "doubling") return doubling_shift();
  if (name == "retraction") return normalizing_retraction();
  if (name == "retraction_compose") return composed_g();
  if (name == "cyclic") return cyclic_shift();
  if (name == "identity") return identity_operator<GridFunction>();
  throw std::invalid_argument(fmt::format("unknown grid operator '{}'", name));
}

inline AffineOperator<CoordPoint> make_coord_operator(const nlohmann::json& spec) {
  const auto name = detail::spec_name(spec, "op");
  if (name == "ct_shift") {
    detail::check_keys(spec, "operator", {"op", "t"});
    return ct_shift(spec.at("t").get<double>());
  }
  if (name == "identity") {
    detail::check_keys(spec, "operator", {"op"});
    return identity_operator<CoordPoint>();
  }
  throw std::invalid_argument(fmt::format("unknown coordinate operator '{}'", name));
}

inline ConvexBody<GridFunction> make_grid_body(const nlohmann::json& spec, int level) {
  const auto name = detail::spec_name(spec, "set");
  if (name == "density_simplex") {
    detail::check_keys(spec, "set", {"set"});
    return density_simplex(level);
  }
  if (name == "cone_hull") {
    detail::check_keys(spec, "set", {"set", "a"});
    return cone_hull(spec.at("a").get<double>(), level);
  }
  if (name == "ball") {
    detail::check_keys(spec, "set", {"set"});
    return unit_ball(level);
  }
  throw std::invalid_argument(fmt::format("unknown grid body '{}'", name));
}

/// `m` is used when the spec has no "M" entry.
inline ConvexBody<CoordPoint> make_coord_body(const nlohmann::json& spec, std::size_t m) {
  const auto name = detail::spec_name(spec, "set");
  if (name != "ct") throw std::invalid_argument(fmt::format("unknown coordinate body '{}'", name));
  detail::check_keys(spec, "set", {"set", "t", "M"});
  return ct_simplex(spec.at("t").get<double>(), spec.contains("M") ? spec.at("M").get<std::size_t>() : m);
}

}  // namespace fptlab
