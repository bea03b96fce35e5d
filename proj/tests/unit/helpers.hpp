#pragma once

#include <optional>
#include <vector>

#include "crowd/constants.hpp"
#include "crowd/continuation.hpp"
#include "crowd/shooting.hpp"

namespace testutil {

inline crowd::ModelSpec model(crowd::ModelKind k) { return crowd::ModelSpec{k}; }

// Monotone non-constant root at phi0 with the requested direction.
inline std::optional<crowd::RadialProfile> plateau(crowd::ModelKind k, int dim, double phi0,
                                                   crowd::Monotonicity dir = crowd::Monotonicity::increasing) {
  auto m = model(k);
  auto roots = crowd::find_shooting_roots(m, crowd::default_params(m), phi0, dim);
  for (const auto& r : roots)
    if (crowd::is_monotone(r.profile) == dir) return r.profile;
  return std::nullopt;
}

inline crowd::RadialProfile constant_profile(crowd::ModelKind k, int dim, double phi0, crowd::ConstantBranch which) {
  auto m = model(k);
  auto cs = crowd::constant_solutions(m, crowd::default_params(m), phi0, crowd::Domain{dim});
  double phi = cs.roots.front().phi;
  for (const auto& r : cs.roots)
    if (r.branch_label == which) phi = r.phi;
  return crowd::RadialProfile::constant(crowd::RadialGrid{dim, 1024}, phi0, phi);
}

}  // namespace testutil
