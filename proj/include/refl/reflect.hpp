#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "refl/dense.hpp"

namespace refl {

// Reflection of x across the hyperplane whose normal is `normal`:
//   y = x - 2 (u . x) u,   u = normal / ||normal||.
// Rank-1 form only; the d x d matrix I - 2 u u^T is never materialized.
inline void reflect_into(std::span<const double> normal, std::span<const double> x,
                         std::span<double> out) {
  if (normal.size() != x.size() || out.size() != x.size())
    throw std::invalid_argument("reflect: dimension mismatch");
  const double nrm = l2_norm(normal);
  if (nrm == 0.0) throw std::invalid_argument("reflect: zero-norm relation vector");
  double ux = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) ux += (normal[i] / nrm) * x[i];
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - 2.0 * ux * (normal[i] / nrm);
}

inline std::vector<double> reflect(std::span<const double> normal, std::span<const double> x) {
  std::vector<double> out(x.size());
  reflect_into(normal, x, out);
  return out;
}

}  // namespace refl
