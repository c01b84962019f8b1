#include "refl/dense.hpp"

#include <cmath>
#include <stdexcept>

#include "refl/rng.hpp"

namespace refl {

DenseMatrix he_init(std::size_t rows, std::size_t cols, std::uint64_t rng_seed) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("he_init: rows and cols must be >= 1");
  DenseMatrix m(rows, cols);
  Rng rng(mix_key(rng_seed, {rows, cols}));
  const double stddev = std::sqrt(2.0 / (double)cols);
  for (double& v : m.values) v = stddev * rng.normal();
  return m;
}

bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

bool all_finite(const DenseMatrix& m) { return all_finite(std::span<const double>(m.values)); }

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace refl
