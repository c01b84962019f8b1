#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace refl {

// Row-major dense matrix of doubles. The only tensor type in the project;
// everything larger is expressed as loops over rows.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

  std::span<double> row(std::size_t i) { return {values.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * cols, cols}; }

  double& at(std::size_t i, std::size_t j) { return values[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }

  std::size_t size() const { return values.size(); }
  void zero() { values.assign(values.size(), 0.0); }

  bool same_shape(const DenseMatrix& o) const { return rows == o.rows && cols == o.cols; }
  bool operator==(const DenseMatrix& o) const = default;
};

// Entries i.i.d. normal, mean 0, standard deviation sqrt(2 / cols).
// Deterministic per seed.
DenseMatrix he_init(std::size_t rows, std::size_t cols, std::uint64_t rng_seed);

bool all_finite(std::span<const double> v);
bool all_finite(const DenseMatrix& m);

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> v);

}  // namespace refl
