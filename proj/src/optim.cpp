#include "refl/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "refl/parallel.hpp"

namespace refl {

Parameter& ParameterStore::add(std::string name, DenseMatrix init) {
  if (contains(name)) throw std::invalid_argument("ParameterStore: duplicate parameter '" + name + "'");
  Parameter p;
  p.name = std::move(name);
  p.grad = DenseMatrix(init.rows, init.cols);
  p.opt.acc = DenseMatrix(init.rows, init.cols);
  p.value = std::move(init);
  params_.push_back(std::move(p));
  return params_.back();
}

Parameter& ParameterStore::get(std::string_view name) {
  for (auto& p : params_)
    if (p.name == name) return p;
  throw std::invalid_argument("ParameterStore: unknown parameter '" + std::string(name) + "'");
}

const Parameter& ParameterStore::get(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name == name) return p;
  throw std::invalid_argument("ParameterStore: unknown parameter '" + std::string(name) + "'");
}

bool ParameterStore::contains(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name == name) return true;
  return false;
}

void ParameterStore::zero_gradients() {
  for (auto& p : params_) p.grad.zero();
}

std::size_t ParameterStore::total_values() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void rmsprop_step(ParameterStore& store, double learning_rate) {
  for (auto& p : store.entries()) {
    const std::size_t n = p.value.size();
    double* v = p.value.values.data();
    double* g = p.grad.values.data();
    double* a = p.opt.acc.values.data();
    const double rho = p.opt.decay;
    const double eps = p.opt.epsilon;
    for (std::size_t i = 0; i < n; ++i)
      if (!std::isfinite(g[i]))
        throw std::runtime_error("rmsprop_step: non-finite gradient in '" + p.name + "'");
#pragma omp parallel for schedule(static) num_threads(par::threads())
    for (long long i = 0; i < (long long)n; ++i) {
      a[i] = rho * a[i] + (1.0 - rho) * g[i] * g[i];
      v[i] -= learning_rate * g[i] / (std::sqrt(a[i]) + eps);
      g[i] = 0.0;
    }
  }
}

}  // namespace refl
