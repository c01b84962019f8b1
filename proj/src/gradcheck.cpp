#include "refl/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "refl/rng.hpp"

namespace refl {

namespace {

double eval_or_throw(const std::function<double()>& loss_fn) {
  const double f = loss_fn();
  if (!std::isfinite(f)) throw std::runtime_error("check_gradients: loss returned non-finite value");
  return f;
}

}  // namespace

GradCheckReport check_gradients(
    const std::function<double()>& loss_fn, ParameterStore& store,
    const std::vector<std::pair<std::string, const DenseMatrix*>>& analytic,
    const GradCheckOptions& opts) {
  GradCheckReport report;
  for (const auto& [name, grad] : analytic) {
    Parameter& param = store.get(name);
    if (!param.value.same_shape(*grad))
      throw std::invalid_argument("check_gradients: analytic shape mismatch for '" + name + "'");
    const std::size_t n = param.value.size();

    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), 0);
    if (opts.max_coords_per_param < n) {
      Rng rng(mix_key(opts.sample_seed, {std::hash<std::string>{}(name)}));
      rng.shuffle(coords);
      coords.resize(opts.max_coords_per_param);
      std::sort(coords.begin(), coords.end());
    }

    for (std::size_t i : coords) {
      double& theta = param.value.values[i];
      const double saved = theta;
      theta = saved + opts.eps;
      const double f_plus = eval_or_throw(loss_fn);
      theta = saved - opts.eps;
      const double f_minus = eval_or_throw(loss_fn);
      theta = saved;

      const double numeric = (f_plus - f_minus) / (2.0 * opts.eps);
      const double a = grad->values[i];
      double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      if (std::abs(a) <= opts.zero_threshold && std::abs(numeric) <= opts.zero_threshold)
        rel = 0.0;
      ++report.coords_checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = name;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace refl
