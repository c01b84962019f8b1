#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "refl/optim.hpp"

namespace refl {

struct GradCheckOptions {
  double eps = 1e-5;
  // Coordinates checked per parameter; everything if the table is smaller.
  std::size_t max_coords_per_param = (std::size_t)-1;
  std::uint64_t sample_seed = 0;
  // Central differences cannot resolve derivatives below the rounding noise
  // of the loss divided by 2*eps. When both sides sit under this threshold
  // they count as agreeing; 0 applies no floor.
  double zero_threshold = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Central-difference check of analytic gradients. `loss_fn` must read the
// current values in `store` and be deterministic (dropout off). Per sampled
// coordinate the relative error is
//   |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
GradCheckReport check_gradients(
    const std::function<double()>& loss_fn, ParameterStore& store,
    const std::vector<std::pair<std::string, const DenseMatrix*>>& analytic,
    const GradCheckOptions& opts = {});

}  // namespace refl
