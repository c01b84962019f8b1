#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace refl {

// In-place softmax with max subtraction, so large scores cannot overflow.
inline void softmax_in_place(std::span<double> scores) {
  if (scores.empty()) throw std::invalid_argument("softmax: empty group");
  double mx = scores[0];
  for (double s : scores) mx = s > mx ? s : mx;
  double sum = 0.0;
  for (double& s : scores) {
    s = std::exp(s - mx);
    sum += s;
  }
  for (double& s : scores) s /= sum;
}

// Softmax applied independently within each group. `offsets` is CSR-style:
// group g covers scores[offsets[g], offsets[g+1]).
inline std::vector<double> group_softmax(std::span<const double> scores,
                                         std::span<const std::size_t> offsets) {
  if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != scores.size())
    throw std::invalid_argument("group_softmax: offsets do not partition the scores");
  std::vector<double> out(scores.begin(), scores.end());
  for (std::size_t g = 0; g + 1 < offsets.size(); ++g) {
    if (offsets[g + 1] <= offsets[g]) throw std::invalid_argument("group_softmax: empty group");
    softmax_in_place(std::span<double>(out).subspan(offsets[g], offsets[g + 1] - offsets[g]));
  }
  return out;
}

}  // namespace refl
