#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "refl/dense.hpp"

namespace refl {

// Accumulator of squared gradients, same shape as the parameter it serves.
struct RmsPropState {
  DenseMatrix acc;
  double decay = 0.9;
  double epsilon = 1e-8;
};

struct Parameter {
  std::string name;
  DenseMatrix value;
  DenseMatrix grad;
  RmsPropState opt;
};

// Named parameter tables with their gradient buffers and optimizer state.
// Iteration follows insertion order, which fixes the update order.
class ParameterStore {
 public:
  Parameter& add(std::string name, DenseMatrix init);
  Parameter& get(std::string_view name);
  const Parameter& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::span<Parameter> entries() { return params_; }
  std::span<const Parameter> entries() const { return params_; }

  void zero_gradients();
  std::size_t total_values() const;

 private:
  std::vector<Parameter> params_;
};

// For every entry: acc <- decay*acc + (1-decay)*g^2, value <- value - lr*g/(sqrt(acc)+eps).
// Gradients are zeroed afterwards. Throws on non-finite gradient entries.
void rmsprop_step(ParameterStore& store, double learning_rate);

}  // namespace refl
