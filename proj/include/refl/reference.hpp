#pragma once

#include "refl/model.hpp"

namespace refl::reference {

// Serial, scatter-style implementations of the aggregation network, written
// directly from the layer definition with no transposed indices and no
// OpenMP. They exist as the oracle the parallel kernels are tested against
// and as the baseline in the benchmark; training never calls them.

ForwardResult forward_model(const AggregationPlan& plan, const ParameterStore& params,
                            const ModelConfig& cfg, bool training, std::uint64_t dropout_key = 0);

void backward_model(const AggregationPlan& plan, const ForwardTrace& trace,
                    const DenseMatrix& upstream, ParameterStore& params);

}  // namespace refl::reference
