#pragma once

#include <cstdint>
#include <vector>

#include "refl/dense.hpp"
#include "refl/kg.hpp"
#include "refl/optim.hpp"

namespace refl {

struct ModelConfig {
  std::size_t dim = 100;
  std::size_t layers = 2;
  double margin = 3.0;
  double dropout = 0.3;
  double learning_rate = 0.005;
  std::size_t epochs = 3000;
  std::size_t neg_k = 25;
  std::size_t neg_refresh_epochs = 5;
  std::uint64_t rng_seed = 1;
  // Ablation switches: use_reflection=false turns the per-relation
  // reflection into the identity; use_dual_aspect=false drops the
  // relation-mean tail from the final embedding.
  bool use_reflection = true;
  bool use_dual_aspect = true;

  // Width of the final embedding: layers + 1 concatenated layer outputs
  // plus the relation-mean tail when enabled.
  std::size_t output_dim() const { return (layers + 1 + (use_dual_aspect ? 1 : 0)) * dim; }

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

// Graph layout derived from a NeighborIndex, with the transposed views the
// backward pass gathers over. All orders are fixed at build time, so every
// reduction sums in the same order no matter how many threads run.
struct AggregationPlan {
  std::size_t entity_count = 0;
  std::size_t relation_count = 0;
  std::uint32_t self_loop = 0;
  std::size_t g1_entity_count = 0;

  // target-major CSR (same content as the NeighborIndex)
  std::vector<std::size_t> edge_offsets;
  std::vector<std::uint32_t> edge_neighbor;
  std::vector<std::uint32_t> edge_relation;
  std::vector<std::uint32_t> edge_target;

  // edges that read entity j as a neighbor, grouped by j
  std::vector<std::size_t> in_offsets;
  std::vector<std::uint32_t> in_edge;

  // edges grouped by relation
  std::vector<std::size_t> byrel_offsets;
  std::vector<std::uint32_t> byrel_edge;

  // distinct incident relations per entity, self-loop excluded (the
  // relation-mean tail), plus the reverse view grouped by relation
  std::vector<std::size_t> relset_offsets;
  std::vector<std::uint32_t> relset_rel;
  std::vector<std::size_t> relinc_offsets;
  std::vector<std::uint32_t> relinc_entity;

  std::size_t edge_count() const { return edge_neighbor.size(); }
  std::size_t degree(std::size_t i) const { return edge_offsets[i + 1] - edge_offsets[i]; }
  std::size_t relset_size(std::size_t i) const {
    return relset_offsets[i + 1] - relset_offsets[i];
  }
};

AggregationPlan build_plan(const NeighborIndex& index);

// Parameter table names inside the ParameterStore.
inline constexpr const char* kEntityTable = "entity_table";
inline constexpr const char* kRelationTable = "relation_table";
std::string attention_name(std::size_t layer);

// He-initialized entity table (N x d), relation table (R_u x d) and one
// 3d attention vector per layer.
ParameterStore init_params(const NeighborIndex& index, const ModelConfig& cfg);

// Everything the backward pass needs from a forward run.
struct ForwardTrace {
  std::size_t layers = 0;
  std::size_t dim = 0;
  bool training = false;
  bool dual_aspect = true;
  double dropout_rate = 0.0;
  double reflect_scale = 2.0;  // 0 when reflection is ablated

  DenseMatrix rel_unit;          // unit-normalized relation vectors
  std::vector<double> rel_norm;  // their original norms

  // dropout scales applied to the raw entity embeddings (all ones in eval
  // mode); layer_inputs[0] is the already-scaled table
  DenseMatrix input_scale;
  // layer_inputs[l] is the input of layer l; layer_inputs[layers] the last
  // output. Entries are post-ReLU, post-dropout.
  std::vector<DenseMatrix> layer_inputs;
  // relu'(s) * dropout scale, one per layer
  std::vector<DenseMatrix> deriv_scale;
  // per-edge attention weights and per-edge dot(rel_unit, h_neighbor)
  std::vector<std::vector<double>> attention;
  std::vector<std::vector<double>> refl_dot;
};

struct ForwardResult {
  DenseMatrix embeddings;  // N x (layers + 2) * dim
  ForwardTrace trace;
};

// Dropout scale factors for one entity row: 0 with probability `rate`,
// 1 / (1 - rate) otherwise. Keyed by (key, layer, row), so masks do not
// depend on evaluation order.
void dropout_scale_row(std::uint64_t key, std::size_t layer, std::size_t row, double rate,
                       std::span<double> out);

// One aggregation layer: per edge (j, k) of entity i the score is
// v^T [h_i || reflect(r_k, h_j) || unit(r_k)], softmax-normalized over i's
// edge list; the output is ReLU of the attention-weighted reflection sum,
// with inverted dropout at train time. `trace` must have rel_unit filled.
DenseMatrix forward_layer(const AggregationPlan& plan, const DenseMatrix& h_in,
                          const ParameterStore& params, std::size_t layer, bool training,
                          ForwardTrace& trace, std::uint64_t dropout_key);

// Full pass: all layers, layer concatenation, relation-mean tail.
ForwardResult forward_model(const AggregationPlan& plan, const ParameterStore& params,
                            const ModelConfig& cfg, bool training, std::uint64_t dropout_key = 0);

// Exact reverse pass of forward_model. Gradients are accumulated (+=) into
// the store's gradient buffers. Reduction orders are fixed, so results do
// not depend on the worker count.
void backward_model(const AggregationPlan& plan, const ForwardTrace& trace,
                    const DenseMatrix& upstream, ParameterStore& params);

}  // namespace refl
