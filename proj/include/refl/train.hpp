#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "refl/kg.hpp"
#include "refl/loss.hpp"
#include "refl/model.hpp"

namespace refl {

struct TrainOptions {
  enum class Mode { basic, semi };
  Mode mode = Mode::basic;
  // Semi-supervised schedule: mutual-nearest-neighbor pseudo seeds are
  // re-derived from scratch at expand_start, then every expand_every epochs.
  std::size_t expand_start = 600;
  std::size_t expand_every = 300;
  std::size_t csls_k = 10;
};

struct TrainReport {
  std::vector<double> epoch_loss;
  std::vector<double> epoch_seconds;
  std::size_t final_epoch = 0;
  std::uint64_t rng_seed = 0;
};

// Everything that evolves across epochs; a checkpoint is exactly this plus
// the config and split.
struct TrainState {
  ParameterStore params;
  NegativeCache negatives;
  std::vector<UnifiedPair> pseudo_pairs;
  std::size_t next_epoch = 0;
};

class TrainDivergedError : public std::runtime_error {
 public:
  TrainDivergedError(std::size_t epoch_, double loss_)
      : std::runtime_error("training diverged: non-finite loss at epoch " +
                           std::to_string(epoch_)),
        epoch(epoch_),
        loss(loss_) {}
  std::size_t epoch;
  double loss;
};

UnifiedPair to_unified(const AlignedPair& p, const NeighborIndex& index);
std::vector<UnifiedPair> to_unified(std::span<const AlignedPair> pairs,
                                    const NeighborIndex& index);

TrainState init_train_state(const NeighborIndex& index, const ModelConfig& cfg);

// Runs epochs [state.next_epoch, cfg.epochs). Per epoch: training-mode
// forward, triplet loss over the full train set, exact backward, one RMSprop
// step. Negatives are refreshed on eval-mode embeddings every
// neg_refresh_epochs. Deterministic per seed, including across resumes and
// worker counts. Throws TrainDivergedError on a non-finite loss.
TrainReport train_epochs(const KnowledgeGraphPair& pair, const NeighborIndex& index,
                         const SeedSplit& split, const ModelConfig& cfg,
                         const TrainOptions& opts, TrainState& state);

// Fresh-state convenience wrapper.
std::pair<ParameterStore, TrainReport> train(const KnowledgeGraphPair& pair,
                                             const NeighborIndex& index, const SeedSplit& split,
                                             const ModelConfig& cfg,
                                             const TrainOptions& opts = {});

// All (x, y) from the candidate sets that are mutually nearest across KGs
// under CSLS-adjusted cosine. Candidate lists must be id-sorted; ties
// resolve toward the smaller id.
std::vector<UnifiedPair> expand_seeds_mnn(const DenseMatrix& embeddings,
                                          std::span<const std::uint32_t> left_candidates,
                                          std::span<const std::uint32_t> right_candidates,
                                          std::size_t csls_k = 10);

}  // namespace refl
