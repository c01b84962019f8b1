#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "refl/dense.hpp"

namespace refl {

// A training pair addressed by rows of the unified embedding table.
struct UnifiedPair {
  std::uint32_t left = 0;   // row in [0, |E1|)
  std::uint32_t right = 0;  // row in [|E1|, |E1|+|E2|)

  friend auto operator<=>(const UnifiedPair&, const UnifiedPair&) = default;
};

double manhattan_distance(std::span<const double> a, std::span<const double> b);

// Per pair and per corrupted side, the neg_k hardest candidates: the
// entities of the opposite KG closest (Manhattan, on current embeddings) to
// the kept entity, the true counterpart excluded. Candidates are stored in
// (distance, id) order.
struct NegativeCache {
  std::size_t neg_k = 0;
  std::size_t refresh_epoch = 0;
  std::vector<std::uint32_t> corrupt_right;  // |pairs| * neg_k, replaces the right entity
  std::vector<std::uint32_t> corrupt_left;   // |pairs| * neg_k, replaces the left entity

  bool operator==(const NegativeCache&) const = default;
};

NegativeCache sample_negatives(const DenseMatrix& embeddings, std::span<const UnifiedPair> pairs,
                               std::size_t g1_entity_count, std::size_t neg_k);

// Margin loss summed over every (pair, cached corruption) combination:
//   max(dist(e_i, e_j) - dist(e_i', e_j') + margin, 0),  dist = Manhattan.
// The subgradient of |.| at 0 is taken as 0. Gradients are accumulated into
// grad_embeddings (same shape as embeddings).
double triplet_loss(const DenseMatrix& embeddings, std::span<const UnifiedPair> pairs,
                    const NegativeCache& negatives, double margin,
                    DenseMatrix& grad_embeddings);

}  // namespace refl
