#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "refl/kg.hpp"
#include "refl/model.hpp"

namespace refl {

enum class DistanceMetric { cosine, l2 };

// Shape-similarity numerator/denominator: the summed |distance difference|
// over aligned sample pairs vs. over randomly corrupted quadruples. Near 0
// for matching distributions, near 1 for unrelated ones.
struct SSReport {
  double numerator = 0.0;
  double denominator = 0.0;
  double ss = 0.0;
  DistanceMetric metric = DistanceMetric::cosine;
  std::size_t sample_size = 0;
  std::uint64_t rng_seed = 0;
};

// Embeddings are L2-normalized before measuring. Samples m aligned pairs;
// for every ordered pair-of-pairs (i != j) the numerator adds
// |dist(e_i, e_j) - dist(e~_i, e~_j)| and the denominator adds the same term
// after replacing one uniformly chosen entity of the quadruple with a random
// entity from the same KG. Deterministic per seed.
SSReport shape_similarity(const DenseMatrix& emb1, const DenseMatrix& emb2,
                          std::span<const AlignedPair> aligned, DistanceMetric metric,
                          std::size_t m, std::uint64_t rng_seed);

// ||W^T W - I||_F^2. Throws on non-square input.
double orthogonality_residual(const DenseMatrix& w);

struct IsometryReport {
  double max_norm_deviation = 0.0;
  double max_inner_product_deviation = 0.0;
  std::size_t norm_checks = 0;
  std::size_t inner_product_checks = 0;
  std::size_t differentiation_pairs = 0;
  std::size_t differentiation_failures = 0;
  std::size_t parallel_pairs_skipped = 0;
};

// Over all (relation, probe) combinations: how far reflection drifts from
// preserving norms and inner products. Also verifies that non-parallel
// relation vectors transform at least one probe differently.
IsometryReport isometry_report(const DenseMatrix& relation_vectors,
                               const DenseMatrix& probe_vectors);

// Self-supervised shape-builder: trains the network with only the apart
// half of the loss, max(margin - ||h_x - h_y||_1, 0) over uniformly sampled
// cross-KG pairs, resampled each epoch. No alignment supervision.
ParameterStore apart_loss_train(const KnowledgeGraphPair& pair, const NeighborIndex& index,
                                const ModelConfig& cfg, double margin);

// TSV export of final embeddings: URI, KG tag, then (layers + 2) * dim
// values at 17 significant digits.
void export_embeddings(const KnowledgeGraphPair& pair, const NeighborIndex& index,
                       const ModelConfig& cfg, const ParameterStore& params,
                       const std::filesystem::path& path);

}  // namespace refl
