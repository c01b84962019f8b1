#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "refl/dense.hpp"
#include "refl/kg.hpp"

namespace refl {

// Similarity matrix, higher is better. Rows are the left candidates, columns
// the right candidates, in the id order the caller supplied.
using ScoreMatrix = DenseMatrix;

// Cosine similarity of L2-normalized embedding rows. Throws on zero-norm
// rows, naming the entity id.
ScoreMatrix pairwise_scores(const DenseMatrix& embeddings,
                            std::span<const std::uint32_t> left_rows,
                            std::span<const std::uint32_t> right_rows);

// Cross-domain similarity local scaling:
//   adjusted(x, y) = 2 s(x, y) - r_row(x) - r_col(y)
// with r_* the mean of the k largest similarities in the row / column of the
// input matrix.
ScoreMatrix csls_adjust(const ScoreMatrix& scores, std::size_t k);

enum class Direction { left_to_right, right_to_left };

// Rank (1-based) of the true counterpart among all candidates on the queried
// side. Ties resolve toward the smaller candidate index, i.e. the smaller id
// when candidates were supplied id-sorted.
std::vector<std::size_t> compute_ranks(const ScoreMatrix& scores,
                                       std::span<const std::pair<std::uint32_t, std::uint32_t>> truth,
                                       Direction direction);

struct RankingReport {
  std::vector<std::size_t> ranks;
  double hits1 = 0.0;
  double hits5 = 0.0;
  double hits10 = 0.0;
  double mrr = 0.0;
};

RankingReport compute_metrics(std::span<const std::size_t> ranks);

struct EvalOutcome {
  RankingReport left_to_right;
  RankingReport right_to_left;
};

// Ranks every test pair against the test-side entities of the opposite KG,
// id-sorted, in both directions. With use_csls the score matrix is
// CSLS-adjusted with neighborhood min(csls_k, #rows, #cols).
EvalOutcome evaluate_alignment(const DenseMatrix& embeddings, const SeedSplit& split,
                               const NeighborIndex& index, bool use_csls,
                               std::size_t csls_k = 10);

}  // namespace refl

