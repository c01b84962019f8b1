#include "refl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "refl/parallel.hpp"

namespace refl {

namespace {

DenseMatrix normalized_rows(const DenseMatrix& emb, std::span<const std::uint32_t> rows) {
  DenseMatrix out(rows.size(), emb.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = emb.row(rows[i]);
    const double nrm = l2_norm(src);
    if (nrm == 0.0)
      throw std::runtime_error("pairwise_scores: zero-norm embedding for entity " +
                               std::to_string(rows[i]));
    auto dst = out.row(i);
    for (std::size_t c = 0; c < emb.cols; ++c) dst[c] = src[c] / nrm;
  }
  return out;
}

}  // namespace

ScoreMatrix pairwise_scores(const DenseMatrix& embeddings,
                            std::span<const std::uint32_t> left_rows,
                            std::span<const std::uint32_t> right_rows) {
  const DenseMatrix lhs = normalized_rows(embeddings, left_rows);
  const DenseMatrix rhs = normalized_rows(embeddings, right_rows);
  ScoreMatrix scores(lhs.rows, rhs.rows);
#pragma omp parallel for schedule(static) num_threads(par::threads())
  for (long long i = 0; i < (long long)lhs.rows; ++i) {
    double* out = scores.values.data() + (std::size_t)i * scores.cols;
    const auto a = lhs.row(i);
    for (std::size_t j = 0; j < rhs.rows; ++j) out[j] = dot(a, rhs.row(j));
  }
  return scores;
}

ScoreMatrix csls_adjust(const ScoreMatrix& scores, std::size_t k) {
  if (k < 1 || k > scores.rows || k > scores.cols)
    throw std::invalid_argument("csls_adjust: k out of range");

  std::vector<double> row_mean(scores.rows), col_mean(scores.cols);
#pragma omp parallel num_threads(par::threads())
  {
    std::vector<double> buf;
#pragma omp for schedule(static)
    for (long long i = 0; i < (long long)scores.rows; ++i) {
      const auto r = scores.row(i);
      buf.assign(r.begin(), r.end());
      std::partial_sort(buf.begin(), buf.begin() + k, buf.end(), std::greater<>());
      double s = 0.0;
      for (std::size_t q = 0; q < k; ++q) s += buf[q];
      row_mean[i] = s / (double)k;
    }
#pragma omp for schedule(static)
    for (long long j = 0; j < (long long)scores.cols; ++j) {
      buf.resize(scores.rows);
      for (std::size_t i = 0; i < scores.rows; ++i) buf[i] = scores.at(i, j);
      std::partial_sort(buf.begin(), buf.begin() + k, buf.end(), std::greater<>());
      double s = 0.0;
      for (std::size_t q = 0; q < k; ++q) s += buf[q];
      col_mean[j] = s / (double)k;
    }
  }

  ScoreMatrix adjusted(scores.rows, scores.cols);
#pragma omp parallel for schedule(static) num_threads(par::threads())
  for (long long i = 0; i < (long long)scores.rows; ++i)
    for (std::size_t j = 0; j < scores.cols; ++j)
      adjusted.at(i, j) = 2.0 * scores.at(i, j) - row_mean[i] - col_mean[j];
  return adjusted;
}

std::vector<std::size_t> compute_ranks(
    const ScoreMatrix& scores, std::span<const std::pair<std::uint32_t, std::uint32_t>> truth,
    Direction direction) {
  for (const auto& [row, col] : truth)
    if (row >= scores.rows || col >= scores.cols)
      throw std::invalid_argument("compute_ranks: truth pair outside the score matrix");

  std::vector<std::size_t> ranks(truth.size());
#pragma omp parallel for schedule(static) num_threads(par::threads())
  for (long long t = 0; t < (long long)truth.size(); ++t) {
    const auto [row, col] = truth[t];
    std::size_t rank = 1;
    if (direction == Direction::left_to_right) {
      const double s = scores.at(row, col);
      for (std::size_t j = 0; j < scores.cols; ++j) {
        const double v = scores.at(row, j);
        if (v > s || (v == s && j < col)) ++rank;
      }
    } else {
      const double s = scores.at(row, col);
      for (std::size_t i = 0; i < scores.rows; ++i) {
        const double v = scores.at(i, col);
        if (v > s || (v == s && i < row)) ++rank;
      }
    }
    ranks[t] = rank;
  }
  return ranks;
}

EvalOutcome evaluate_alignment(const DenseMatrix& embeddings, const SeedSplit& split,
                               const NeighborIndex& index, bool use_csls, std::size_t csls_k) {
  if (split.test.empty()) throw std::runtime_error("evaluate_alignment: empty test split");

  std::vector<std::uint32_t> left, right;
  left.reserve(split.test.size());
  right.reserve(split.test.size());
  for (const auto& p : split.test) {
    left.push_back(p.left);
    right.push_back(index.unified_g2_entity(p.right));
  }
  std::sort(left.begin(), left.end());
  std::sort(right.begin(), right.end());

  auto position = [](const std::vector<std::uint32_t>& ids, std::uint32_t id) {
    return (std::uint32_t)(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
  };
  std::vector<std::pair<std::uint32_t, std::uint32_t>> truth;
  truth.reserve(split.test.size());
  for (const auto& p : split.test)
    truth.emplace_back(position(left, p.left), position(right, index.unified_g2_entity(p.right)));

  ScoreMatrix scores = pairwise_scores(embeddings, left, right);
  if (use_csls)
    scores = csls_adjust(scores, std::max<std::size_t>(
                                     1, std::min({csls_k, scores.rows, scores.cols})));

  EvalOutcome outcome;
  outcome.left_to_right =
      compute_metrics(compute_ranks(scores, truth, Direction::left_to_right));
  outcome.right_to_left =
      compute_metrics(compute_ranks(scores, truth, Direction::right_to_left));
  return outcome;
}

RankingReport compute_metrics(std::span<const std::size_t> ranks) {
  if (ranks.empty()) throw std::invalid_argument("compute_metrics: empty rank list");
  RankingReport rep;
  rep.ranks.assign(ranks.begin(), ranks.end());
  std::size_t h1 = 0, h5 = 0, h10 = 0;
  double rr = 0.0;
  for (std::size_t r : ranks) {
    h1 += r <= 1;
    h5 += r <= 5;
    h10 += r <= 10;
    rr += 1.0 / (double)r;
  }
  const double n = (double)ranks.size();
  rep.hits1 = (double)h1 / n;
  rep.hits5 = (double)h5 / n;
  rep.hits10 = (double)h10 / n;
  rep.mrr = rr / n;
  return rep;
}

}  // namespace refl
