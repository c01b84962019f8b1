#include "refl/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "refl/parallel.hpp"

namespace refl {

double manhattan_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("manhattan_distance: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

namespace {

inline double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// The neg_k nearest rows of emb in [range_begin, range_end) to anchor,
// excluding `excluded`. Ties resolve toward the smaller id.
void nearest_rows(const DenseMatrix& emb, std::span<const double> anchor,
                  std::uint32_t range_begin, std::uint32_t range_end, std::uint32_t excluded,
                  std::size_t neg_k, std::uint32_t* out) {
  using Cand = std::pair<double, std::uint32_t>;
  std::vector<Cand> heap;  // max-heap on (dist, id): the worst kept candidate on top
  heap.reserve(neg_k + 1);
  for (std::uint32_t row = range_begin; row < range_end; ++row) {
    if (row == excluded) continue;
    const double dist = manhattan_distance(anchor, emb.row(row));
    if (heap.size() < neg_k) {
      heap.emplace_back(dist, row);
      std::push_heap(heap.begin(), heap.end());
    } else if (Cand{dist, row} < heap.front()) {
      std::pop_heap(heap.begin(), heap.end());
      heap.back() = {dist, row};
      std::push_heap(heap.begin(), heap.end());
    }
  }
  std::sort_heap(heap.begin(), heap.end());
  for (std::size_t q = 0; q < neg_k; ++q) out[q] = heap[q].second;
}

}  // namespace

NegativeCache sample_negatives(const DenseMatrix& embeddings, std::span<const UnifiedPair> pairs,
                               std::size_t g1_entity_count, std::size_t neg_k) {
  if (neg_k < 1) throw std::invalid_argument("sample_negatives: neg_k must be >= 1");
  const auto n1 = (std::uint32_t)g1_entity_count;
  const auto n = (std::uint32_t)embeddings.rows;
  if (n1 < neg_k + 1 || n - n1 < neg_k + 1)
    throw std::runtime_error("sample_negatives: opposite KG smaller than neg_k + 1 entities");

  NegativeCache cache;
  cache.neg_k = neg_k;
  cache.corrupt_right.resize(pairs.size() * neg_k);
  cache.corrupt_left.resize(pairs.size() * neg_k);

#pragma omp parallel for schedule(dynamic, 8) num_threads(par::threads())
  for (long long pi = 0; pi < (long long)pairs.size(); ++pi) {
    const UnifiedPair& pr = pairs[pi];
    nearest_rows(embeddings, embeddings.row(pr.left), n1, n, pr.right, neg_k,
                 cache.corrupt_right.data() + (std::size_t)pi * neg_k);
    nearest_rows(embeddings, embeddings.row(pr.right), 0, n1, pr.left, neg_k,
                 cache.corrupt_left.data() + (std::size_t)pi * neg_k);
  }
  return cache;
}

double triplet_loss(const DenseMatrix& embeddings, std::span<const UnifiedPair> pairs,
                    const NegativeCache& negatives, double margin,
                    DenseMatrix& grad_embeddings) {
  if (pairs.empty()) throw std::runtime_error("triplet_loss: empty train set");
  if (!grad_embeddings.same_shape(embeddings))
    throw std::invalid_argument("triplet_loss: gradient shape mismatch");
  if (negatives.corrupt_right.size() != pairs.size() * negatives.neg_k ||
      negatives.corrupt_left.size() != pairs.size() * negatives.neg_k)
    throw std::invalid_argument("triplet_loss: negative cache does not match the pair list");

  const std::size_t dim = embeddings.cols;
  const std::size_t k = negatives.neg_k;
  double loss = 0.0;

  for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
    const auto a = pairs[pi].left;
    const auto b = pairs[pi].right;
    const auto ea = embeddings.row(a);
    const auto eb = embeddings.row(b);
    const double pos = manhattan_distance(ea, eb);
    std::size_t active = 0;  // hinge terms whose positive part contributes

    for (std::size_t q = 0; q < k; ++q) {
      const auto nright = negatives.corrupt_right[pi * k + q];
      const auto en = embeddings.row(nright);
      const double neg = manhattan_distance(ea, en);
      const double term = pos - neg + margin;
      if (term > 0.0) {
        loss += term;
        ++active;
        auto ga = grad_embeddings.row(a);
        auto gn = grad_embeddings.row(nright);
        for (std::size_t c = 0; c < dim; ++c) {
          const double s = sgn(ea[c] - en[c]);
          ga[c] -= s;
          gn[c] += s;
        }
      }
    }
    for (std::size_t q = 0; q < k; ++q) {
      const auto nleft = negatives.corrupt_left[pi * k + q];
      const auto en = embeddings.row(nleft);
      const double neg = manhattan_distance(en, eb);
      const double term = pos - neg + margin;
      if (term > 0.0) {
        loss += term;
        ++active;
        auto gn = grad_embeddings.row(nleft);
        auto gb = grad_embeddings.row(b);
        for (std::size_t c = 0; c < dim; ++c) {
          const double s = sgn(en[c] - eb[c]);
          gn[c] -= s;
          gb[c] += s;
        }
      }
    }

    if (active > 0) {
      auto ga = grad_embeddings.row(a);
      auto gb = grad_embeddings.row(b);
      for (std::size_t c = 0; c < dim; ++c) {
        const double s = (double)active * sgn(ea[c] - eb[c]);
        ga[c] += s;
        gb[c] -= s;
      }
    }
  }
  return loss;
}

}  // namespace refl
