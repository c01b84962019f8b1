#include "refl/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "refl/optim.hpp"
#include "refl/reflect.hpp"
#include "refl/rng.hpp"
#include "refl/train.hpp"

namespace refl {

namespace {

DenseMatrix l2_normalized(const DenseMatrix& m) {
  DenseMatrix out(m.rows, m.cols);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double nrm = l2_norm(m.row(i));
    if (nrm == 0.0)
      throw std::runtime_error("shape_similarity: zero-norm embedding row " + std::to_string(i));
    const auto src = m.row(i);
    auto dst = out.row(i);
    for (std::size_t c = 0; c < m.cols; ++c) dst[c] = src[c] / nrm;
  }
  return out;
}

double row_distance(const DenseMatrix& m, std::size_t a, std::size_t b, DistanceMetric metric) {
  const auto x = m.row(a);
  const auto y = m.row(b);
  if (metric == DistanceMetric::cosine) return 1.0 - dot(x, y);
  double s = 0.0;
  for (std::size_t c = 0; c < x.size(); ++c) s += (x[c] - y[c]) * (x[c] - y[c]);
  return std::sqrt(s);
}

}  // namespace

SSReport shape_similarity(const DenseMatrix& emb1, const DenseMatrix& emb2,
                          std::span<const AlignedPair> aligned, DistanceMetric metric,
                          std::size_t m, std::uint64_t rng_seed) {
  if (m < 2) throw std::invalid_argument("shape_similarity: m must be >= 2");
  if (m > aligned.size())
    throw std::invalid_argument("shape_similarity: m exceeds the aligned pair count");

  const DenseMatrix n1 = l2_normalized(emb1);
  const DenseMatrix n2 = l2_normalized(emb2);

  Rng rng(mix_key(rng_seed, {0x55aa}));
  std::vector<std::size_t> order(aligned.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  order.resize(m);

  double num = 0.0, den = 0.0;
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = 0; b < m; ++b) {
      if (a == b) continue;
      const AlignedPair& p = aligned[order[a]];
      const AlignedPair& q = aligned[order[b]];
      num += std::abs(row_distance(n1, p.left, q.left, metric) -
                      row_distance(n2, p.right, q.right, metric));

      // corrupt one uniformly chosen slot of the quadruple
      std::size_t e1a = p.left, e1b = q.left, e2a = p.right, e2b = q.right;
      switch (rng.below(4)) {
        case 0: e1a = (std::size_t)rng.below(n1.rows); break;
        case 1: e2a = (std::size_t)rng.below(n2.rows); break;
        case 2: e1b = (std::size_t)rng.below(n1.rows); break;
        default: e2b = (std::size_t)rng.below(n2.rows); break;
      }
      den += std::abs(row_distance(n1, e1a, e1b, metric) -
                      row_distance(n2, e2a, e2b, metric));
    }
  }
  if (den == 0.0) throw std::runtime_error("shape_similarity: degenerate zero denominator");

  SSReport rep;
  rep.numerator = num;
  rep.denominator = den;
  rep.ss = num / den;
  rep.metric = metric;
  rep.sample_size = m;
  rep.rng_seed = rng_seed;
  return rep;
}

double orthogonality_residual(const DenseMatrix& w) {
  if (w.rows != w.cols) throw std::invalid_argument("orthogonality_residual: non-square matrix");
  const std::size_t n = w.rows;
  double residual = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < n; ++r) s += w.at(r, i) * w.at(r, j);
      const double diff = s - (i == j ? 1.0 : 0.0);
      residual += diff * diff;
    }
  }
  return residual;
}

IsometryReport isometry_report(const DenseMatrix& relation_vectors,
                               const DenseMatrix& probe_vectors) {
  if (relation_vectors.rows == 0 || probe_vectors.rows == 0)
    throw std::invalid_argument("isometry_report: empty sample");
  const std::size_t d = probe_vectors.cols;
  IsometryReport rep;

  std::vector<std::vector<std::vector<double>>> images(relation_vectors.rows);
  for (std::size_t r = 0; r < relation_vectors.rows; ++r) {
    images[r].resize(probe_vectors.rows);
    for (std::size_t p = 0; p < probe_vectors.rows; ++p)
      images[r][p] = reflect(relation_vectors.row(r), probe_vectors.row(p));
  }

  for (std::size_t r = 0; r < relation_vectors.rows; ++r) {
    for (std::size_t p = 0; p < probe_vectors.rows; ++p) {
      const double dev = std::abs(l2_norm(images[r][p]) - l2_norm(probe_vectors.row(p)));
      rep.max_norm_deviation = std::max(rep.max_norm_deviation, dev);
      ++rep.norm_checks;
      for (std::size_t q = p + 1; q < probe_vectors.rows; ++q) {
        const double before = dot(probe_vectors.row(p), probe_vectors.row(q));
        const double after = dot(images[r][p], images[r][q]);
        rep.max_inner_product_deviation =
            std::max(rep.max_inner_product_deviation, std::abs(after - before));
        ++rep.inner_product_checks;
      }
    }
  }

  // Differentiation: non-parallel relation vectors must move some probe to
  // different images.
  for (std::size_t r1 = 0; r1 < relation_vectors.rows; ++r1) {
    const double nrm1 = l2_norm(relation_vectors.row(r1));
    for (std::size_t r2 = r1 + 1; r2 < relation_vectors.rows; ++r2) {
      const double nrm2 = l2_norm(relation_vectors.row(r2));
      const double cosang =
          dot(relation_vectors.row(r1), relation_vectors.row(r2)) / (nrm1 * nrm2);
      if (std::abs(cosang) > 1.0 - 1e-12) {
        ++rep.parallel_pairs_skipped;
        continue;
      }
      ++rep.differentiation_pairs;
      bool differs = false;
      for (std::size_t p = 0; p < probe_vectors.rows && !differs; ++p) {
        for (std::size_t c = 0; c < d; ++c) {
          if (images[r1][p][c] != images[r2][p][c]) {
            differs = true;
            break;
          }
        }
      }
      if (!differs) ++rep.differentiation_failures;
    }
  }
  return rep;
}

ParameterStore apart_loss_train(const KnowledgeGraphPair& pair, const NeighborIndex& index,
                                const ModelConfig& cfg, double margin) {
  cfg.validate();
  if (pair.g1.entity_count == 0 || pair.g2.entity_count == 0)
    throw std::runtime_error("apart_loss_train: both KGs must be non-empty");
  const AggregationPlan plan = build_plan(index);
  ParameterStore params = init_params(index, cfg);
  const std::size_t n1 = pair.g1.entity_count;
  const std::size_t n2 = pair.g2.entity_count;
  // uniform cross-KG negative pairs per epoch, resampled every epoch
  const std::size_t pairs_per_epoch = 5 * (n1 + n2);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    ForwardResult fwd =
        forward_model(plan, params, cfg, true, mix_key(cfg.rng_seed, {0xa9a7, epoch}));
    const DenseMatrix& emb = fwd.embeddings;
    DenseMatrix grad(emb.rows, emb.cols);

    Rng rng(mix_key(cfg.rng_seed, {0x0a9b, epoch}));
    double loss = 0.0;
    for (std::size_t t = 0; t < pairs_per_epoch; ++t) {
      const auto x = (std::size_t)rng.below(n1);
      const auto y = n1 + (std::size_t)rng.below(n2);
      const double dist = manhattan_distance(emb.row(x), emb.row(y));
      const double term = margin - dist;
      if (term > 0.0) {
        loss += term;
        auto gx = grad.row(x);
        auto gy = grad.row(y);
        const auto ex = emb.row(x);
        const auto ey = emb.row(y);
        for (std::size_t c = 0; c < emb.cols; ++c) {
          const double s = ex[c] > ey[c] ? 1.0 : (ex[c] < ey[c] ? -1.0 : 0.0);
          gx[c] -= s;
          gy[c] += s;
        }
      }
    }
    if (!std::isfinite(loss)) throw TrainDivergedError(epoch, loss);
    backward_model(plan, fwd.trace, grad, params);
    rmsprop_step(params, cfg.learning_rate);
  }
  return params;
}

void export_embeddings(const KnowledgeGraphPair& pair, const NeighborIndex& index,
                       const ModelConfig& cfg, const ParameterStore& params,
                       const std::filesystem::path& path) {
  const AggregationPlan plan = build_plan(index);
  const DenseMatrix emb = forward_model(plan, params, cfg, false).embeddings;

  std::ofstream out(path, std::ios::binary);
  if (!out.is_open()) throw std::runtime_error("export_embeddings: cannot write " + path.string());
  char buf[64];
  auto write_row = [&](const std::string& uri, const char* tag, std::size_t row) {
    out << uri << '\t' << tag;
    const auto r = emb.row(row);
    for (double v : r) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << '\t' << buf;
    }
    out << '\n';
  };
  for (std::size_t i = 0; i < pair.g1.entity_count; ++i)
    write_row(pair.g1.entity_uris[i], "kg1", i);
  for (std::size_t i = 0; i < pair.g2.entity_count; ++i)
    write_row(pair.g2.entity_uris[i], "kg2", index.g1_entity_count + i);
  if (!out.good()) throw std::runtime_error("export_embeddings: write failed for " + path.string());
}

}  // namespace refl
