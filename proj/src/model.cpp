#include "refl/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "refl/parallel.hpp"
#include "refl/rng.hpp"
#include "refl/softmax.hpp"

namespace refl {

void ModelConfig::validate() const {
  if (dim < 1) throw std::invalid_argument("invalid value for dim: must be >= 1");
  if (layers < 1) throw std::invalid_argument("invalid value for layers: must be >= 1");
  if (!(margin > 0.0)) throw std::invalid_argument("invalid value for margin: must be > 0");
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw std::invalid_argument("invalid value for dropout: must be in [0, 1)");
  if (!(learning_rate > 0.0))
    throw std::invalid_argument("invalid value for lr: must be > 0");
  if (neg_k < 1) throw std::invalid_argument("invalid value for neg-k: must be >= 1");
  if (neg_refresh_epochs < 1)
    throw std::invalid_argument("invalid value for neg-refresh: must be >= 1");
}

std::string attention_name(std::size_t layer) { return "attention_" + std::to_string(layer); }

AggregationPlan build_plan(const NeighborIndex& index) {
  AggregationPlan plan;
  plan.entity_count = index.unified_entity_count;
  plan.relation_count = index.unified_relation_count;
  plan.self_loop = index.self_loop_relation();
  plan.g1_entity_count = index.g1_entity_count;
  plan.edge_offsets = index.edge_offsets;
  plan.edge_neighbor = index.edge_neighbor;
  plan.edge_relation = index.edge_relation;

  const std::size_t n = plan.entity_count;
  const std::size_t e_total = plan.edge_neighbor.size();
  if (e_total >= std::numeric_limits<std::uint32_t>::max())
    throw std::runtime_error("build_plan: edge count exceeds 32-bit indexing");

  plan.edge_target.resize(e_total);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = plan.edge_offsets[i]; p < plan.edge_offsets[i + 1]; ++p)
      plan.edge_target[p] = (std::uint32_t)i;

  // incoming view, grouped by the neighbor entity, edge positions ascending
  plan.in_offsets.assign(n + 1, 0);
  for (std::size_t p = 0; p < e_total; ++p) ++plan.in_offsets[plan.edge_neighbor[p] + 1];
  for (std::size_t i = 0; i < n; ++i) plan.in_offsets[i + 1] += plan.in_offsets[i];
  plan.in_edge.resize(e_total);
  {
    std::vector<std::size_t> cur(plan.in_offsets.begin(), plan.in_offsets.end() - 1);
    for (std::size_t p = 0; p < e_total; ++p)
      plan.in_edge[cur[plan.edge_neighbor[p]]++] = (std::uint32_t)p;
  }

  // edges grouped by relation, edge positions ascending
  plan.byrel_offsets.assign(plan.relation_count + 1, 0);
  for (std::size_t p = 0; p < e_total; ++p) ++plan.byrel_offsets[plan.edge_relation[p] + 1];
  for (std::size_t r = 0; r < plan.relation_count; ++r)
    plan.byrel_offsets[r + 1] += plan.byrel_offsets[r];
  plan.byrel_edge.resize(e_total);
  {
    std::vector<std::size_t> cur(plan.byrel_offsets.begin(), plan.byrel_offsets.end() - 1);
    for (std::size_t p = 0; p < e_total; ++p)
      plan.byrel_edge[cur[plan.edge_relation[p]]++] = (std::uint32_t)p;
  }

  // distinct incident relations per entity, self-loop excluded
  plan.relset_offsets.assign(n + 1, 0);
  std::vector<std::uint32_t> scratch;
  for (std::size_t i = 0; i < n; ++i) {
    scratch.clear();
    for (std::size_t p = plan.edge_offsets[i]; p < plan.edge_offsets[i + 1]; ++p)
      if (plan.edge_relation[p] != plan.self_loop) scratch.push_back(plan.edge_relation[p]);
    std::sort(scratch.begin(), scratch.end());
    scratch.erase(std::unique(scratch.begin(), scratch.end()), scratch.end());
    plan.relset_offsets[i + 1] = plan.relset_offsets[i] + scratch.size();
    plan.relset_rel.insert(plan.relset_rel.end(), scratch.begin(), scratch.end());
  }

  // reverse view: entities whose relation-mean tail includes relation r
  plan.relinc_offsets.assign(plan.relation_count + 1, 0);
  for (std::uint32_t r : plan.relset_rel) ++plan.relinc_offsets[r + 1];
  for (std::size_t r = 0; r < plan.relation_count; ++r)
    plan.relinc_offsets[r + 1] += plan.relinc_offsets[r];
  plan.relinc_entity.resize(plan.relset_rel.size());
  {
    std::vector<std::size_t> cur(plan.relinc_offsets.begin(), plan.relinc_offsets.end() - 1);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t p = plan.relset_offsets[i]; p < plan.relset_offsets[i + 1]; ++p)
        plan.relinc_entity[cur[plan.relset_rel[p]]++] = (std::uint32_t)i;
  }
  return plan;
}

ParameterStore init_params(const NeighborIndex& index, const ModelConfig& cfg) {
  cfg.validate();
  ParameterStore store;
  store.add(kEntityTable,
            he_init(index.unified_entity_count, cfg.dim, mix_key(cfg.rng_seed, {1})));
  store.add(kRelationTable,
            he_init(index.unified_relation_count, cfg.dim, mix_key(cfg.rng_seed, {2})));
  for (std::size_t l = 0; l < cfg.layers; ++l)
    store.add(attention_name(l), he_init(1, 3 * cfg.dim, mix_key(cfg.rng_seed, {3, l})));
  return store;
}

void dropout_scale_row(std::uint64_t key, std::size_t layer, std::size_t row, double rate,
                       std::span<double> out) {
  Rng rng(mix_key(key, {0xd7, layer, row}));
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& v : out) v = rng.uniform() < rate ? 0.0 : keep_scale;
}

namespace {

// dot(v_chunk, rel_unit[k]) for every relation; chunk is the v2 or v3 slice.
std::vector<double> relation_chunk_dots(const DenseMatrix& rel_unit, const double* chunk) {
  std::vector<double> out(rel_unit.rows);
  const std::size_t d = rel_unit.cols;
#pragma omp parallel for schedule(static) num_threads(par::threads())
  for (long long k = 0; k < (long long)rel_unit.rows; ++k)
    out[k] = dot(rel_unit.row(k), {chunk, d});
  return out;
}

void normalize_relations(const ParameterStore& params, ForwardTrace& trace) {
  const DenseMatrix& rel = params.get(kRelationTable).value;
  trace.rel_unit = DenseMatrix(rel.rows, rel.cols);
  trace.rel_norm.assign(rel.rows, 0.0);
  for (std::size_t k = 0; k < rel.rows; ++k) {
    const double nrm = l2_norm(rel.row(k));
    if (nrm == 0.0)
      throw std::runtime_error("forward_model: zero-norm relation vector " + std::to_string(k));
    trace.rel_norm[k] = nrm;
    const auto src = rel.row(k);
    auto dst = trace.rel_unit.row(k);
    for (std::size_t c = 0; c < rel.cols; ++c) dst[c] = src[c] / nrm;
  }
}

}  // namespace

DenseMatrix forward_layer(const AggregationPlan& plan, const DenseMatrix& h_in,
                          const ParameterStore& params, std::size_t layer, bool training,
                          ForwardTrace& trace, std::uint64_t dropout_key) {
  const std::size_t n = plan.entity_count;
  const std::size_t d = h_in.cols;
  if (h_in.rows != n) throw std::invalid_argument("forward_layer: input row count mismatch");
  if (trace.rel_unit.rows != plan.relation_count) {
    trace.dim = d;
    normalize_relations(params, trace);
  }
  const DenseMatrix& v = params.get(attention_name(layer)).value;
  if (v.cols != 3 * d) throw std::invalid_argument("forward_layer: attention vector size mismatch");
  const double* v1 = v.values.data();
  const double* v2 = v1 + d;
  const double* v3 = v2 + d;
  const double C = trace.reflect_scale;

  if (trace.attention.size() <= layer) trace.attention.resize(layer + 1);
  if (trace.refl_dot.size() <= layer) trace.refl_dot.resize(layer + 1);
  if (trace.deriv_scale.size() <= layer) trace.deriv_scale.resize(layer + 1);
  auto& alpha = trace.attention[layer];
  auto& rdot = trace.refl_dot[layer];
  alpha.resize(plan.edge_count());
  rdot.resize(plan.edge_count());
  trace.deriv_scale[layer] = DenseMatrix(n, d);
  DenseMatrix& dscale = trace.deriv_scale[layer];

  const std::vector<double> v2r = relation_chunk_dots(trace.rel_unit, v2);
  const std::vector<double> v3r = relation_chunk_dots(trace.rel_unit, v3);

  DenseMatrix out(n, d);
#pragma omp parallel num_threads(par::threads())
  {
    std::vector<double> drop(d, 1.0);
#pragma omp for schedule(dynamic, 64)
    for (long long ii = 0; ii < (long long)n; ++ii) {
      const auto i = (std::size_t)ii;
      const std::size_t b = plan.edge_offsets[i], e = plan.edge_offsets[i + 1];
      const auto xi = h_in.row(i);
      const double self_score = dot({v1, d}, xi);

      for (std::size_t p = b; p < e; ++p) {
        const std::uint32_t j = plan.edge_neighbor[p];
        const std::uint32_t k = plan.edge_relation[p];
        const auto xj = h_in.row(j);
        const double rd = dot(trace.rel_unit.row(k), xj);
        rdot[p] = rd;
        alpha[p] = self_score + dot({v2, d}, xj) - C * rd * v2r[k] + v3r[k];
      }
      softmax_in_place(std::span<double>(alpha).subspan(b, e - b));

      double* s = out.values.data() + i * d;
      for (std::size_t p = b; p < e; ++p) {
        const auto xj = h_in.row(plan.edge_neighbor[p]);
        const auto ru = trace.rel_unit.row(plan.edge_relation[p]);
        const double a = alpha[p];
        const double ar = a * C * rdot[p];
        for (std::size_t c = 0; c < d; ++c) s[c] += a * xj[c] - ar * ru[c];
      }

      if (training && trace.dropout_rate > 0.0)
        dropout_scale_row(dropout_key, layer, i, trace.dropout_rate, drop);
      double* ds = dscale.values.data() + i * d;
      for (std::size_t c = 0; c < d; ++c) {
        if (s[c] > 0.0) {
          ds[c] = drop[c];
          s[c] *= drop[c];
        } else {
          ds[c] = 0.0;
          s[c] = 0.0;
        }
      }
    }
  }
  return out;
}

ForwardResult forward_model(const AggregationPlan& plan, const ParameterStore& params,
                            const ModelConfig& cfg, bool training, std::uint64_t dropout_key) {
  const std::size_t n = plan.entity_count;
  const std::size_t d = cfg.dim;
  const std::size_t L = cfg.layers;

  ForwardResult res;
  ForwardTrace& trace = res.trace;
  trace.layers = L;
  trace.dim = d;
  trace.training = training;
  trace.dual_aspect = cfg.use_dual_aspect;
  trace.dropout_rate = cfg.dropout;
  trace.reflect_scale = cfg.use_reflection ? 2.0 : 0.0;
  normalize_relations(params, trace);

  const DenseMatrix& ent = params.get(kEntityTable).value;
  if (ent.rows != n || ent.cols != d)
    throw std::invalid_argument("forward_model: entity table shape mismatch");

  trace.layer_inputs.resize(L + 1);
  trace.layer_inputs[0] = ent;
  // the raw embedding is a concat slot and the first layer input; it gets
  // the same inverted dropout as every other slot
  trace.input_scale = DenseMatrix(n, d);
  if (training && cfg.dropout > 0.0) {
#pragma omp parallel for schedule(static) num_threads(par::threads())
    for (long long ii = 0; ii < (long long)n; ++ii)
      dropout_scale_row(dropout_key, L, (std::size_t)ii, cfg.dropout,
                        trace.input_scale.row((std::size_t)ii));
  } else {
    trace.input_scale.values.assign(trace.input_scale.size(), 1.0);
  }
#pragma omp parallel for schedule(static) num_threads(par::threads())
  for (long long q = 0; q < (long long)(n * d); ++q)
    trace.layer_inputs[0].values[q] = ent.values[q] * trace.input_scale.values[q];

  for (std::size_t l = 0; l < L; ++l)
    trace.layer_inputs[l + 1] =
        forward_layer(plan, trace.layer_inputs[l], params, l, training, trace, dropout_key);

  const DenseMatrix& rel = params.get(kRelationTable).value;
  DenseMatrix out(n, cfg.output_dim());
#pragma omp parallel for schedule(static) num_threads(par::threads())
  for (long long ii = 0; ii < (long long)n; ++ii) {
    const auto i = (std::size_t)ii;
    double* o = out.values.data() + i * out.cols;
    for (std::size_t l = 0; l <= L; ++l) {
      const auto src = trace.layer_inputs[l].row(i);
      std::copy(src.begin(), src.end(), o + l * d);
    }
    if (!cfg.use_dual_aspect) continue;
    double* tail = o + (L + 1) * d;
    const std::size_t cnt = plan.relset_size(i);
    if (cnt > 0) {
      for (std::size_t p = plan.relset_offsets[i]; p < plan.relset_offsets[i + 1]; ++p) {
        const auto rr = rel.row(plan.relset_rel[p]);
        for (std::size_t c = 0; c < d; ++c) tail[c] += rr[c];
      }
      for (std::size_t c = 0; c < d; ++c) tail[c] /= (double)cnt;
    }
  }
  res.embeddings = std::move(out);
  return res;
}

void backward_model(const AggregationPlan& plan, const ForwardTrace& trace,
                    const DenseMatrix& upstream, ParameterStore& params) {
  const std::size_t n = plan.entity_count;
  const std::size_t d = trace.dim;
  const std::size_t L = trace.layers;
  const std::size_t E = plan.edge_count();
  const double C = trace.reflect_scale;
  const std::size_t want_cols = (L + 1 + (trace.dual_aspect ? 1 : 0)) * d;
  if (upstream.rows != n || upstream.cols != want_cols)
    throw std::invalid_argument("backward_model: upstream shape mismatch with trace");

  DenseMatrix& g_ent = params.get(kEntityTable).grad;
  DenseMatrix& g_rel = params.get(kRelationTable).grad;
  const std::size_t R = g_rel.rows;

  // relation-mean tail: gather per relation over the entities that carry it
  if (trace.dual_aspect) {
#pragma omp parallel for schedule(dynamic, 16) num_threads(par::threads())
    for (long long rr = 0; rr < (long long)R; ++rr) {
      const auto r = (std::size_t)rr;
      double* gr = g_rel.values.data() + r * d;
      for (std::size_t p = plan.relinc_offsets[r]; p < plan.relinc_offsets[r + 1]; ++p) {
        const std::uint32_t i = plan.relinc_entity[p];
        const double w = 1.0 / (double)plan.relset_size(i);
        const double* gt = upstream.values.data() + i * upstream.cols + (L + 1) * d;
        for (std::size_t c = 0; c < d; ++c) gr[c] += w * gt[c];
      }
    }
  }

  DenseMatrix g_run(n, d), g_next(n, d), g_s(n, d);
  DenseMatrix g_runit(R, d);  // grad w.r.t. unit relation vectors, all layers
  std::vector<double> g_alpha(E), g_beta(E), rdot2(E), sum_beta(n);

#pragma omp parallel for schedule(static) num_threads(par::threads())
  for (long long ii = 0; ii < (long long)n; ++ii) {
    const auto i = (std::size_t)ii;
    const double* src = upstream.values.data() + i * upstream.cols + L * d;
    std::copy(src, src + d, g_run.values.data() + i * d);
  }

  for (std::size_t l = L; l-- > 0;) {
    const DenseMatrix& x = trace.layer_inputs[l];
    const auto& alpha = trace.attention[l];
    const auto& rdot = trace.refl_dot[l];
    const DenseMatrix& dscale = trace.deriv_scale[l];
    const DenseMatrix& v = params.get(attention_name(l)).value;
    DenseMatrix& g_v = params.get(attention_name(l)).grad;
    const double* v1 = v.values.data();
    const double* v2 = v1 + d;
    const double* v3 = v2 + d;
    const std::vector<double> v2r = relation_chunk_dots(trace.rel_unit, v2);
    const std::vector<double> v3r = relation_chunk_dots(trace.rel_unit, v3);

    // through dropout and ReLU
#pragma omp parallel for schedule(static) num_threads(par::threads())
    for (long long q = 0; q < (long long)(n * d); ++q)
      g_s.values[q] = g_run.values[q] * dscale.values[q];

    // per-edge attention gradients and the softmax backward, per target
#pragma omp parallel for schedule(dynamic, 64) num_threads(par::threads())
    for (long long ii = 0; ii < (long long)n; ++ii) {
      const auto i = (std::size_t)ii;
      const std::size_t b = plan.edge_offsets[i], e = plan.edge_offsets[i + 1];
      const auto gsi = g_s.row(i);
      for (std::size_t p = b; p < e; ++p) {
        const std::uint32_t j = plan.edge_neighbor[p];
        const std::uint32_t k = plan.edge_relation[p];
        const double rd2 = dot(trace.rel_unit.row(k), gsi);
        rdot2[p] = rd2;
        g_alpha[p] = dot(x.row(j), gsi) - C * rdot[p] * rd2;
      }
      double dotsum = 0.0;
      for (std::size_t p = b; p < e; ++p) dotsum += alpha[p] * g_alpha[p];
      double sb = 0.0;
      for (std::size_t p = b; p < e; ++p) {
        const double gb = alpha[p] * (g_alpha[p] - dotsum);
        g_beta[p] = gb;
        sb += gb;
      }
      sum_beta[i] = sb;
    }

    // gradient w.r.t. the layer input: concat slot + incoming edges + own scores
#pragma omp parallel for schedule(dynamic, 64) num_threads(par::threads())
    for (long long jj = 0; jj < (long long)n; ++jj) {
      const auto j = (std::size_t)jj;
      double* gn = g_next.values.data() + j * d;
      const double* slot = upstream.values.data() + j * upstream.cols + l * d;
      const double sb = sum_beta[j];
      for (std::size_t c = 0; c < d; ++c) gn[c] = slot[c] + sb * v1[c];
      for (std::size_t q = plan.in_offsets[j]; q < plan.in_offsets[j + 1]; ++q) {
        const std::uint32_t p = plan.in_edge[q];
        const std::uint32_t i = plan.edge_target[p];
        const std::uint32_t k = plan.edge_relation[p];
        const double a = alpha[p];
        const double gb = g_beta[p];
        const double rg = a * rdot2[p] + gb * v2r[k];
        const double* gsi = g_s.values.data() + (std::size_t)i * d;
        const auto ru = trace.rel_unit.row(k);
        for (std::size_t c = 0; c < d; ++c)
          gn[c] += a * gsi[c] + gb * v2[c] - C * rg * ru[c];
      }
    }

    // gradient w.r.t. unit relation vectors, gathered per relation
#pragma omp parallel for schedule(dynamic, 16) num_threads(par::threads())
    for (long long kk = 0; kk < (long long)R; ++kk) {
      const auto k = (std::size_t)kk;
      double* gu = g_runit.values.data() + k * d;
      for (std::size_t q = plan.byrel_offsets[k]; q < plan.byrel_offsets[k + 1]; ++q) {
        const std::uint32_t p = plan.byrel_edge[q];
        const std::uint32_t i = plan.edge_target[p];
        const std::uint32_t j = plan.edge_neighbor[p];
        const double a = alpha[p];
        const double gb = g_beta[p];
        const double rd = rdot[p];
        const double rg = a * rdot2[p] + gb * v2r[k];
        const double* gsi = g_s.values.data() + (std::size_t)i * d;
        const double* xj = x.values.data() + (std::size_t)j * d;
        for (std::size_t c = 0; c < d; ++c)
          gu[c] += -C * (rg * xj[c] + rd * (a * gsi[c] + gb * v2[c])) + gb * v3[c];
      }
    }

    // attention vector gradient: coordinate blocks, edges in fixed order
    const std::size_t block = 16;
    const std::size_t nblocks = (d + block - 1) / block;
#pragma omp parallel for schedule(static) num_threads(par::threads())
    for (long long bb = 0; bb < (long long)nblocks; ++bb) {
      const std::size_t c0 = (std::size_t)bb * block;
      const std::size_t c1 = std::min(c0 + block, d);
      const std::size_t w = c1 - c0;
      std::vector<double> acc1(w, 0.0), acc2(w, 0.0), acc3(w, 0.0);
      for (std::size_t p = 0; p < E; ++p) {
        const double gb = g_beta[p];
        if (gb == 0.0) continue;
        const std::uint32_t i = plan.edge_target[p];
        const std::uint32_t j = plan.edge_neighbor[p];
        const std::uint32_t k = plan.edge_relation[p];
        const double* xi = x.values.data() + (std::size_t)i * d;
        const double* xj = x.values.data() + (std::size_t)j * d;
        const double* ru = trace.rel_unit.values.data() + (std::size_t)k * d;
        const double crd = C * rdot[p];
        for (std::size_t c = 0; c < w; ++c) {
          acc1[c] += gb * xi[c0 + c];
          acc2[c] += gb * (xj[c0 + c] - crd * ru[c0 + c]);
          acc3[c] += gb * ru[c0 + c];
        }
      }
      for (std::size_t c = 0; c < w; ++c) {
        g_v.values[c0 + c] += acc1[c];
        g_v.values[d + c0 + c] += acc2[c];
        g_v.values[2 * d + c0 + c] += acc3[c];
      }
    }

    std::swap(g_run, g_next);
  }

  // g_run holds the gradient w.r.t. the dropout-scaled entity embeddings
#pragma omp parallel for schedule(static) num_threads(par::threads())
  for (long long q = 0; q < (long long)(n * d); ++q)
    g_ent.values[q] += g_run.values[q] * trace.input_scale.values[q];

  // chain the unit normalization into the raw relation table
#pragma omp parallel for schedule(static) num_threads(par::threads())
  for (long long kk = 0; kk < (long long)R; ++kk) {
    const auto k = (std::size_t)kk;
    const auto gu = g_runit.row(k);
    const auto u = trace.rel_unit.row(k);
    const double gdot = dot(gu, u);
    const double nrm = trace.rel_norm[k];
    double* gr = g_rel.values.data() + k * d;
    for (std::size_t c = 0; c < d; ++c) gr[c] += (gu[c] - gdot * u[c]) / nrm;
  }
}

}  // namespace refl
