#include "refl/reference.hpp"

#include <cmath>
#include <stdexcept>

#include "refl/reflect.hpp"
#include "refl/softmax.hpp"

namespace refl::reference {

namespace {

std::vector<double> unit(std::span<const double> v) {
  const double nrm = l2_norm(v);
  if (nrm == 0.0) throw std::runtime_error("reference: zero-norm relation vector");
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / nrm;
  return out;
}

// reflect(r, x) with the ablation switch honored
std::vector<double> transform(std::span<const double> rel_raw, std::span<const double> x,
                              double reflect_scale) {
  if (reflect_scale == 0.0) return {x.begin(), x.end()};
  return reflect(rel_raw, x);
}

DenseMatrix forward_layer(const AggregationPlan& plan, const DenseMatrix& h_in,
                          const ParameterStore& params, const DenseMatrix& rel,
                          std::size_t layer, bool training, ForwardTrace& trace,
                          std::uint64_t dropout_key) {
  const std::size_t n = plan.entity_count;
  const std::size_t d = h_in.cols;
  const DenseMatrix& v = params.get(attention_name(layer)).value;

  trace.attention[layer].assign(plan.edge_count(), 0.0);
  trace.refl_dot[layer].assign(plan.edge_count(), 0.0);
  trace.deriv_scale[layer] = DenseMatrix(n, d);

  DenseMatrix out(n, d);
  std::vector<double> concat(3 * d);
  std::vector<double> drop(d, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t b = plan.edge_offsets[i], e = plan.edge_offsets[i + 1];

    std::vector<double> scores;
    std::vector<std::vector<double>> reflected;
    for (std::size_t p = b; p < e; ++p) {
      const auto xj = h_in.row(plan.edge_neighbor[p]);
      const auto rr = rel.row(plan.edge_relation[p]);
      const std::vector<double> ru = unit(rr);
      trace.refl_dot[layer][p] = dot(ru, xj);
      std::vector<double> m = transform(rr, xj, trace.reflect_scale);
      const auto xi = h_in.row(i);
      std::copy(xi.begin(), xi.end(), concat.begin());
      std::copy(m.begin(), m.end(), concat.begin() + d);
      std::copy(ru.begin(), ru.end(), concat.begin() + 2 * d);
      scores.push_back(dot(v.row(0), concat));
      reflected.push_back(std::move(m));
    }
    const std::size_t offsets[2] = {0, scores.size()};
    const std::vector<double> weights = group_softmax(scores, offsets);

    auto s = out.row(i);
    for (std::size_t p = b; p < e; ++p) {
      trace.attention[layer][p] = weights[p - b];
      for (std::size_t c = 0; c < d; ++c) s[c] += weights[p - b] * reflected[p - b][c];
    }

    if (training && trace.dropout_rate > 0.0)
      dropout_scale_row(dropout_key, layer, i, trace.dropout_rate, drop);
    auto ds = trace.deriv_scale[layer].row(i);
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
  return out;
}

}  // namespace

ForwardResult forward_model(const AggregationPlan& plan, const ParameterStore& params,
                            const ModelConfig& cfg, bool training, std::uint64_t dropout_key) {
  const std::size_t n = plan.entity_count;
  const std::size_t d = cfg.dim;
  const std::size_t L = cfg.layers;
  const DenseMatrix& rel = params.get(kRelationTable).value;

  ForwardResult res;
  ForwardTrace& trace = res.trace;
  trace.layers = L;
  trace.dim = d;
  trace.training = training;
  trace.dual_aspect = cfg.use_dual_aspect;
  trace.dropout_rate = cfg.dropout;
  trace.reflect_scale = cfg.use_reflection ? 2.0 : 0.0;
  trace.rel_unit = DenseMatrix(rel.rows, rel.cols);
  trace.rel_norm.assign(rel.rows, 0.0);
  for (std::size_t k = 0; k < rel.rows; ++k) {
    trace.rel_norm[k] = l2_norm(rel.row(k));
    const std::vector<double> ru = unit(rel.row(k));
    std::copy(ru.begin(), ru.end(), trace.rel_unit.row(k).begin());
  }
  trace.attention.resize(L);
  trace.refl_dot.resize(L);
  trace.deriv_scale.resize(L);

  trace.layer_inputs.resize(L + 1);
  trace.layer_inputs[0] = params.get(kEntityTable).value;
  trace.input_scale = DenseMatrix(n, d);
  std::vector<double> drop(d, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (training && cfg.dropout > 0.0)
      dropout_scale_row(dropout_key, L, i, cfg.dropout, drop);
    for (std::size_t c = 0; c < d; ++c) {
      trace.input_scale.at(i, c) = drop[c];
      trace.layer_inputs[0].at(i, c) *= drop[c];
    }
  }
  for (std::size_t l = 0; l < L; ++l)
    trace.layer_inputs[l + 1] = forward_layer(plan, trace.layer_inputs[l], params, rel, l,
                                              training, trace, dropout_key);

  DenseMatrix out(n, cfg.output_dim());
  for (std::size_t i = 0; i < n; ++i) {
    double* o = out.values.data() + i * out.cols;
    for (std::size_t l = 0; l <= L; ++l) {
      const auto src = trace.layer_inputs[l].row(i);
      std::copy(src.begin(), src.end(), o + l * d);
    }
    if (!cfg.use_dual_aspect) continue;
    double* tail = o + (L + 1) * d;
    const std::size_t cnt = plan.relset_size(i);
    for (std::size_t p = plan.relset_offsets[i]; p < plan.relset_offsets[i + 1]; ++p) {
      const auto rr = rel.row(plan.relset_rel[p]);
      for (std::size_t c = 0; c < d; ++c) tail[c] += rr[c] / (double)cnt;
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
  const double C = trace.reflect_scale;
  const std::size_t want_cols = (L + 1 + (trace.dual_aspect ? 1 : 0)) * d;
  if (upstream.rows != n || upstream.cols != want_cols)
    throw std::invalid_argument("reference backward: upstream shape mismatch");

  DenseMatrix& g_ent = params.get(kEntityTable).grad;
  DenseMatrix& g_rel = params.get(kRelationTable).grad;

  // relation-mean tail
  for (std::size_t i = 0; trace.dual_aspect && i < n; ++i) {
    const std::size_t cnt = plan.relset_size(i);
    const double* gt = upstream.values.data() + i * upstream.cols + (L + 1) * d;
    for (std::size_t p = plan.relset_offsets[i]; p < plan.relset_offsets[i + 1]; ++p) {
      auto gr = g_rel.row(plan.relset_rel[p]);
      for (std::size_t c = 0; c < d; ++c) gr[c] += gt[c] / (double)cnt;
    }
  }

  DenseMatrix g_run(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const double* src = upstream.values.data() + i * upstream.cols + L * d;
    std::copy(src, src + d, g_run.row(i).begin());
  }

  std::vector<double> m(d), g_m(d);
  for (std::size_t l = L; l-- > 0;) {
    const DenseMatrix& x = trace.layer_inputs[l];
    const auto& alpha = trace.attention[l];
    const DenseMatrix& v = params.get(attention_name(l)).value;
    DenseMatrix& g_v = params.get(attention_name(l)).grad;
    const double* v1 = v.values.data();
    const double* v2 = v1 + d;
    const double* v3 = v2 + d;

    DenseMatrix g_next(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      const double* slot = upstream.values.data() + i * upstream.cols + l * d;
      for (std::size_t c = 0; c < d; ++c) g_next.at(i, c) += slot[c];
    }

    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t b = plan.edge_offsets[i], e = plan.edge_offsets[i + 1];
      std::vector<double> g_s(d);
      for (std::size_t c = 0; c < d; ++c)
        g_s[c] = g_run.at(i, c) * trace.deriv_scale[l].at(i, c);

      // d(loss)/d(alpha_p) and the softmax backward
      std::vector<double> ga(e - b), gb(e - b);
      for (std::size_t p = b; p < e; ++p) {
        const std::uint32_t j = plan.edge_neighbor[p];
        const std::uint32_t k = plan.edge_relation[p];
        const auto ru = trace.rel_unit.row(k);
        for (std::size_t c = 0; c < d; ++c)
          m[c] = x.at(j, c) - C * trace.refl_dot[l][p] * ru[c];
        ga[p - b] = dot(m, g_s);
      }
      double dotsum = 0.0;
      for (std::size_t p = b; p < e; ++p) dotsum += alpha[p] * ga[p - b];
      for (std::size_t p = b; p < e; ++p) gb[p - b] = alpha[p] * (ga[p - b] - dotsum);

      for (std::size_t p = b; p < e; ++p) {
        const std::uint32_t j = plan.edge_neighbor[p];
        const std::uint32_t k = plan.edge_relation[p];
        const auto ru = trace.rel_unit.row(k);
        const double a = alpha[p];
        const double g_beta = gb[p - b];
        const double rd = trace.refl_dot[l][p];

        for (std::size_t c = 0; c < d; ++c)
          m[c] = x.at(j, c) - C * rd * ru[c];

        // score concat: beta = v1.x_i + v2.m + v3.ru
        for (std::size_t c = 0; c < d; ++c) {
          g_v.values[c] += g_beta * x.at(i, c);
          g_v.values[d + c] += g_beta * m[c];
          g_v.values[2 * d + c] += g_beta * ru[c];
          g_next.at(i, c) += g_beta * v1[c];
        }

        // g_m collects the aggregation term and the score's v2 term
        for (std::size_t c = 0; c < d; ++c) g_m[c] = a * g_s[c] + g_beta * v2[c];

        // through the reflection: x_j gets (I - C u u^T) g_m
        const double rg = dot(ru, g_m);
        for (std::size_t c = 0; c < d; ++c) g_next.at(j, c) += g_m[c] - C * rg * ru[c];

        // through the reflection and the score to the unit relation vector,
        // then through the normalization to the raw row, per edge
        std::vector<double> gu(d);
        for (std::size_t c = 0; c < d; ++c)
          gu[c] = -C * (rg * x.at(j, c) + rd * g_m[c]) + g_beta * v3[c];
        const double gdot = dot(gu, ru);
        const double nrm = trace.rel_norm[k];
        auto gr = g_rel.row(k);
        for (std::size_t c = 0; c < d; ++c) gr[c] += (gu[c] - gdot * ru[c]) / nrm;
      }
    }
    g_run = std::move(g_next);
  }

  for (std::size_t q = 0; q < n * d; ++q)
    g_ent.values[q] += g_run.values[q] * trace.input_scale.values[q];
}

}  // namespace refl::reference
