#include <doctest.h>

#include <cmath>

#include "refl/eval.hpp"
#include "refl/loss.hpp"
#include "refl/model.hpp"
#include "refl/parallel.hpp"
#include "refl/reference.hpp"
#include "refl/rng.hpp"
#include "refl/synth.hpp"

using namespace refl;

namespace {

struct Fixture {
  KnowledgeGraphPair pair;
  NeighborIndex index;
  AggregationPlan plan;
  ModelConfig cfg;
  ParameterStore params;
  DenseMatrix upstream;

  Fixture() {
    SynthOptions opts;
    opts.entities = 120;
    opts.relations = 6;
    opts.triples = 450;
    opts.hub_bias = 0.3;
    pair = make_aligned_pair(make_random_kg(opts), 0.9, 17);
    index = build_union_index(pair);
    plan = build_plan(index);
    cfg.dim = 8;
    cfg.layers = 2;
    cfg.dropout = 0.0;
    cfg.rng_seed = 23;
    params = init_params(index, cfg);
    const ForwardResult fwd = forward_model(plan, params, cfg, false);
    upstream = DenseMatrix(fwd.embeddings.rows, fwd.embeddings.cols);
    Rng rng(41);
    for (double& u : upstream.values) u = rng.normal();
  }
};

double max_rel_diff(const DenseMatrix& a, const DenseMatrix& b) {
  REQUIRE(a.same_shape(b));
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max(1.0, std::max(std::abs(a.values[i]), std::abs(b.values[i])));
    worst = std::max(worst, std::abs(a.values[i] - b.values[i]) / denom);
  }
  return worst;
}

}  // namespace

TEST_CASE("forward and backward are bitwise stable across worker counts") {
  Fixture fx;

  par::set_threads(1);
  const ForwardResult f1 = forward_model(fx.plan, fx.params, fx.cfg, false);
  ParameterStore g1 = fx.params;
  backward_model(fx.plan, f1.trace, fx.upstream, g1);

  for (int threads : {2, 4}) {
    par::set_threads(threads);
    const ForwardResult fn = forward_model(fx.plan, fx.params, fx.cfg, false);
    CHECK(fn.embeddings == f1.embeddings);

    ParameterStore gn = fx.params;
    backward_model(fx.plan, fn.trace, fx.upstream, gn);
    for (std::size_t p = 0; p < gn.entries().size(); ++p)
      CHECK(gn.entries()[p].grad == g1.entries()[p].grad);
  }
  par::set_threads(0);
}

TEST_CASE("parallel kernels agree with the serial reference") {
  Fixture fx;

  SUBCASE("evaluation mode") {
    const ForwardResult kernel = forward_model(fx.plan, fx.params, fx.cfg, false);
    const ForwardResult ref = reference::forward_model(fx.plan, fx.params, fx.cfg, false);
    CHECK(max_rel_diff(kernel.embeddings, ref.embeddings) < 1e-11);

    ParameterStore gk = fx.params;
    backward_model(fx.plan, kernel.trace, fx.upstream, gk);
    ParameterStore gr = fx.params;
    reference::backward_model(fx.plan, ref.trace, fx.upstream, gr);
    for (std::size_t p = 0; p < gk.entries().size(); ++p)
      CHECK(max_rel_diff(gk.entries()[p].grad, gr.entries()[p].grad) < 1e-10);
  }

  SUBCASE("training mode shares dropout masks through the keyed stream") {
    ModelConfig cfg = fx.cfg;
    cfg.dropout = 0.4;
    const ForwardResult kernel = forward_model(fx.plan, fx.params, cfg, true, 99);
    const ForwardResult ref = reference::forward_model(fx.plan, fx.params, cfg, true, 99);
    CHECK(max_rel_diff(kernel.embeddings, ref.embeddings) < 1e-11);
  }

  SUBCASE("ablated reflection stays in lockstep too") {
    ModelConfig cfg = fx.cfg;
    cfg.use_reflection = false;
    const ForwardResult kernel = forward_model(fx.plan, fx.params, cfg, false);
    const ForwardResult ref = reference::forward_model(fx.plan, fx.params, cfg, false);
    CHECK(max_rel_diff(kernel.embeddings, ref.embeddings) < 1e-11);

    ParameterStore gk = fx.params;
    backward_model(fx.plan, kernel.trace, fx.upstream, gk);
    ParameterStore gr = fx.params;
    reference::backward_model(fx.plan, ref.trace, fx.upstream, gr);
    for (std::size_t p = 0; p < gk.entries().size(); ++p)
      CHECK(max_rel_diff(gk.entries()[p].grad, gr.entries()[p].grad) < 1e-10);
  }
}

TEST_CASE("scoring, ranking and negative sampling ignore the worker count") {
  Fixture fx;
  const ForwardResult fwd = forward_model(fx.plan, fx.params, fx.cfg, false);

  std::vector<std::uint32_t> left, right;
  for (const auto& p : fx.pair.alignment) {
    left.push_back(p.left);
    right.push_back(fx.index.unified_g2_entity(p.right));
  }
  std::vector<UnifiedPair> pairs;
  for (std::size_t i = 0; i < 40; ++i) pairs.push_back({left[i], right[i]});

  par::set_threads(1);
  const ScoreMatrix s1 = pairwise_scores(fwd.embeddings, left, right);
  const ScoreMatrix c1 = csls_adjust(s1, 10);
  const NegativeCache n1 = sample_negatives(fwd.embeddings, pairs, fx.index.g1_entity_count, 5);

  std::vector<std::pair<std::uint32_t, std::uint32_t>> truth;
  for (std::uint32_t i = 0; i < (std::uint32_t)left.size(); ++i) truth.push_back({i, i});
  const auto r1 = compute_ranks(c1, truth, Direction::left_to_right);

  for (int threads : {2, 4}) {
    par::set_threads(threads);
    CHECK(pairwise_scores(fwd.embeddings, left, right) == s1);
    CHECK(csls_adjust(s1, 10) == c1);
    CHECK(sample_negatives(fwd.embeddings, pairs, fx.index.g1_entity_count, 5) == n1);
    CHECK(compute_ranks(c1, truth, Direction::left_to_right) == r1);
  }
  par::set_threads(0);
}
