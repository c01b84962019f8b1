// Times the OpenMP kernels against the serial reference implementation on a
// synthetic graph: forward pass, backward pass, and score-matrix ranking.

#include <chrono>
#include <functional>
#include <cstdio>
#include <string>
#include <vector>

#include "refl/eval.hpp"
#include "refl/model.hpp"
#include "refl/parallel.hpp"
#include "refl/reference.hpp"
#include "refl/synth.hpp"

using namespace refl;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm-up
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

}  // namespace

int main(int argc, char** argv) {
  SynthOptions opts;
  opts.entities = 4000;
  opts.relations = 40;
  opts.triples = 20000;
  opts.hub_bias = 0.4;
  int reps = 3;
  if (argc > 1) opts.entities = (std::size_t)std::stoul(argv[1]);
  if (argc > 2) opts.triples = (std::size_t)std::stoul(argv[2]);
  if (argc > 3) reps = std::stoi(argv[3]);

  const TripleStore base = make_random_kg(opts);
  const KnowledgeGraphPair pair = make_aligned_pair(base, 1.0, 11);
  const NeighborIndex index = build_union_index(pair);
  const AggregationPlan plan = build_plan(index);

  ModelConfig cfg;
  cfg.dim = 64;
  cfg.layers = 2;
  cfg.dropout = 0.0;
  cfg.epochs = 0;
  const ParameterStore params = init_params(index, cfg);

  std::printf("graph: %zu entities, %zu edges, d=%zu, l=%zu\n", plan.entity_count,
              plan.edge_count(), cfg.dim, cfg.layers);

  ForwardResult fwd = forward_model(plan, params, cfg, false);
  DenseMatrix upstream(fwd.embeddings.rows, fwd.embeddings.cols);
  for (std::size_t i = 0; i < upstream.values.size(); ++i)
    upstream.values[i] = (double)((i * 2654435761u) % 1000) / 1000.0 - 0.5;

  std::vector<std::uint32_t> left, right;
  for (const auto& p : pair.alignment) {
    left.push_back(p.left);
    right.push_back(index.unified_g2_entity(p.right));
  }

  const double ref_fwd = time_ms([&] { (void)reference::forward_model(plan, params, cfg, false); }, reps);
  const double ref_bwd = time_ms(
      [&] {
        ParameterStore p2 = params;
        reference::backward_model(plan, fwd.trace, upstream, p2);
      },
      reps);

  std::printf("%-28s %10s %10s %10s\n", "kernel", "serial-ref", "parallel", "speedup");
  const int max_threads = par::threads();
  par::set_threads(max_threads);
  const double par_fwd = time_ms([&] { (void)forward_model(plan, params, cfg, false); }, reps);
  const double par_bwd = time_ms(
      [&] {
        ParameterStore p2 = params;
        backward_model(plan, fwd.trace, upstream, p2);
      },
      reps);
  std::printf("%-28s %9.2fms %9.2fms %9.2fx\n", "forward (2 layers)", ref_fwd, par_fwd,
              ref_fwd / par_fwd);
  std::printf("%-28s %9.2fms %9.2fms %9.2fx\n", "backward (2 layers)", ref_bwd, par_bwd,
              ref_bwd / par_bwd);

  par::set_threads(1);
  const double score_1 =
      time_ms([&] { (void)pairwise_scores(fwd.embeddings, left, right); }, reps);
  par::set_threads(max_threads);
  const double score_n =
      time_ms([&] { (void)pairwise_scores(fwd.embeddings, left, right); }, reps);
  std::printf("%-28s %9.2fms %9.2fms %9.2fx\n", "score matrix", score_1, score_n,
              score_1 / score_n);

  ScoreMatrix scores = pairwise_scores(fwd.embeddings, left, right);
  par::set_threads(1);
  const double csls_1 = time_ms([&] { (void)csls_adjust(scores, 10); }, reps);
  par::set_threads(max_threads);
  const double csls_n = time_ms([&] { (void)csls_adjust(scores, 10); }, reps);
  std::printf("%-28s %9.2fms %9.2fms %9.2fx\n", "csls adjust", csls_1, csls_n, csls_1 / csls_n);
  par::set_threads(0);
  return 0;
}
