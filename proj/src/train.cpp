#include "refl/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "refl/eval.hpp"
#include "refl/rng.hpp"

namespace refl {

namespace {

constexpr std::uint64_t kDropoutTag = 0xd20f;

std::vector<std::uint32_t> sorted_side(std::span<const AlignedPair> pairs,
                                       const NeighborIndex& index, bool left) {
  std::vector<std::uint32_t> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs)
    out.push_back(left ? p.left : index.unified_g2_entity(p.right));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

UnifiedPair to_unified(const AlignedPair& p, const NeighborIndex& index) {
  return {p.left, index.unified_g2_entity(p.right)};
}

std::vector<UnifiedPair> to_unified(std::span<const AlignedPair> pairs,
                                    const NeighborIndex& index) {
  std::vector<UnifiedPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(to_unified(p, index));
  return out;
}

TrainState init_train_state(const NeighborIndex& index, const ModelConfig& cfg) {
  TrainState state;
  state.params = init_params(index, cfg);
  return state;
}

TrainReport train_epochs(const KnowledgeGraphPair& pair, const NeighborIndex& index,
                         const SeedSplit& split, const ModelConfig& cfg,
                         const TrainOptions& opts, TrainState& state) {
  (void)pair;
  cfg.validate();
  const AggregationPlan plan = build_plan(index);
  const std::vector<UnifiedPair> gold = to_unified(split.train, index);
  const std::vector<std::uint32_t> test_left = sorted_side(split.test, index, true);
  const std::vector<std::uint32_t> test_right = sorted_side(split.test, index, false);

  TrainReport report;
  report.rng_seed = cfg.rng_seed;
  report.final_epoch = state.next_epoch;

  std::vector<UnifiedPair> pairs = gold;
  pairs.insert(pairs.end(), state.pseudo_pairs.begin(), state.pseudo_pairs.end());

  for (std::size_t epoch = state.next_epoch; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();

    const bool expand = opts.mode == TrainOptions::Mode::semi && epoch >= opts.expand_start &&
                        (epoch - opts.expand_start) % opts.expand_every == 0 &&
                        !split.test.empty();
    const bool refresh = expand || epoch % cfg.neg_refresh_epochs == 0 ||
                         state.negatives.corrupt_right.size() != pairs.size() * cfg.neg_k;
    if (refresh) {
      const DenseMatrix emb = forward_model(plan, state.params, cfg, false).embeddings;
      if (expand) {
        const std::size_t k =
            std::min({opts.csls_k, test_left.size(), test_right.size(), std::size_t{10}});
        state.pseudo_pairs = expand_seeds_mnn(emb, test_left, test_right, std::max<std::size_t>(k, 1));
        pairs = gold;
        pairs.insert(pairs.end(), state.pseudo_pairs.begin(), state.pseudo_pairs.end());
      }
      state.negatives = sample_negatives(emb, pairs, index.g1_entity_count, cfg.neg_k);
      state.negatives.refresh_epoch = epoch;
    }

    ForwardResult fwd =
        forward_model(plan, state.params, cfg, true, mix_key(cfg.rng_seed, {kDropoutTag, epoch}));
    DenseMatrix grad_emb(fwd.embeddings.rows, fwd.embeddings.cols);
    const double loss = triplet_loss(fwd.embeddings, pairs, state.negatives, cfg.margin, grad_emb);
    if (!std::isfinite(loss)) throw TrainDivergedError(epoch, loss);
    backward_model(plan, fwd.trace, grad_emb, state.params);
    rmsprop_step(state.params, cfg.learning_rate);

    const auto t1 = std::chrono::steady_clock::now();
    report.epoch_loss.push_back(loss);
    report.epoch_seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
    report.final_epoch = epoch + 1;
    state.next_epoch = epoch + 1;
  }
  return report;
}

std::pair<ParameterStore, TrainReport> train(const KnowledgeGraphPair& pair,
                                             const NeighborIndex& index, const SeedSplit& split,
                                             const ModelConfig& cfg, const TrainOptions& opts) {
  TrainState state = init_train_state(index, cfg);
  TrainReport report = train_epochs(pair, index, split, cfg, opts, state);
  return {std::move(state.params), std::move(report)};
}

std::vector<UnifiedPair> expand_seeds_mnn(const DenseMatrix& embeddings,
                                          std::span<const std::uint32_t> left_candidates,
                                          std::span<const std::uint32_t> right_candidates,
                                          std::size_t csls_k) {
  std::vector<UnifiedPair> out;
  if (left_candidates.empty() || right_candidates.empty()) return out;

  ScoreMatrix scores = pairwise_scores(embeddings, left_candidates, right_candidates);
  const std::size_t k = std::min({csls_k, scores.rows, scores.cols});
  scores = csls_adjust(scores, std::max<std::size_t>(k, 1));

  std::vector<std::size_t> best_col(scores.rows), best_row(scores.cols, 0);
  std::vector<double> col_best(scores.cols, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < scores.rows; ++i) {
    const auto r = scores.row(i);
    std::size_t arg = 0;
    for (std::size_t j = 1; j < r.size(); ++j)
      if (r[j] > r[arg]) arg = j;
    best_col[i] = arg;
    for (std::size_t j = 0; j < r.size(); ++j)
      if (r[j] > col_best[j]) {
        col_best[j] = r[j];
        best_row[j] = i;
      }
  }
  for (std::size_t i = 0; i < scores.rows; ++i) {
    const std::size_t j = best_col[i];
    if (best_row[j] == i) out.push_back({left_candidates[i], right_candidates[j]});
  }
  return out;
}

}  // namespace refl
