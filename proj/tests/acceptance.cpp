// Acceptance suite: every criterion prints one PASS/FAIL line with its
// measured numbers; the process exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "refl/checkpoint.hpp"
#include "refl/cli.hpp"
#include "refl/diagnostics.hpp"
#include "refl/eval.hpp"
#include "refl/gradcheck.hpp"
#include "refl/parallel.hpp"
#include "refl/reflect.hpp"
#include "refl/rng.hpp"
#include "refl/synth.hpp"
#include "refl/train.hpp"

using namespace refl;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

void run_criterion(int criterion, const std::function<void(int)>& body) {
  try {
    body(criterion);
  } catch (const std::exception& e) {
    report(criterion, false, std::string("exception: ") + e.what());
  }
}

std::string fmt(const char* pattern, ...) {
  char buf[512];
  va_list args;
  va_start(args, pattern);
  std::vsnprintf(buf, sizeof(buf), pattern, args);
  va_end(args);
  return buf;
}

// ---- criterion 1: reflection orthogonality & isometry --------------------

void criterion_orthogonality(int id) {
  Timer timer;
  const std::size_t d = 100;
  const std::size_t count = 1000;
  const DenseMatrix raw = he_init(count, d, 20240801);
  const DenseMatrix probes = he_init(8, d, 911);

  // unit-normalize the relation sample up front
  DenseMatrix rels(count, d);
  for (std::size_t r = 0; r < count; ++r) {
    const double nrm = l2_norm(raw.row(r));
    for (std::size_t c = 0; c < d; ++c) rels.at(r, c) = raw.at(r, c) / nrm;
  }

  const IsometryReport iso = isometry_report(rels, probes);

  double max_residual = 0.0;
  DenseMatrix m(d, d);
  for (std::size_t r = 0; r < count; ++r) {
    const auto u = rels.row(r);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        m.at(i, j) = (i == j ? 1.0 : 0.0) - 2.0 * u[i] * u[j];
    max_residual = std::max(max_residual, orthogonality_residual(m));
  }

  const double elapsed = timer.seconds();
  const bool pass = iso.max_norm_deviation < 1e-10 && iso.max_inner_product_deviation < 1e-10 &&
                    max_residual < 1e-10 && iso.differentiation_failures == 0 && elapsed < 5.0;
  report(id, pass,
         fmt("reflection isometry: norm_dev=%.2e ip_dev=%.2e residual=%.2e "
             "diff_failures=%zu (%.1fs)",
             iso.max_norm_deviation, iso.max_inner_product_deviation, max_residual,
             iso.differentiation_failures, elapsed));
}

// ---- criterion 2: gradient correctness on the tiny fixture ---------------

void criterion_gradients(int id) {
  Timer timer;
  // 5 entities and 2 original relations across the two graphs; d=4, one layer
  KnowledgeGraphPair pair;
  pair.g1.entity_count = 3;
  pair.g1.relation_count = 1;
  pair.g1.entity_uris = {"a", "b", "c"};
  pair.g1.relation_uris = {"r"};
  pair.g1.triples = {{0, 0, 1}, {2, 0, 1}};
  pair.g2.entity_count = 2;
  pair.g2.relation_count = 1;
  pair.g2.entity_uris = {"x", "y"};
  pair.g2.relation_uris = {"s"};
  pair.g2.triples = {{0, 0, 1}};
  pair.alignment = {{0, 0}, {1, 1}};

  const NeighborIndex index = build_union_index(pair);
  const AggregationPlan plan = build_plan(index);

  ModelConfig cfg;
  cfg.dim = 4;
  cfg.layers = 1;
  cfg.dropout = 0.0;  // dropout off for exactness
  cfg.rng_seed = 29;
  ParameterStore params = init_params(index, cfg);

  const std::vector<UnifiedPair> pairs = to_unified(pair.alignment, index);
  const DenseMatrix emb0 = forward_model(plan, params, cfg, false).embeddings;
  const NegativeCache negatives = sample_negatives(emb0, pairs, index.g1_entity_count, 1);

  auto loss_fn = [&] {
    const DenseMatrix emb = forward_model(plan, params, cfg, false).embeddings;
    DenseMatrix grad(emb.rows, emb.cols);
    return triplet_loss(emb, pairs, negatives, cfg.margin, grad);
  };

  const ForwardResult fwd = forward_model(plan, params, cfg, false);
  DenseMatrix grad_emb(fwd.embeddings.rows, fwd.embeddings.cols);
  triplet_loss(fwd.embeddings, pairs, negatives, cfg.margin, grad_emb);
  backward_model(plan, fwd.trace, grad_emb, params);

  std::vector<DenseMatrix> copies;
  copies.reserve(params.entries().size());
  for (const auto& p : params.entries()) copies.push_back(p.grad);
  std::vector<std::pair<std::string, const DenseMatrix*>> analytic;
  std::size_t idx = 0;
  for (const auto& p : params.entries()) analytic.emplace_back(p.name, &copies[idx++]);

  GradCheckOptions opts;
  opts.eps = 1e-5;
  // coordinates whose true derivative sits below the rounding noise of the
  // loss cannot be measured by central differences; both sides reading ~0
  // counts as agreement
  opts.zero_threshold =
      256.0 * std::numeric_limits<double>::epsilon() * std::abs(loss_fn()) / (2.0 * opts.eps);
  const GradCheckReport rep = check_gradients(loss_fn, params, analytic, opts);

  const double elapsed = timer.seconds();
  const bool pass = rep.max_rel_error < 1e-4 && elapsed < 10.0;
  report(id, pass,
         fmt("triplet-loss gradients vs finite differences: max_rel_err=%.2e over %zu "
             "coordinates (worst %s[%zu]) (%.1fs)",
             rep.max_rel_error, rep.coords_checked, rep.worst_param.c_str(), rep.worst_index,
             elapsed));
}

// ---- criterion 3: synthetic alignment recovery ----------------------------

void criterion_recovery(int id) {
  Timer timer;
  par::set_threads(1);  // the bound is single-threaded

  SynthOptions opts;
  opts.entities = 100;
  opts.relations = 10;
  opts.triples = 250;  // mean total degree 5
  opts.rng_seed = 424242;
  const KnowledgeGraphPair pair = make_aligned_pair(make_random_kg(opts), 1.0, 77);
  const NeighborIndex index = build_union_index(pair);
  const SeedSplit split = split_seeds(pair, 0.3, 5);

  // desk-scale hyper-parameters: the full-scale defaults target 15k-entity KGs
  // and underfit a 100-entity instance badly
  ModelConfig cfg;
  cfg.dim = 32;
  cfg.layers = 2;
  cfg.epochs = 300;
  cfg.margin = 12.0;
  cfg.learning_rate = 0.01;
  cfg.neg_refresh_epochs = 1;
  cfg.rng_seed = 5;
  TrainOptions opts_train;
  opts_train.mode = TrainOptions::Mode::semi;
  opts_train.expand_start = 200;
  opts_train.expand_every = 50;

  auto [params, rep] = train(pair, index, split, cfg, opts_train);
  const AggregationPlan plan = build_plan(index);
  const DenseMatrix emb = forward_model(plan, params, cfg, false).embeddings;
  const EvalOutcome outcome = evaluate_alignment(emb, split, index, true);

  // the loss trends down over the opening epochs
  double head = 0.0, tail = 0.0;
  for (int e = 0; e < 10; ++e) head += rep.epoch_loss[e];
  for (int e = 40; e < 50; ++e) tail += rep.epoch_loss[e];

  par::set_threads(0);
  const double elapsed = timer.seconds();
  const bool pass = outcome.left_to_right.hits1 >= 0.95 && tail < head && elapsed < 300.0;
  report(id, pass,
         fmt("isomorphic recovery: hits@1=%.3f on %zu held-out pairs after %zu epochs, "
             "loss %d%% down by epoch 50 (%.1fs single-threaded)",
             outcome.left_to_right.hits1, split.test.size(), cfg.epochs,
             (int)(100.0 * (1.0 - tail / head)), elapsed));
}

// ---- criterion 4: ablation directions -------------------------------------

void criterion_ablation(int id) {
  Timer timer;
  SynthOptions opts;
  opts.entities = 1000;
  opts.relations = 35;
  opts.triples = 3000;
  opts.hub_bias = 0.5;  // DBP-style skewed degrees
  opts.rng_seed = 20240515;
  const KnowledgeGraphPair pair = make_aligned_pair(make_random_kg(opts), 0.85, 99);
  const NeighborIndex index = build_union_index(pair);
  const SeedSplit split = split_seeds(pair, 0.3, 9);
  const AggregationPlan plan = build_plan(index);

  ModelConfig cfg;
  cfg.dim = 32;
  cfg.layers = 2;
  cfg.epochs = 150;
  cfg.margin = 12.0;
  cfg.learning_rate = 0.01;
  cfg.neg_refresh_epochs = 1;
  cfg.rng_seed = 2;

  auto [full_params, rep_full] = train(pair, index, split, cfg);
  const DenseMatrix full_emb = forward_model(plan, full_params, cfg, false).embeddings;
  const double full_csls = evaluate_alignment(full_emb, split, index, true).left_to_right.hits1;
  const double full_cos = evaluate_alignment(full_emb, split, index, false).left_to_right.hits1;

  ModelConfig ablated = cfg;
  ablated.use_reflection = false;
  auto [flat_params, rep_flat] = train(pair, index, split, ablated);
  const DenseMatrix flat_emb = forward_model(plan, flat_params, ablated, false).embeddings;
  const double flat_csls = evaluate_alignment(flat_emb, split, index, true).left_to_right.hits1;

  const double refl_gain = full_csls - flat_csls;
  const double csls_gain = full_csls - full_cos;
  const double elapsed = timer.seconds();
  const bool pass = refl_gain >= 0.05 && csls_gain >= 0.01;
  report(id, pass,
         fmt("ablations: hits@1 full+csls=%.3f identity+csls=%.3f full+cosine=%.3f "
             "(reflection %+.1fpt vs required +5, csls %+.1fpt vs required +1) (%.0fs)",
             full_csls, flat_csls, full_cos, 100.0 * refl_gain, 100.0 * csls_gain, elapsed));
}

// ---- criterion 5: random-embedding shape similarity ------------------------

void criterion_random_ss(int id) {
  Timer timer;
  const DenseMatrix a = he_init(15000, 100, 1001);
  const DenseMatrix b = he_init(15000, 100, 2002);
  std::vector<AlignedPair> aligned;
  aligned.reserve(15000);
  for (std::uint32_t i = 0; i < 15000; ++i) aligned.push_back({i, i});

  const SSReport cosine = shape_similarity(a, b, aligned, DistanceMetric::cosine, 100, 7);
  const SSReport l2 = shape_similarity(a, b, aligned, DistanceMetric::l2, 100, 7);

  const double elapsed = timer.seconds();
  const bool pass = cosine.ss > 0.95 && cosine.ss < 1.05 && l2.ss > 0.95 && l2.ss < 1.05 &&
                    elapsed < 5.0;
  report(id, pass,
         fmt("random-embedding shape similarity: cosine=%.4f l2=%.4f (d=100, 15000 entities, "
             "m=100) (%.1fs)",
             cosine.ss, l2.ss, elapsed));
}

// ---- criterion 6: metric oracles -------------------------------------------

void criterion_metric_oracles(int id) {
  bool pass = true;
  std::string note;

  {
    const std::size_t ranks[3] = {1, 2, 4};
    const RankingReport rep = compute_metrics(ranks);
    pass &= rep.hits1 == 1.0 / 3.0;
    pass &= rep.hits5 == 1.0;
    pass &= std::abs(rep.mrr - (1.0 + 0.5 + 0.25) / 3.0) < 1e-15;
    const std::size_t all_first[4] = {1, 1, 1, 1};
    pass &= compute_metrics(all_first).mrr == 1.0;
    const std::size_t out[2] = {11, 12};
    pass &= compute_metrics(out).hits10 == 0.0;
  }

  double worst = 0.0;
  Rng rng(88);
  for (int trial = 0; trial < 10; ++trial) {
    ScoreMatrix s(5, 5);
    for (double& v : s.values) v = rng.normal();
    const std::size_t k = 1 + (std::size_t)rng.below(4);
    const ScoreMatrix adj = csls_adjust(s, k);
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t j = 0; j < 5; ++j) {
        std::vector<double> row(s.row(i).begin(), s.row(i).end());
        std::sort(row.begin(), row.end(), std::greater<>());
        std::vector<double> col;
        for (std::size_t r = 0; r < 5; ++r) col.push_back(s.at(r, j));
        std::sort(col.begin(), col.end(), std::greater<>());
        double rm = 0.0, cm = 0.0;
        for (std::size_t q = 0; q < k; ++q) {
          rm += row[q];
          cm += col[q];
        }
        const double expected = 2.0 * s.at(i, j) - rm / (double)k - cm / (double)k;
        worst = std::max(worst, std::abs(adj.at(i, j) - expected));
      }
    }
  }
  pass &= worst < 1e-12;
  report(id, pass,
         fmt("metric oracles: hits/mrr closed forms exact, csls vs brute force max_diff=%.2e",
             worst));
}

// ---- criterion 7: full-scale mode documented, not gated --------------------

void criterion_full_scale_documented(int id) {
  const fs::path readme = fs::path(REFL_SOURCE_DIR) / "README.md";
  std::ifstream in(readme);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  const bool documented = text.find("Full-scale") != std::string::npos &&
                          text.find("--epochs 3000") != std::string::npos &&
                          text.find("0.715") != std::string::npos;

  // the full configuration must be expressible and valid today
  RunConfig full;
  full.model.dim = 100;
  full.model.layers = 2;
  full.model.epochs = 3000;
  full.model.margin = 3.0;
  full.model.dropout = 0.3;
  full.model.learning_rate = 0.005;
  bool valid = true;
  try {
    full.validate();
  } catch (const std::exception&) {
    valid = false;
  }

  report(id, documented && valid,
         fmt("full-scale run documented (README long-running mode: %s), full config valid: %s; "
             "full-scale numbers are not desk-reproducible and stay out of CI",
             documented ? "yes" : "no", valid ? "yes" : "no"));
}

// ---- criterion 8: byte-identical metrics across reruns ---------------------

void criterion_determinism(int id) {
  const fs::path dir = fs::temp_directory_path() / "refl_acceptance_det";
  fs::remove_all(dir);
  fs::create_directories(dir);

  SynthOptions opts;
  opts.entities = 60;
  opts.relations = 6;
  opts.triples = 180;
  opts.rng_seed = 31337;
  const KnowledgeGraphPair pair = make_aligned_pair(make_random_kg(opts), 1.0, 13);
  const fs::path data = dir / "data";
  save_kg_pair(pair, data);

  auto run_once = [&](const fs::path& out) {
    const std::vector<std::string> args = {
        "train",   "--data",   data.string(), "--out",   out.string(), "--dim", "8",
        "--layers", "2",       "--epochs",    "20",      "--neg-k",    "5",
        "--seed",  "2",        "--train-ratio", "0.3"};
    return cli::run(args);
  };

  bool pass = run_once(dir / "a") == 0 && run_once(dir / "b") == 0;
  std::string lines;
  if (pass) {
    std::ifstream fa(dir / "a" / "metrics.txt"), fb(dir / "b" / "metrics.txt");
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    pass = !sa.str().empty() && sa.str() == sb.str();
    lines = sa.str().substr(0, sa.str().find('\n'));
  }
  report(id, pass, fmt("determinism: identical seeds emit byte-identical metrics [%s]",
                       lines.c_str()));
}

}  // namespace

int main() {
  run_criterion(1, criterion_orthogonality);
  run_criterion(2, criterion_gradients);
  run_criterion(3, criterion_recovery);
  run_criterion(4, criterion_ablation);
  run_criterion(5, criterion_random_ss);
  run_criterion(6, criterion_metric_oracles);
  run_criterion(7, criterion_full_scale_documented);
  run_criterion(8, criterion_determinism);

  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all acceptance criteria passed\n");
  return 0;
}
