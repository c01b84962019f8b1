#include "refl/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "refl/checkpoint.hpp"
#include "refl/diagnostics.hpp"
#include "refl/eval.hpp"
#include "refl/rng.hpp"
#include "refl/train.hpp"

namespace refl::cli {

namespace {

struct Flags {
  std::string config_file;
  std::string data, out, checkpoint, mode, metric;
  std::uint64_t dim = 0, layers = 0, epochs = 0, neg_k = 0, neg_refresh = 0, seed = 0;
  std::uint64_t ss_m = 0, apart_epochs = 0;
  double margin = 0, dropout = 0, lr = 0, train_ratio = 0;

  CLI::Option *o_data = nullptr, *o_out = nullptr, *o_checkpoint = nullptr, *o_mode = nullptr,
              *o_metric = nullptr, *o_dim = nullptr, *o_layers = nullptr, *o_epochs = nullptr,
              *o_neg_k = nullptr, *o_neg_refresh = nullptr, *o_seed = nullptr,
              *o_margin = nullptr, *o_dropout = nullptr, *o_lr = nullptr,
              *o_train_ratio = nullptr, *o_ss_m = nullptr, *o_apart = nullptr;
};

void add_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config_file, "config file with 'key = value' lines");
  f.o_data = sub->add_option("--data", f.data, "data directory (DBP15K layout)");
  f.o_out = sub->add_option("--out", f.out, "output directory (file path for export)");
  f.o_checkpoint = sub->add_option("--checkpoint", f.checkpoint, "checkpoint file");
  f.o_dim = sub->add_option("--dim", f.dim, "embedding dimension");
  f.o_layers = sub->add_option("--layers", f.layers, "aggregation layers");
  f.o_margin = sub->add_option("--margin", f.margin, "triplet loss margin");
  f.o_dropout = sub->add_option("--dropout", f.dropout, "dropout rate");
  f.o_lr = sub->add_option("--lr", f.lr, "learning rate");
  f.o_epochs = sub->add_option("--epochs", f.epochs, "training epochs");
  f.o_neg_k = sub->add_option("--neg-k", f.neg_k, "negatives per pair side");
  f.o_neg_refresh = sub->add_option("--neg-refresh", f.neg_refresh, "epochs between refreshes");
  f.o_mode = sub->add_option("--mode", f.mode, "basic | semi");
  f.o_metric = sub->add_option("--metric", f.metric, "csls | cosine");
  f.o_seed = sub->add_option("--seed", f.seed, "master rng seed");
  f.o_train_ratio = sub->add_option("--train-ratio", f.train_ratio, "seed pair train fraction");
  f.o_ss_m = sub->add_option("--ss-m", f.ss_m, "shape-similarity sample size");
  f.o_apart = sub->add_option("--apart-epochs", f.apart_epochs,
                              "diagnose: train with the apart loss for this many epochs");
}

// defaults -> config file -> flags, flags winning
RunConfig resolve_config(const Flags& f) {
  RunConfig cfg;
  if (!f.config_file.empty()) {
    std::ifstream in(f.config_file, std::ios::binary);
    if (!in.is_open()) throw std::runtime_error("missing config file: " + f.config_file);
    std::stringstream buf;
    buf << in.rdbuf();
    cfg = RunConfig::from_text(buf.str());
  }
  if (f.o_data->count()) cfg.data_dir = f.data;
  if (f.o_out->count()) cfg.out_dir = f.out;
  if (f.o_checkpoint->count()) cfg.checkpoint_path = f.checkpoint;
  if (f.o_dim->count()) cfg.model.dim = f.dim;
  if (f.o_layers->count()) cfg.model.layers = f.layers;
  if (f.o_margin->count()) cfg.model.margin = f.margin;
  if (f.o_dropout->count()) cfg.model.dropout = f.dropout;
  if (f.o_lr->count()) cfg.model.learning_rate = f.lr;
  if (f.o_epochs->count()) cfg.model.epochs = f.epochs;
  if (f.o_neg_k->count()) cfg.model.neg_k = f.neg_k;
  if (f.o_neg_refresh->count()) cfg.model.neg_refresh_epochs = f.neg_refresh;
  if (f.o_mode->count()) cfg.mode = f.mode;
  if (f.o_metric->count()) cfg.metric = f.metric;
  if (f.o_seed->count()) cfg.model.rng_seed = f.seed;
  if (f.o_train_ratio->count()) cfg.train_ratio = f.train_ratio;
  if (f.o_ss_m->count()) cfg.ss_m = f.ss_m;
  if (f.o_apart->count()) cfg.apart_epochs = f.apart_epochs;
  cfg.validate();
  return cfg;
}

std::string metrics_line(const RankingReport& rep, const char* direction, const char* metric) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "hits1=%.6f hits5=%.6f hits10=%.6f mrr=%.6f direction=%s metric=%s",
                rep.hits1, rep.hits5, rep.hits10, rep.mrr, direction, metric);
  return buf;
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

int cmd_ingest(const RunConfig& cfg) {
  require(!cfg.data_dir.empty(), "data: path required");
  const KnowledgeGraphPair pair = load_kg_pair(cfg.data_dir);
  validate(pair);
  const NeighborIndex index = build_union_index(pair);
  std::printf(
      "ingest entities1=%zu relations1=%zu triples1=%zu entities2=%zu relations2=%zu "
      "triples2=%zu alignment=%zu unified_entities=%zu unified_relations=%zu edges=%zu\n",
      pair.g1.entity_count, pair.g1.relation_count, pair.g1.triples.size(),
      pair.g2.entity_count, pair.g2.relation_count, pair.g2.triples.size(),
      pair.alignment.size(), index.unified_entity_count, index.unified_relation_count,
      index.edge_count());
  return 0;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.is_open()) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

int cmd_train(RunConfig cfg) {
  require(!cfg.data_dir.empty(), "data: path required");
  if (cfg.checkpoint_path.empty()) {
    require(!cfg.out_dir.empty(), "checkpoint: set --checkpoint or --out");
    cfg.checkpoint_path = (std::filesystem::path(cfg.out_dir) / "checkpoint.bin").string();
  }
  if (!cfg.out_dir.empty()) std::filesystem::create_directories(cfg.out_dir);
  if (const auto parent = std::filesystem::path(cfg.checkpoint_path).parent_path();
      !parent.empty())
    std::filesystem::create_directories(parent);
  const KnowledgeGraphPair pair = load_kg_pair(cfg.data_dir);
  validate(pair);
  const NeighborIndex index = build_union_index(pair);

  SeedSplit split;
  TrainState state;
  if (std::filesystem::exists(cfg.checkpoint_path)) {
    Checkpoint ck = load_checkpoint(cfg.checkpoint_path);
    // the snapshot wins for everything that shapes the parameters; the
    // epoch target may be extended from the command line
    const std::size_t target = cfg.model.epochs;
    const std::string mode = cfg.mode, metric = cfg.metric, out_dir = cfg.out_dir;
    const std::string ck_path = cfg.checkpoint_path;
    cfg = ck.config;
    cfg.model.epochs = std::max(target, ck.epoch);
    cfg.mode = mode;
    cfg.metric = metric;
    cfg.out_dir = out_dir;
    cfg.checkpoint_path = ck_path;
    split = std::move(ck.split);
    state.params = std::move(ck.params);
    state.negatives = std::move(ck.negatives);
    state.pseudo_pairs = std::move(ck.pseudo_pairs);
    state.next_epoch = ck.epoch;
    std::fprintf(stderr, "resuming from %s at epoch %zu\n", cfg.checkpoint_path.c_str(),
                 state.next_epoch);
  } else {
    split = split_seeds(pair, cfg.train_ratio, cfg.model.rng_seed);
    state = init_train_state(index, cfg.model);
  }

  TrainOptions opts;
  opts.mode = cfg.mode == "semi" ? TrainOptions::Mode::semi : TrainOptions::Mode::basic;
  TrainReport report;
  try {
    report = train_epochs(pair, index, split, cfg.model, opts, state);
  } catch (const TrainDivergedError& e) {
    // dump whatever state we have for post-mortem before propagating
    Checkpoint dump;
    dump.config = cfg;
    dump.epoch = e.epoch;
    dump.split = split;
    dump.pseudo_pairs = state.pseudo_pairs;
    dump.params = std::move(state.params);
    dump.negatives = state.negatives;
    save_checkpoint(dump, cfg.checkpoint_path + ".diverged");
    throw;
  }

  Checkpoint ck;
  ck.config = cfg;
  ck.epoch = state.next_epoch;
  ck.split = split;
  ck.pseudo_pairs = state.pseudo_pairs;
  ck.negatives = state.negatives;
  ck.params = std::move(state.params);
  save_checkpoint(ck, cfg.checkpoint_path);

  const AggregationPlan plan = build_plan(index);
  const DenseMatrix emb = forward_model(plan, ck.params, cfg.model, false).embeddings;
  const EvalOutcome outcome = evaluate_alignment(emb, split, index, cfg.metric == "csls");
  const std::string l2r = metrics_line(outcome.left_to_right, "l2r", cfg.metric.c_str());
  const std::string r2l = metrics_line(outcome.right_to_left, "r2l", cfg.metric.c_str());
  std::printf("%s\n", l2r.c_str());

  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    write_text(std::filesystem::path(cfg.out_dir) / "metrics.txt", l2r + "\n" + r2l + "\n");
    std::ostringstream loss;
    loss << "epoch\tloss\tseconds\n";
    char buf[96];
    for (std::size_t i = 0; i < report.epoch_loss.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%zu\t%.17g\t%.3f\n",
                    report.final_epoch - report.epoch_loss.size() + i, report.epoch_loss[i],
                    report.epoch_seconds[i]);
      loss << buf;
    }
    write_text(std::filesystem::path(cfg.out_dir) / "train_loss.tsv", loss.str());
    write_text(std::filesystem::path(cfg.out_dir) / "config.txt", cfg.to_text());
  }
  return 0;
}

int cmd_eval(const RunConfig& cli_cfg) {
  require(!cli_cfg.checkpoint_path.empty(), "checkpoint: path required");
  Checkpoint ck = load_checkpoint(cli_cfg.checkpoint_path);
  RunConfig cfg = ck.config;
  if (!cli_cfg.data_dir.empty()) cfg.data_dir = cli_cfg.data_dir;
  cfg.metric = cli_cfg.metric;
  require(!cfg.data_dir.empty(), "data: path required (checkpoint has no data dir)");

  const KnowledgeGraphPair pair = load_kg_pair(cfg.data_dir);
  const NeighborIndex index = build_union_index(pair);
  const AggregationPlan plan = build_plan(index);
  const DenseMatrix emb = forward_model(plan, ck.params, cfg.model, false).embeddings;
  const EvalOutcome outcome = evaluate_alignment(emb, ck.split, index, cfg.metric == "csls");
  std::printf("%s\n", metrics_line(outcome.left_to_right, "l2r", cfg.metric.c_str()).c_str());
  std::printf("%s\n", metrics_line(outcome.right_to_left, "r2l", cfg.metric.c_str()).c_str());
  std::printf("\n%-10s %8s %8s %8s %8s %8s\n", "direction", "hits@1", "hits@5", "hits@10",
              "mrr", "pairs");
  for (const auto& [tag, rep] :
       {std::pair<const char*, const RankingReport*>{"kg1->kg2", &outcome.left_to_right},
        {"kg2->kg1", &outcome.right_to_left}})
    std::printf("%-10s %8.4f %8.4f %8.4f %8.4f %8zu\n", tag, rep->hits1, rep->hits5,
                rep->hits10, rep->mrr, rep->ranks.size());
  return 0;
}

const char* metric_name(DistanceMetric m) {
  return m == DistanceMetric::cosine ? "cosine" : "l2";
}

int cmd_diagnose(const RunConfig& cli_cfg) {
  RunConfig cfg = cli_cfg;
  ParameterStore params;
  KnowledgeGraphPair pair;
  NeighborIndex index;
  if (!cli_cfg.checkpoint_path.empty()) {
    Checkpoint ck = load_checkpoint(cli_cfg.checkpoint_path);
    cfg = ck.config;
    if (!cli_cfg.data_dir.empty()) cfg.data_dir = cli_cfg.data_dir;
    cfg.ss_m = cli_cfg.ss_m;
    require(!cfg.data_dir.empty(), "data: path required");
    pair = load_kg_pair(cfg.data_dir);
    index = build_union_index(pair);
    params = std::move(ck.params);
  } else {
    require(!cfg.data_dir.empty(), "data: path required");
    pair = load_kg_pair(cfg.data_dir);
    index = build_union_index(pair);
    if (cfg.apart_epochs > 0) {
      ModelConfig apart_cfg = cfg.model;
      apart_cfg.epochs = cfg.apart_epochs;
      params = apart_loss_train(pair, index, apart_cfg, cfg.model.margin);
    } else {
      params = init_params(index, cfg.model);
    }
  }

  const AggregationPlan plan = build_plan(index);
  const DenseMatrix emb = forward_model(plan, params, cfg.model, false).embeddings;
  DenseMatrix emb1(pair.g1.entity_count, emb.cols);
  DenseMatrix emb2(pair.g2.entity_count, emb.cols);
  for (std::size_t i = 0; i < pair.g1.entity_count; ++i) {
    const auto src = emb.row(i);
    std::copy(src.begin(), src.end(), emb1.row(i).begin());
  }
  for (std::size_t i = 0; i < pair.g2.entity_count; ++i) {
    const auto src = emb.row(index.g1_entity_count + i);
    std::copy(src.begin(), src.end(), emb2.row(i).begin());
  }

  const std::size_t m = std::min<std::size_t>(cfg.ss_m, pair.alignment.size());
  require(m >= 2, "ss-m: need at least 2 aligned pairs");
  for (DistanceMetric metric : {DistanceMetric::cosine, DistanceMetric::l2}) {
    const SSReport ss =
        shape_similarity(emb1, emb2, pair.alignment, metric, m, cfg.model.rng_seed);
    std::printf("ss metric=%s numerator=%.9g denominator=%.9g ss=%.6f m=%zu seed=%llu\n",
                metric_name(metric), ss.numerator, ss.denominator, ss.ss, ss.sample_size,
                (unsigned long long)ss.rng_seed);
  }

  const DenseMatrix& rel = params.get(kRelationTable).value;
  const std::size_t rel_sample = std::min<std::size_t>(rel.rows, 64);
  DenseMatrix rels(rel_sample, rel.cols);
  for (std::size_t r = 0; r < rel_sample; ++r) {
    const auto src = rel.row(r);
    std::copy(src.begin(), src.end(), rels.row(r).begin());
  }
  const DenseMatrix probes = he_init(8, rel.cols, mix_key(cfg.model.rng_seed, {0x9206}));
  const IsometryReport iso = isometry_report(rels, probes);
  std::printf(
      "isometry max_norm_dev=%.3e max_ip_dev=%.3e norm_checks=%zu ip_checks=%zu "
      "differentiation_pairs=%zu differentiation_failures=%zu\n",
      iso.max_norm_deviation, iso.max_inner_product_deviation, iso.norm_checks,
      iso.inner_product_checks, iso.differentiation_pairs, iso.differentiation_failures);

  double max_residual = 0.0;
  const std::size_t mat_sample = std::min<std::size_t>(rel.rows, 32);
  for (std::size_t r = 0; r < mat_sample; ++r) {
    const double nrm = l2_norm(rel.row(r));
    DenseMatrix m_r(rel.cols, rel.cols);
    for (std::size_t i = 0; i < rel.cols; ++i) {
      const double ui = rel.at(r, i) / nrm;
      for (std::size_t j = 0; j < rel.cols; ++j)
        m_r.at(i, j) = (i == j ? 1.0 : 0.0) - 2.0 * ui * (rel.at(r, j) / nrm);
    }
    max_residual = std::max(max_residual, orthogonality_residual(m_r));
  }
  std::printf("orthogonality max_residual=%.3e matrices=%zu\n", max_residual, mat_sample);
  return 0;
}

int cmd_export(const RunConfig& cli_cfg) {
  require(!cli_cfg.checkpoint_path.empty(), "checkpoint: path required");
  require(!cli_cfg.out_dir.empty(), "out: target file required");
  Checkpoint ck = load_checkpoint(cli_cfg.checkpoint_path);
  RunConfig cfg = ck.config;
  if (!cli_cfg.data_dir.empty()) cfg.data_dir = cli_cfg.data_dir;
  require(!cfg.data_dir.empty(), "data: path required (checkpoint has no data dir)");
  const KnowledgeGraphPair pair = load_kg_pair(cfg.data_dir);
  const NeighborIndex index = build_union_index(pair);
  export_embeddings(pair, index, cfg.model, ck.params, cli_cfg.out_dir);
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"entity alignment via relational reflection aggregation"};
  app.require_subcommand(1);

  Flags f_ingest, f_train, f_eval, f_diag, f_export;
  CLI::App* ingest = app.add_subcommand("ingest", "load and validate a data directory");
  CLI::App* train = app.add_subcommand("train", "train and write a checkpoint");
  CLI::App* eval = app.add_subcommand("eval", "rank test pairs from a checkpoint");
  CLI::App* diagnose = app.add_subcommand("diagnose", "shape similarity and isometry reports");
  CLI::App* exp = app.add_subcommand("export", "write embeddings as TSV");
  add_flags(ingest, f_ingest);
  add_flags(train, f_train);
  add_flags(eval, f_eval);
  add_flags(diagnose, f_diag);
  add_flags(exp, f_export);

  std::vector<const char*> argv;
  argv.push_back("refl-align");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse((int)argv.size(), argv.data());
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::fprintf(stderr, "error: %s\n", msg.c_str());
    return 2;
  }

  try {
    if (ingest->parsed()) return cmd_ingest(resolve_config(f_ingest));
    if (train->parsed()) return cmd_train(resolve_config(f_train));
    if (eval->parsed()) return cmd_eval(resolve_config(f_eval));
    if (diagnose->parsed()) return cmd_diagnose(resolve_config(f_diag));
    if (exp->parsed()) return cmd_export(resolve_config(f_export));
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}

}  // namespace refl::cli
