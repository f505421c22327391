// slr: command-line front end for the label-reuse pipeline.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "slr/ablation.hpp"
#include "slr/config.hpp"
#include "slr/corpus.hpp"
#include "slr/error.hpp"
#include "slr/eval.hpp"
#include "slr/features.hpp"
#include "slr/log.hpp"
#include "slr/oracle.hpp"
#include "slr/pairing.hpp"
#include "slr/parallel.hpp"
#include "slr/report.hpp"
#include "slr/synth.hpp"
#include "slr/trainer.hpp"

namespace fs = std::filesystem;
using namespace slr;

namespace {

struct Options {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  bool no_pca = false;
  std::optional<std::string> tau_min;
  bool no_eta = false;
  bool no_lambda = false;
  bool no_pairs = false;
  bool random = false;
  std::optional<int> count;
  std::optional<int> seeds;
  bool dry_run = false;
  bool verbose = false;

  std::string manifest;
  std::string features;
  std::string external;
  std::string pairs;
  std::string oracle;
  std::string checkpoint;
  std::string split = "test";
  bool resume = false;
};

RunConfig make_config(const Options& o) {
  RunConfig c = o.config_path.empty() ? RunConfig() : RunConfig::from_file(o.config_path);
  if (o.seed) c.set("seed", std::to_string(*o.seed));
  if (o.no_pca) c.set("pca", "false");
  if (o.tau_min) c.set("tau_min", *o.tau_min);
  if (o.no_eta) c.set("eta", "false");
  if (o.no_lambda) c.set("lambda", "false");
  if (o.no_pairs) c.set("pairs", "false");
  if (o.count) c.set("random.count", std::to_string(*o.count));
  if (o.seeds) c.set("ablate.seeds", std::to_string(*o.seeds));
  return c;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw_usage(std::string("missing required option ") + flag);
}

fs::path out_dir(const Options& o) {
  require(o.out, "--out");
  return fs::path(o.out);
}

void prepare_out(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw_runtime("cannot create " + dir.string() + ": " + ec.message());
}

void write_config(const RunConfig& c, const fs::path& dir) {
  std::ofstream out(dir / "config.txt", std::ios::binary | std::ios::trunc);
  if (!out) throw_runtime("cannot write " + (dir / "config.txt").string());
  out << "# config_hash " << c.hash() << "\n" << c.canonical();
}

void plan(const std::string& text) { std::cout << "plan: " << text << "\n"; }

Corpus load_corpus(const Options& o) {
  require(o.manifest, "--manifest");
  return load_manifest(o.manifest);
}

int run_synth(const Options& o) {
  const RunConfig c = make_config(o);
  const SynthConfig sc = c.synth();
  const fs::path dir = out_dir(o);
  if (o.dry_run) {
    plan("generate " + std::to_string(sc.subjects) + " subjects x " + std::to_string(sc.days) + " days x " +
         std::to_string(sc.images_per_day) + " images into " + dir.string());
    return 0;
  }
  const SynthOutput s = generate(sc, dir);
  write_config(c, dir);
  const auto counts = split_counts(s.corpus);
  std::cout << "wrote " << s.corpus.size() << " images to " << dir.string() << " (train "
            << counts.at(Split::train) << ", unlabeled " << counts.at(Split::unlabeled) << ", val "
            << counts.at(Split::val) << ", test " << counts.at(Split::test) << ")\n";
  return 0;
}

int run_ingest(const Options& o) {
  const Corpus corpus = load_corpus(o);
  const auto counts = split_counts(corpus);
  std::cout << "valid corpus: " << corpus.size() << " records, " << corpus.subjects().size() << " subjects, "
            << corpus.num_classes() << " classes\n";
  for (const auto& [split, n] : counts) std::cout << "  " << to_string(split) << " " << n << "\n";
  if (o.out.empty() || o.dry_run) {
    if (!o.out.empty()) plan("write normalized manifest to " + o.out);
    return 0;
  }
  const fs::path dir = out_dir(o);
  prepare_out(dir);
  // Rewrite paths so the copy resolves from its new directory.
  std::vector<ImageRecord> records = corpus.records();
  const fs::path base = fs::absolute(dir);
  for (auto& r : records) {
    r.image_path = fs::relative(fs::absolute(corpus.resolve(r.image_path)), base).generic_string();
    if (r.mask_path) r.mask_path = fs::relative(fs::absolute(corpus.resolve(*r.mask_path)), base).generic_string();
  }
  save_manifest(Corpus(std::move(records), corpus.class_names(), dir), dir / "manifest.tsv");
  std::cout << "wrote " << (dir / "manifest.tsv").string() << "\n";
  return 0;
}

int run_features(const Options& o) {
  const RunConfig c = make_config(o);
  const Corpus corpus = load_corpus(o);
  const fs::path dir = out_dir(o);
  const int threads = resolve_threads(o.threads);
  if (o.dry_run) {
    plan(o.external.empty() ? "compute descriptors for " + std::to_string(corpus.size()) + " images"
                            : "check and copy external features from " + o.external);
    plan("write " + (dir / "features.slrf").string());
    return 0;
  }
  FeatureStore store;
  if (o.external.empty()) {
    store = compute_descriptors(corpus, threads);
  } else {
    store = load_features(o.external);
    check_known_ids(store, corpus);
  }
  prepare_out(dir);
  save_features(store, dir / "features.slrf");
  write_config(c, dir);
  std::cout << "wrote " << store.size() << " feature vectors to " << (dir / "features.slrf").string() << "\n";
  return 0;
}

int run_pair(const Options& o) {
  const RunConfig c = make_config(o);
  const Corpus corpus = load_corpus(o);
  require(o.features, "--features");
  const FeatureStore store = load_features(o.features);
  const fs::path dir = out_dir(o);
  const PairingConfig pc = c.pairing();
  if (o.dry_run) {
    plan(std::string(o.random ? "draw random pairs" : "build informed pairs") + " (pca " +
         (pc.use_pca ? "on" : "off") + ", tau_min " + c.get("tau_min") + ")");
    plan("write " + (dir / "pairs.tsv").string());
    return 0;
  }
  PairSet pairs;
  if (o.random) {
    const int count = c.get_int("random.count") > 0 ? c.get_int("random.count") : 1;
    pairs = random_pairs(corpus, count, c.get_u64("seed"), &store);
  } else {
    pairs = build_pairs(corpus, store, pc);
  }
  prepare_out(dir);
  save_pairs(pairs, dir / "pairs.tsv", c.hash(), pc.tau_min);
  write_config(c, dir);
  std::cout << "wrote " << pairs.size() << " pairs to " << (dir / "pairs.tsv").string() << "\n";
  return 0;
}

int run_pair_eval(const Options& o) {
  const RunConfig c = make_config(o);
  require(o.pairs, "--pairs");
  require(o.oracle, "--oracle");
  const PairSet pairs = load_pairs(o.pairs);
  const Oracle oracle = load_oracle(o.oracle);
  std::vector<std::string> labeled;
  if (!o.manifest.empty()) {
    const Corpus corpus = load_manifest(o.manifest);
    for (const auto& r : corpus.records()) {
      if (r.has_mask()) labeled.push_back(r.id);
    }
  } else {
    for (const auto& [id, e] : oracle.entries()) {
      if (e.record.split != Split::unlabeled) labeled.push_back(id);
    }
  }
  if (o.dry_run) {
    plan("score " + std::to_string(pairs.size()) + " pairs against " + std::to_string(oracle.size()) +
         " oracle entries");
    return 0;
  }
  ReportInput report;
  report.config_hash = c.hash();
  report.pair_quality = evaluate_pairs(pairs, oracle, labeled);
  std::vector<LabelMask> masks;
  for (const auto& id : labeled) masks.push_back(oracle_lookup(oracle, id).mask);
  if (masks.size() >= 2) report.histogram = pair_iou_histogram(masks, 10);
  std::cout << pair_quality_text(*report.pair_quality);
  if (!o.out.empty()) emit_report(report, out_dir(o));
  return 0;
}

int run_train(const Options& o) {
  const RunConfig c = make_config(o);
  const Corpus corpus = load_corpus(o);
  TrainConfig tc = c.train();
  tc.threads = resolve_threads(o.threads);
  PairSet pairs;
  if (tc.use_pairs && !o.pairs.empty()) pairs = load_pairs(o.pairs);
  const fs::path dir = out_dir(o);
  std::optional<ResumeState> resume;
  if (o.resume) {
    resume = ResumeState{load_checkpoint(dir / "last.slrc"), load_checkpoint(dir / "best.slrc")};
  }
  if (o.dry_run) {
    std::size_t labeled = 0;
    for (const auto& r : corpus.records()) labeled += r.is_labeled_train() ? 1 : 0;
    const int ipe = iterations_per_epoch(labeled, tc.batch);
    plan("train " + std::to_string(tc.epochs) + " epochs x " + std::to_string(ipe) + " iterations on " +
         std::to_string(labeled) + " labeled images and " + std::to_string(tc.use_pairs ? pairs.size() : 0) +
         " pairs");
    plan("write checkpoints and metrics to " + dir.string());
    return 0;
  }
  prepare_out(dir);
  tc.on_epoch = [&](const Checkpoint& last, const Checkpoint& best) {
    save_checkpoint(last, dir / "last.slrc");
    save_checkpoint(best, dir / "best.slrc");
  };
  const TrainResult result = train(corpus, pairs, tc, resume);
  save_checkpoint(result.last, dir / "last.slrc");
  save_checkpoint(result.best, dir / "best.slrc");
  write_metrics(result.log, dir / "metrics_iter.csv", dir / "metrics_epoch.csv");
  write_config(c, dir);
  std::printf("best epoch %d, val mIoU %.6f\n", result.best.best_epoch, result.best.best_val_miou);
  return 0;
}

int run_eval(const Options& o) {
  const RunConfig c = make_config(o);
  const Corpus corpus = load_corpus(o);
  require(o.checkpoint, "--checkpoint");
  const Checkpoint cp = load_checkpoint(o.checkpoint);
  const Split split = parse_split(o.split);
  if (o.dry_run) {
    plan("evaluate " + o.checkpoint + " on split " + o.split);
    return 0;
  }
  const ToyNet net = net_from_checkpoint(cp);
  const ConfusionMatrix cm = evaluate_split(net, corpus, split, c.get_int("train.resolution"),
                                            resolve_threads(o.threads));
  if (cm.total() == 0) throw_validation("split '" + o.split + "' has no masked images to evaluate");
  const SegmentationMetrics m = metrics(cm);
  const std::string table = per_class_csv(corpus.class_names(), m.per_class_iou);
  std::printf("miou %.6f\nmacc %.6f\n", m.mean_iou, m.pixel_acc);
  std::cout << table;
  if (!o.out.empty()) {
    const fs::path dir = out_dir(o);
    prepare_out(dir);
    ReportInput report;
    report.config_hash = c.hash();
    report.class_names = corpus.class_names();
    report.per_class_iou = m.per_class_iou;
    emit_report(report, dir);
    std::ofstream out(dir / "metrics.csv", std::ios::binary | std::ios::trunc);
    char line[96];
    std::snprintf(line, sizeof line, "split,miou,macc\n%s,%.6f,%.6f\n", o.split.c_str(), m.mean_iou, m.pixel_acc);
    out << line;
  }
  return 0;
}

int run_ablate(const Options& o) {
  const RunConfig c = make_config(o);
  const Corpus corpus = load_corpus(o);
  const fs::path dir = out_dir(o);
  const int threads = resolve_threads(o.threads);
  const int n = c.get_int("ablate.seeds");
  if (n < 1) throw_validation("ablate.seeds must be >= 1");
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < n; ++i) seeds.push_back(c.get_u64("seed") + static_cast<std::uint64_t>(i));
  if (o.dry_run) {
    plan("train " + std::to_string(ablation_rows().size()) + " rows x " + std::to_string(n) + " seeds");
    plan("write report to " + dir.string());
    return 0;
  }
  const FeatureStore store = o.features.empty() ? compute_descriptors(corpus, threads) : load_features(o.features);
  std::optional<Oracle> oracle;
  if (!o.oracle.empty()) oracle = load_oracle(o.oracle);
  const ReportInput report = run_ablation(corpus, store, c, seeds, threads, oracle ? &*oracle : nullptr);
  emit_report(report, dir);
  write_config(c, dir);
  std::ifstream grid(dir / "grid.csv");
  std::cout << grid.rdbuf();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Similarity-based label reuse for semi-supervised segmentation"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "Run configuration file (key = value)");
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--seed", o.seed, "Random seed");
    sub->add_option("--threads", o.threads, "Worker threads (default: SLR_THREADS or core count)");
    sub->add_flag("--dry-run", o.dry_run, "Validate inputs and print the plan without writing");
    sub->add_flag("-v,--verbose", o.verbose, "Log progress to stderr");
  };
  auto pairing_flags = [&](CLI::App* sub) {
    sub->add_flag("--no-pca", o.no_pca, "Compare raw feature vectors");
    sub->add_option("--tau-min", o.tau_min, "Absolute similarity floor");
  };
  auto train_flags = [&](CLI::App* sub) {
    sub->add_flag("--no-eta", o.no_eta, "Treat eta as 1");
    sub->add_flag("--no-lambda", o.no_lambda, "Treat lambda as 1");
    sub->add_flag("--no-pairs", o.no_pairs, "Disable the pair stream");
  };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic evolving corpus with oracle");
  common(synth);

  auto* ingest = app.add_subcommand("ingest", "Validate a manifest and optionally copy it");
  common(ingest);
  ingest->add_option("--manifest", o.manifest, "Manifest file")->required();

  auto* features = app.add_subcommand("features", "Compute or import feature vectors");
  common(features);
  features->add_option("--manifest", o.manifest, "Manifest file")->required();
  features->add_option("--external", o.external, "Precomputed SLRF1 feature file to pass through");

  auto* pair = app.add_subcommand("pair", "Build label-reuse pairs");
  common(pair);
  pairing_flags(pair);
  pair->add_option("--manifest", o.manifest, "Manifest file")->required();
  pair->add_option("--features", o.features, "Feature file")->required();
  pair->add_flag("--random", o.random, "Draw random pairs instead");
  pair->add_option("--count", o.count, "Random pairs per labeled image");

  auto* pair_eval = app.add_subcommand("pair-eval", "Score pairs against the oracle");
  common(pair_eval);
  pair_eval->add_option("--pairs", o.pairs, "Pairs file")->required();
  pair_eval->add_option("--oracle", o.oracle, "Oracle file")->required();
  pair_eval->add_option("--manifest", o.manifest, "Manifest defining the labeled set for the baseline");

  auto* train_cmd = app.add_subcommand("train", "Train the segmentation model");
  common(train_cmd);
  train_flags(train_cmd);
  train_cmd->add_option("--manifest", o.manifest, "Manifest file")->required();
  train_cmd->add_option("--pairs", o.pairs, "Pairs file");
  train_cmd->add_flag("--resume", o.resume, "Continue from the checkpoints in --out");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
  common(eval);
  eval->add_option("--manifest", o.manifest, "Manifest file")->required();
  eval->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required();
  eval->add_option("--split", o.split, "Split to evaluate (train, val, test)");

  auto* ablate = app.add_subcommand("ablate", "Run the ablation grid and emit the report");
  common(ablate);
  pairing_flags(ablate);
  ablate->add_option("--manifest", o.manifest, "Manifest file")->required();
  ablate->add_option("--features", o.features, "Feature file (default: compute descriptors)");
  ablate->add_option("--oracle", o.oracle, "Oracle file for the pair quality section");
  ablate->add_option("--seeds", o.seeds, "Number of seeds, counting up from --seed");
  ablate->add_option("--count", o.count, "Random pairs per labeled image");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::usage);
  }

  set_log_level(o.verbose ? LogLevel::info : LogLevel::warn);
  try {
    if (*synth) return run_synth(o);
    if (*ingest) return run_ingest(o);
    if (*features) return run_features(o);
    if (*pair) return run_pair(o);
    if (*pair_eval) return run_pair_eval(o);
    if (*train_cmd) return run_train(o);
    if (*eval) return run_eval(o);
    if (*ablate) return run_ablate(o);
  } catch (const Error& e) {
    std::cerr << "slr: error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "slr: error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::runtime);
  }
  return static_cast<int>(ErrorKind::usage);
}
