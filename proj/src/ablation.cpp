#include "slr/ablation.hpp"

#include <algorithm>
#include <cmath>

#include "slr/error.hpp"
#include "slr/log.hpp"
#include "slr/rng.hpp"

namespace slr {

TrainConfig ablation_row_config(const TrainConfig& base, const std::string& row) {
  TrainConfig c = base;
  c.use_pairs = row != "supervised";
  c.use_eta = row == "pairs+eta" || row == "pairs+eta+lambda" || row == "random";
  c.use_lambda = row == "pairs+lambda" || row == "pairs+eta+lambda" || row == "random";
  if (std::find(ablation_rows().begin(), ablation_rows().end(), row) == ablation_rows().end()) {
    throw_validation("unknown ablation row '" + row + "'");
  }
  return c;
}

int random_pair_count(const Corpus& corpus, std::size_t informed_pairs, int configured) {
  std::size_t labeled = 0;
  std::size_t pool = 0;
  for (const auto& r : corpus.records()) {
    labeled += r.is_labeled_train() ? 1 : 0;
    pool += r.split == Split::unlabeled ? 1 : 0;
  }
  if (labeled == 0) throw_validation("random pairs need at least one labeled train image");
  if (configured > 0) return configured;
  const auto even = static_cast<std::size_t>(std::lround(static_cast<double>(informed_pairs) / labeled));
  return static_cast<int>(std::clamp<std::size_t>(even, 1, std::max<std::size_t>(1, pool / labeled)));
}

ReportInput run_ablation(const Corpus& corpus, const FeatureStore& store, const RunConfig& config,
                         const std::vector<std::uint64_t>& seeds, int threads, const Oracle* oracle) {
  if (seeds.empty()) throw_validation("ablation needs at least one seed");
  const TrainConfig base = config.train();
  const PairingConfig pairing = config.pairing();
  const PairSet informed = build_pairs(corpus, store, pairing);
  const int count = random_pair_count(corpus, informed.size(), config.get_int("random.count"));
  log_info("ablation: " + std::to_string(informed.size()) + " informed pairs, " + std::to_string(count) +
           " random pairs per labeled image");

  ReportInput report;
  report.config_hash = config.hash();
  report.seeds = seeds;
  report.class_names = corpus.class_names();

  std::vector<std::string> labeled_ids;
  for (const auto& r : corpus.records()) {
    if (r.has_mask()) labeled_ids.push_back(r.id);
  }
  if (oracle) {
    report.pair_quality = evaluate_pairs(informed, *oracle, labeled_ids);
    std::vector<LabelMask> masks;
    for (const auto& id : labeled_ids) masks.push_back(oracle_lookup(*oracle, id).mask);
    if (masks.size() >= 2) report.histogram = pair_iou_histogram(masks, 10);
  }

  ConfusionMatrix full_test(corpus.num_classes());
  bool have_test = false;
  for (const auto& row : ablation_rows()) {
    GridRow val_row{row, {}};
    GridRow test_row{row, {}};
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      TrainConfig c = ablation_row_config(base, row);
      c.seed = seeds[s];
      c.threads = threads;
      PairSet pairs = informed;
      if (row == "random") {
        pairs = random_pairs(corpus, count, mix_seed(seeds[s], 0x7a4d0), &store);
        if (oracle && s == 0) report.random_pair_quality = evaluate_pairs(pairs, *oracle, labeled_ids);
      }
      const TrainResult result = train(corpus, pairs, c);
      const ToyNet net = net_from_checkpoint(result.best);
      std::optional<RunScore> val;
      if (result.best.best_epoch >= 0) {
        const SegmentationMetrics m = metrics(evaluate_split(net, corpus, Split::val, c.resolution, threads));
        val = RunScore{m.mean_iou, m.pixel_acc};
      }
      val_row.scores.push_back(val);
      const ConfusionMatrix test = evaluate_split(net, corpus, Split::test, c.resolution, threads);
      if (test.total() > 0) {
        const SegmentationMetrics m = metrics(test);
        test_row.scores.push_back(RunScore{m.mean_iou, m.pixel_acc});
        if (row == "pairs+eta+lambda") {
          full_test += test;
          have_test = true;
        }
      } else {
        test_row.scores.push_back(std::nullopt);
      }
      log_info("ablation: " + row + " seed " + std::to_string(seeds[s]) + " done");
    }
    report.grid.push_back(std::move(val_row));
    report.test_grid.push_back(std::move(test_row));
  }
  if (have_test) report.per_class_iou = metrics(full_test).per_class_iou;
  return report;
}

}  // namespace slr
