// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "brute_pairing.hpp"
#include "fixtures.hpp"
#include "slr/ablation.hpp"
#include "slr/config.hpp"
#include "slr/eval.hpp"
#include "slr/features.hpp"
#include "slr/loss.hpp"
#include "slr/optim.hpp"
#include "slr/pairing.hpp"
#include "slr/rng.hpp"
#include "slr/synth.hpp"
#include "slr/toynet.hpp"
#include "slr/trainer.hpp"

using namespace slr;
using Clock = std::chrono::steady_clock;

namespace {

// Collects failed conditions of one criterion.
struct Check {
  std::vector<std::string> failures;
  std::ostringstream notes;

  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  void near(double got, double want, double tol, const std::string& what) {
    if (!(std::abs(got - want) <= tol)) {
      std::ostringstream s;
      s.precision(17);
      s << what << ": got " << got << ", want " << want << " +- " << tol;
      failures.push_back(s.str());
    }
  }
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

bool run_criterion(int number, const std::string& title, double limit_seconds,
                   const std::function<void(Check&)>& body) {
  Check check;
  const auto start = Clock::now();
  try {
    body(check);
  } catch (const std::exception& e) {
    check.failures.push_back(std::string("exception: ") + e.what());
  }
  const double elapsed = seconds_since(start);
  if (elapsed > limit_seconds) {
    check.failures.push_back("runtime " + std::to_string(elapsed) + " s exceeds " + std::to_string(limit_seconds) + " s");
  }
  const bool ok = check.failures.empty();
  std::printf("%s %d %s (%.2f s)%s\n", ok ? "PASS" : "FAIL", number, title.c_str(), elapsed,
              check.notes.str().empty() ? "" : ("  " + check.notes.str()).c_str());
  for (const auto& f : check.failures) std::printf("    %s\n", f.c_str());
  std::fflush(stdout);
  return ok;
}

// One-pixel two-class prediction whose true-class probability is p.
PredictionMap one_pixel(double p) {
  PredictionMap m;
  m.width = 1;
  m.height = 1;
  m.classes = 2;
  m.prob = {p, 1.0 - p};
  return m;
}

PredictionMap from_labels(const std::vector<int>& labels, int w, int h, int classes) {
  PredictionMap m;
  m.width = w;
  m.height = h;
  m.classes = classes;
  m.prob.assign(labels.size() * classes, 0.0);
  for (std::size_t p = 0; p < labels.size(); ++p) m.prob[p * classes + labels[p]] = 1.0;
  return m;
}

void loss_kernels(Check& c) {
  // Cross entropy of a uniform two-class prediction.
  LabelMask zero(1, 1, 2);
  c.near(cross_entropy(one_pixel(0.5), zero).loss, std::log(2.0), 1e-12, "uniform cross entropy");

  // Agreement of two 2x2 maps that match on two pixels.
  c.near(eta(from_labels({0, 1, 1, 0}, 2, 2, 2), from_labels({0, 1, 0, 1}, 2, 2, 2)), 0.5, 0.0, "eta 2x2");
  c.near(eta(from_labels({1, 1}, 2, 1, 2), from_labels({1, 1}, 2, 1, 2)), 1.0, 0.0, "eta identical");

  // Lambda at a documented clock and over a full 1000-iteration run.
  c.near(lambda_weight(TrainClock{5, 100, 50, 1000}), 0.55, 1e-15, "lambda at step 550");
  for (long long t = 0; t < 1000; ++t) {
    const TrainClock clock = TrainClock::at_step(t, 100, 1000);
    if (lambda_weight(clock) != static_cast<double>(t) / 1000.0) {
      c.expect(false, "lambda trace differs at step " + std::to_string(t));
      break;
    }
  }

  // Weighted pair loss: CE_l = 0.5, CE_pl = 1.0, eta = 0.5, lambda = 0.5.
  const PredictionMap pl = one_pixel(std::exp(-0.5));
  const PredictionMap pu = one_pixel(std::exp(-1.0));
  const PairSample sample{pl, pu, zero};
  const double half = 0.5;
  c.near(pair_loss_weighted(std::span(&sample, 1), 0.5, std::span(&half, 1)).loss, 0.75, 1e-12, "pair loss");

  // Polynomial learning rate.
  c.near(poly_lr(0.02, TrainClock::at_step(0, 10, 1000)), 0.02, 0.0, "lr at t=0");
  c.near(poly_lr(0.02, TrainClock::at_step(999, 10, 1000)), 0.02 * std::pow(0.001, 0.9), 1e-15, "lr at t=999");
  c.near(poly_lr(0.02, TrainClock::at_step(500, 10, 1000)), 0.010718, 1e-6, "lr halfway");

  // SGD with momentum.
  const ToyNetShape shape{2, 2, 2};
  SgdConfig sgd;
  sgd.weight_decay = 0.0;
  {
    ToyNet net(shape, 3);
    const TensorList before = net.params();
    OptimizerState opt = make_optimizer(net, sgd);
    sgd_step(net, zeros_like(net.params()), opt, 0.1);
    c.expect(net.params() == before, "zero gradient moved parameters");
  }
  {
    ToyNet net(shape, 3);
    const TensorList before = net.params();
    TensorList g = zeros_like(net.params());
    for (auto& t : g) std::fill(t.data.begin(), t.data.end(), 0.25);
    OptimizerState opt = make_optimizer(net, sgd);
    sgd_step(net, g, opt, 0.1);
    c.near(net.params()[0].data[0], before[0].data[0] - 0.1 * 0.25, 1e-15, "one sgd step");
    sgd_step(net, g, opt, 0.1);
    c.near(before[0].data[0] - net.params()[0].data[0], 0.1 * 0.25 * (1.0 + 1.9), 1e-15, "two sgd steps");
  }
}

void gradient_fidelity(Check& c) {
  const ToyNet net(ToyNetShape{4, 4, 3}, 21);
  const RgbImage image = slr::test::smooth_image(8, 8, 5);
  LabelMask mask(8, 8, 3);
  Rng rng(8);
  for (auto& v : mask.labels) v = static_cast<std::uint8_t>(rng.below(3));
  GradCheckOptions options;
  options.samples = 256;
  const GradCheckReport r = grad_check(net, image, mask, 1e-5, options);
  c.expect(r.checked >= 200, "only " + std::to_string(r.checked) + " parameters checked");
  c.expect(r.max_rel_error < 1e-4, "max relative error " + std::to_string(r.max_rel_error) + " at " +
                                       r.worst_parameter);
  c.notes << "checked " << r.checked << ", max rel error " << r.max_rel_error;
}

void oracle_equivalence(Check& c) {
  int compared = 0;
  for (std::uint64_t seed = 1; compared < 20; ++seed) {
    const auto pc = slr::test::random_pairing_case(seed * 7919);
    if (pairing_corpus(pc.corpus).empty()) continue;
    ++compared;
    std::vector<slr::test::BruteImage> images;
    for (const auto& r : pc.corpus.records()) {
      images.push_back({r.id, r.subject_id, r.day, r.index, r.is_labeled_train(), r.split == Split::unlabeled,
                        pc.store.at(r.id).values});
    }
    PairingConfig config;
    config.use_pca = false;
    const PairSet got = build_pairs(pc.corpus, pc.store, config);
    const auto want = slr::test::brute_force_pairs(images, 0.0);
    bool same = got.size() == want.size();
    for (std::size_t i = 0; same && i < want.size(); ++i) {
      const Pair& p = got.pairs[i];
      same = p.labeled_id == want[i].labeled_id && p.pseudo_id == want[i].pseudo_id &&
             p.similarity == want[i].similarity && p.hop_count == want[i].hop;
    }
    c.expect(same, "corpus seed " + std::to_string(seed) + " differs from the reference");
  }
  c.notes << compared << " corpora";
}

std::vector<std::string> masked_ids(const Corpus& corpus) {
  std::vector<std::string> ids;
  for (const auto& r : corpus.records()) {
    if (r.has_mask()) ids.push_back(r.id);
  }
  return ids;
}

void pair_quality(Check& c) {
  slr::test::TempDir dir("slr_accept_pairs");
  const SynthOutput s = generate(SynthConfig{}, dir.path());
  const FeatureStore store = compute_descriptors(s.corpus);
  const PairSet pairs = build_pairs(s.corpus, store, RunConfig().pairing());
  const PairQualityReport r = evaluate_pairs(pairs, s.oracle, masked_ids(s.corpus));
  c.expect(r.pairs > 0, "no pairs built");
  c.expect(r.same_class_fraction >= 0.90, "same-class fraction " + std::to_string(r.same_class_fraction));
  c.expect(r.pair_iou.mean > r.baseline_iou.mean, "pair IoU " + std::to_string(r.pair_iou.mean) +
                                                       " does not exceed baseline " +
                                                       std::to_string(r.baseline_iou.mean));
  c.notes << r.pairs << " pairs, same-class " << r.same_class_fraction << ", IoU " << r.pair_iou.mean << " vs "
          << r.baseline_iou.mean;
}

void ablation_trend(Check& c) {
  slr::test::TempDir dir("slr_accept_ablate");
  const RunConfig config = RunConfig::from_text(
      "synth.label_fraction = 0.1\n"
      "train.epochs = 300\n"
      "train.resolution = 32\n");
  const SynthOutput s = generate(config.synth(), dir.path());
  const FeatureStore store = compute_descriptors(s.corpus);
  const ReportInput report = run_ablation(s.corpus, store, config, {1, 2, 3}, 1);
  std::map<std::string, double> mean;
  for (const auto& row : report.grid) {
    double sum = 0.0;
    for (const auto& score : row.scores) {
      c.expect(score.has_value(), "missing run in row " + row.run);
      if (score) sum += score->miou;
    }
    mean[row.run] = sum / static_cast<double>(row.scores.size());
  }
  const double full = mean["pairs+eta+lambda"];
  c.expect(full >= mean["pairs+eta"], "full row below pairs+eta");
  c.expect(full >= mean["pairs+lambda"], "full row below pairs+lambda");
  c.expect(full >= mean["supervised"], "full row below supervised");
  c.expect(mean["pairs"] >= mean["random"], "informed pairs below random pairs");
  for (const auto& name : ablation_rows()) c.notes << name << " " << mean[name] << "; ";
}

void pca_speedup(Check& c) {
  // 1000 images of 2048 dims: 2 subjects x 20 days x 25 images, drifting
  // smoothly by day.
  const int dim = 2048;
  Rng rng(17);
  std::vector<ImageRecord> records;
  FeatureStore store;
  for (int s = 0; s < 2; ++s) {
    std::vector<double> base(dim);
    std::vector<double> drift(dim);
    for (int j = 0; j < dim; ++j) {
      base[j] = rng.normal();
      drift[j] = rng.normal(0.0, 0.05);
    }
    for (int day = 1; day <= 20; ++day) {
      for (int n = 1; n <= 25; ++n) {
        char id[32];
        std::snprintf(id, sizeof id, "s%d_d%02d_n%02d", s, day, n);
        const Split split = rng.uniform() < 0.3 ? Split::train : Split::unlabeled;
        records.push_back(slr::test::record(id, "s" + std::to_string(s), day, n, split));
        FeatureVector v{id, std::vector<double>(dim)};
        for (int j = 0; j < dim; ++j) v.values[j] = base[j] + drift[j] * day + rng.normal(0.0, 0.3);
        store.emplace(id, std::move(v));
      }
    }
  }
  const Corpus corpus(records, {"background", "thing"});
  PairingConfig raw;
  raw.use_pca = false;
  PairingConfig reduced;
  reduced.use_pca = true;
  reduced.pca_dim = 256;
  auto start = Clock::now();
  const PairSet a = build_pairs(corpus, store, raw);
  const double t_raw = seconds_since(start);
  start = Clock::now();
  const PairSet b = build_pairs(corpus, store, reduced);
  const double t_pca = seconds_since(start);
  c.expect(store.size() == 1000, "expected 1000 vectors");
  c.expect(t_pca < t_raw, "PCA pairing took " + std::to_string(t_pca) + " s, raw " + std::to_string(t_raw) + " s");
  c.notes << "raw " << t_raw << " s (" << a.size() << " pairs), pca " << t_pca << " s (" << b.size() << " pairs)";
}

void metric_correctness(Check& c) {
  ConfusionMatrix cm(2);
  cm.add(0, 0, 3);
  cm.add(0, 1, 1);
  cm.add(1, 0, 1);
  cm.add(1, 1, 3);
  const SegmentationMetrics m = metrics(cm);
  c.expect(m.per_class_iou[0] == 0.6 && m.per_class_iou[1] == 0.6, "per-class IoU of [[3,1],[1,3]]");
  c.expect(m.mean_iou == 0.6, "mIoU of [[3,1],[1,3]]");
  c.expect(m.pixel_acc == 0.75, "pixel accuracy of [[3,1],[1,3]]");

  // 4x4 masks: class 1 on three pixels each, overlapping on two.
  LabelMask a(4, 4, 2);
  LabelMask b(4, 4, 2);
  a.labels[0] = a.labels[1] = a.labels[2] = 1;
  b.labels[1] = b.labels[2] = b.labels[3] = 1;
  const MaskIou iou = mask_iou(a, b);
  c.expect(iou.per_class[1] == 0.5, "4x4 hand case IoU");
  c.expect(foreground_iou(a, b) == 0.5, "4x4 hand case foreground IoU");

  // Set-arithmetic oracle on random grids.
  Rng rng(99);
  for (int g = 0; g < 5; ++g) {
    const int w = 3 + static_cast<int>(rng.below(6));
    const int h = 3 + static_cast<int>(rng.below(6));
    const int classes = 2 + static_cast<int>(rng.below(3));
    LabelMask truth(w, h, classes);
    LabelMask pred(w, h, classes);
    for (auto& v : truth.labels) v = static_cast<std::uint8_t>(rng.below(classes));
    for (auto& v : pred.labels) v = static_cast<std::uint8_t>(rng.below(classes));
    ConfusionMatrix grid_cm(classes);
    grid_cm.accumulate(pred, truth);
    const SegmentationMetrics got = metrics(grid_cm);
    double sum = 0.0;
    int defined = 0;
    std::size_t correct = 0;
    for (std::size_t p = 0; p < truth.size(); ++p) correct += truth.labels[p] == pred.labels[p] ? 1 : 0;
    for (int k = 0; k < classes; ++k) {
      std::set<std::size_t> t;
      std::set<std::size_t> q;
      for (std::size_t p = 0; p < truth.size(); ++p) {
        if (truth.labels[p] == k) t.insert(p);
        if (pred.labels[p] == k) q.insert(p);
      }
      std::vector<std::size_t> inter;
      std::vector<std::size_t> uni;
      std::set_intersection(t.begin(), t.end(), q.begin(), q.end(), std::back_inserter(inter));
      std::set_union(t.begin(), t.end(), q.begin(), q.end(), std::back_inserter(uni));
      if (uni.empty()) {
        c.expect(!got.per_class_iou[k].has_value(), "absent class should have no IoU");
        continue;
      }
      const double want = static_cast<double>(inter.size()) / static_cast<double>(uni.size());
      c.expect(got.per_class_iou[k].has_value(), "missing IoU for a present class");
      if (got.per_class_iou[k]) c.near(*got.per_class_iou[k], want, 1e-12, "class IoU");
      sum += want;
      ++defined;
    }
    c.near(got.mean_iou, sum / defined, 1e-12, "grid mIoU");
    c.near(got.pixel_acc, static_cast<double>(correct) / static_cast<double>(truth.size()), 1e-12, "grid accuracy");
  }
}

int shell(const std::string& command) {
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void ablate_determinism(Check& c) {
  slr::test::TempDir dir("slr_accept_det");
  slr::test::write_file(dir / "run.cfg",
                        "synth.subjects = 3\n"
                        "synth.days = 8\n"
                        "synth.size = 32\n"
                        "synth.label_fraction = 0.3\n"
                        "train.resolution = 16\n"
                        "train.epochs = 20\n"
                        "ablate.seeds = 2\n");
  const std::string cli = SLR_CLI_PATH;
  const std::string cfg = " --config " + (dir / "run.cfg").string();
  const std::string quiet = " > " + (dir / "log").string() + " 2>&1";
  c.expect(shell(cli + " synth --out " + (dir / "corpus").string() + cfg + quiet) == 0, "synth failed");
  for (const char* run : {"a", "b"}) {
    const std::string args = " ablate --manifest " + (dir / "corpus/manifest.tsv").string() + " --oracle " +
                             (dir / "corpus/oracle.tsv").string() + " --out " + (dir / run).string();
    c.expect(shell(cli + args + cfg + quiet) == 0, std::string("ablate run ") + run + " failed");
  }
  int files = 0;
  for (const char* name : {"grid.csv", "grid_seeds.csv", "grid_test.csv", "per_class_iou.csv",
                           "pair_iou_histogram.csv", "pair_quality.txt"}) {
    const std::string x = slr::test::read_file(dir / "a" / name);
    const std::string y = slr::test::read_file(dir / "b" / name);
    c.expect(!x.empty(), std::string(name) + " missing");
    c.expect(x == y, std::string(name) + " differs between runs");
    ++files;
  }
  c.notes << files << " report files compared";
}

}  // namespace

int main() {
  int failed = 0;
  failed += !run_criterion(1, "loss kernels match their definitions", 1.0, loss_kernels);
  failed += !run_criterion(2, "analytic gradients match finite differences", 30.0, gradient_fidelity);
  failed += !run_criterion(3, "pairing equals the brute-force reference", 60.0, oracle_equivalence);
  failed += !run_criterion(4, "pair quality beats the same-class baseline", 120.0, pair_quality);
  failed += !run_criterion(5, "ablation ordering", 1800.0, ablation_trend);
  failed += !run_criterion(6, "PCA speeds up pairing", 300.0, pca_speedup);
  failed += !run_criterion(7, "metrics match hand values and a set oracle", 1.0, metric_correctness);
  failed += !run_criterion(8, "ablate reports are byte-identical across runs", 600.0, ablate_determinism);
  std::printf("%d of 8 criteria passed\n", 8 - failed);
  return failed == 0 ? 0 : 1;
}
