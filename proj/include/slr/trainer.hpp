#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "slr/corpus.hpp"
#include "slr/eval.hpp"
#include "slr/optim.hpp"
#include "slr/pairing.hpp"
#include "slr/toynet.hpp"

namespace slr {

struct Checkpoint;

struct TrainConfig {
  int features1 = 8;
  int features2 = 8;
  int resolution = 64;  // images are resized to resolution x resolution
  int batch = 8;
  int epochs = 40;
  SgdConfig sgd;
  bool use_pairs = true;
  bool use_eta = true;
  bool use_lambda = true;
  bool eta_excludes_background = false;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string config_hash;
  /// Called at every epoch end with the current state and the best one so
  /// far; either can seed a later resume.
  std::function<void(const Checkpoint& last, const Checkpoint& best)> on_epoch;
};

struct IterationMetrics {
  long long iter = 0;
  int epoch = 0;
  double lr = 0.0;
  double lambda = 0.0;
  double mean_eta = 0.0;
  double loss_sup = 0.0;
  double loss_pair = 0.0;
  double loss_total = 0.0;

  friend bool operator==(const IterationMetrics&, const IterationMetrics&) = default;
};

struct EpochMetrics {
  int epoch = 0;
  double val_miou = 0.0;
  double val_pixacc = 0.0;

  friend bool operator==(const EpochMetrics&, const EpochMetrics&) = default;
};

struct MetricsLog {
  std::vector<IterationMetrics> iterations;
  std::vector<EpochMetrics> epochs;

  friend bool operator==(const MetricsLog&, const MetricsLog&) = default;
};

struct Checkpoint {
  ToyNetShape shape;
  TensorList params;
  TensorList velocity;
  std::uint64_t seed = 0;
  long long step = 0;  // global iterations completed
  int ipe = 1;
  long long max_iters = 0;
  std::string config_hash;
  int best_epoch = -1;
  double best_val_miou = -1.0;
  MetricsLog history;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// Binary checkpoint, magic "SLRC1", little-endian. Written to a temporary
/// file and renamed into place.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct TrainResult {
  Checkpoint best;  // highest val mIoU seen at an epoch end
  Checkpoint last;
  MetricsLog log;
};

struct ResumeState {
  Checkpoint last;
  Checkpoint best;
};

/// ceil(labeled train count / batch).
int iterations_per_epoch(std::size_t labeled_count, int batch);

/// Trains a ToyNet. Each iteration draws one batch from the labeled stream
/// and one from the pair stream; each stream cycles through its own
/// reshuffled permutation. The objective is the supervised loss plus the
/// pair loss. Validation mIoU is measured at every epoch end.
TrainResult train(const Corpus& corpus, const PairSet& pairs, const TrainConfig& config,
                  const std::optional<ResumeState>& resume = std::nullopt);

/// CSVs: iter,epoch,lr,lambda,mean_eta,loss_sup,loss_pair,loss_total and
/// epoch,val_miou,val_pixacc.
void write_metrics(const MetricsLog& log, const std::filesystem::path& iteration_csv,
                   const std::filesystem::path& epoch_csv);

/// Confusion matrix of a net over every masked record of `split`.
ConfusionMatrix evaluate_split(const ToyNet& net, const Corpus& corpus, Split split, int resolution,
                               int threads = 1);

ToyNet net_from_checkpoint(const Checkpoint& checkpoint);

struct GradCheckOptions {
  int samples = 256;
  std::uint64_t seed = 7;
  double lambda = 0.5;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  double mean_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;  // a ReLU changed sign inside the difference stencil
  std::string worst_parameter;
};

/// Compares the analytic gradient of the full objective (supervised term
/// plus pair term, using a one-pixel shifted copy of `image` as the
/// pseudo-labeled partner) against central differences on a deterministic
/// sample of parameters. eta is measured once and held fixed.
GradCheckReport grad_check(const ToyNet& net, const RgbImage& image, const LabelMask& mask, double eps,
                           const GradCheckOptions& options = {});

/// |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor = 1e-8);

}  // namespace slr
