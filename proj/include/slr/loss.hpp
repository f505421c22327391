#pragma once

#include <span>
#include <vector>

#include "slr/image.hpp"

namespace slr {

/// Raw per-pixel scores, pixel-major: values[p * classes + c].
struct Logits {
  int width = 0;
  int height = 0;
  int classes = 0;
  std::vector<double> values;

  std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
};

/// Per-pixel class probabilities, same layout as Logits.
struct PredictionMap {
  int width = 0;
  int height = 0;
  int classes = 0;
  std::vector<double> prob;

  std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
  /// Each pixel's probabilities are non-negative and sum to 1 within 1e-6.
  void validate() const;
  /// Argmax class per pixel; ties go to the lower class index.
  LabelMask argmax() const;
};

PredictionMap softmax(const Logits& logits);

struct LossWeights {
  double eta = 1.0;
  double lambda = 1.0;
};

/// Global training position. step() = epoch * ipe + iter.
struct TrainClock {
  int epoch = 0;
  int ipe = 1;
  int iter = 0;
  long long max_iters = 1;

  long long step() const { return static_cast<long long>(epoch) * ipe + iter; }
  void validate() const;
  static TrainClock at_step(long long step, int ipe, long long max_iters);
};

inline constexpr double kProbabilityFloor = 1e-12;

struct CrossEntropy {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d logits, pixel-major
};

/// Mean over pixels of -log p[true class] (p floored at 1e-12). The
/// gradient is (p - onehot) / (W * H) per pixel, valid when `pred` is the
/// softmax of the logits being differentiated.
CrossEntropy cross_entropy(const PredictionMap& pred, const LabelMask& mask);

struct LabeledPrediction {
  const PredictionMap& pred;
  const LabelMask& mask;
};

struct BatchLoss {
  double loss = 0.0;
  std::vector<double> per_image;
  std::vector<std::vector<double>> grads;  // already divided by the batch size
};

/// Batch mean of per-image cross entropy.
BatchLoss supervised_loss(std::span<const LabeledPrediction> batch);

/// Fraction of pixels whose argmax classes agree. With
/// `exclude_background`, only pixels where either map predicts a non-zero
/// class are counted, and two all-background maps score 1.
double eta(const PredictionMap& first, const PredictionMap& second, bool exclude_background = false);

/// step / max_iters.
double lambda_weight(const TrainClock& clock);

struct PairSample {
  const PredictionMap& labeled;
  const PredictionMap& pseudo;
  const LabelMask& mask;  // the labeled image's annotation, reused for both
};

struct PairLossOptions {
  bool use_eta = true;     // false: eta treated as 1
  bool use_lambda = true;  // false: lambda treated as 1
  bool eta_excludes_background = false;
};

struct PairLoss {
  double loss = 0.0;
  double labeled_term = 0.0;
  double pseudo_term = 0.0;
  double lambda = 0.0;
  std::vector<double> etas;           // effective weights, one per pair
  std::vector<double> ce_labeled;
  std::vector<double> ce_pseudo;
  std::vector<std::vector<double>> grad_labeled;
  std::vector<std::vector<double>> grad_pseudo;
};

/// mean_i CE(y_i, f(x_i1)) + mean_i lambda * eta_i * CE(y_i, f(x_i2)).
/// eta is a constant for differentiation; no gradient flows through it.
PairLoss pair_loss(std::span<const PairSample> batch, const TrainClock& clock, PairLossOptions options = {});

/// Same, with the weights given directly.
PairLoss pair_loss_weighted(std::span<const PairSample> batch, double lambda, std::span<const double> etas);

/// sup + pair; throws on non-finite input.
double total_loss(double sup, double pair);

}  // namespace slr
