#include "slr/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "slr/error.hpp"

namespace slr {
namespace {

void check_shapes(const PredictionMap& pred, const LabelMask& mask) {
  if (pred.width != mask.width || pred.height != mask.height) {
    throw_validation("prediction is " + std::to_string(pred.width) + "x" + std::to_string(pred.height) +
                     " but mask is " + std::to_string(mask.width) + "x" + std::to_string(mask.height));
  }
  if (pred.prob.size() != pred.pixels() * static_cast<std::size_t>(pred.classes)) {
    throw_validation("prediction buffer does not match its shape");
  }
}

}  // namespace

void PredictionMap::validate() const {
  if (prob.size() != pixels() * static_cast<std::size_t>(classes)) {
    throw_validation("prediction buffer does not match its shape");
  }
  for (std::size_t p = 0; p < pixels(); ++p) {
    double sum = 0.0;
    for (int c = 0; c < classes; ++c) {
      const double v = prob[p * classes + c];
      if (!(v >= 0.0)) throw_validation("negative or NaN probability at pixel " + std::to_string(p));
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw_validation("probabilities at pixel " + std::to_string(p) + " sum to " +
                                                     std::to_string(sum));
  }
}

LabelMask PredictionMap::argmax() const {
  LabelMask out(width, height, classes);
  for (std::size_t p = 0; p < pixels(); ++p) {
    const double* row = &prob[p * classes];
    int best = 0;
    for (int c = 1; c < classes; ++c) {
      if (row[c] > row[best]) best = c;
    }
    out.labels[p] = static_cast<std::uint8_t>(best);
  }
  return out;
}

PredictionMap softmax(const Logits& logits) {
  PredictionMap out{logits.width, logits.height, logits.classes, std::vector<double>(logits.values.size())};
  const int C = logits.classes;
  for (std::size_t p = 0; p < logits.pixels(); ++p) {
    const double* z = &logits.values[p * C];
    double* q = &out.prob[p * C];
    double peak = z[0];
    for (int c = 1; c < C; ++c) peak = std::max(peak, z[c]);
    double sum = 0.0;
    for (int c = 0; c < C; ++c) {
      q[c] = std::exp(z[c] - peak);
      sum += q[c];
    }
    for (int c = 0; c < C; ++c) q[c] /= sum;
  }
  return out;
}

void TrainClock::validate() const {
  if (epoch < 0 || ipe < 1 || iter < 0 || iter >= ipe || max_iters < 1 || step() >= max_iters) {
    throw_validation("invalid train clock: epoch " + std::to_string(epoch) + ", ipe " + std::to_string(ipe) +
                     ", iter " + std::to_string(iter) + ", max_iters " + std::to_string(max_iters));
  }
}

TrainClock TrainClock::at_step(long long step, int ipe, long long max_iters) {
  TrainClock c;
  c.ipe = ipe;
  c.epoch = static_cast<int>(step / ipe);
  c.iter = static_cast<int>(step % ipe);
  c.max_iters = max_iters;
  return c;
}

CrossEntropy cross_entropy(const PredictionMap& pred, const LabelMask& mask) {
  check_shapes(pred, mask);
  const int C = pred.classes;
  const std::size_t n = pred.pixels();
  const double inv = 1.0 / static_cast<double>(n);
  CrossEntropy out;
  out.grad.resize(pred.prob.size());
  double sum = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    const int truth = mask.labels[p];
    if (truth >= C) throw_validation("mask class " + std::to_string(truth) + " >= " + std::to_string(C));
    const double* q = &pred.prob[p * C];
    sum -= std::log(std::max(q[truth], kProbabilityFloor));
    double* g = &out.grad[p * C];
    for (int c = 0; c < C; ++c) g[c] = q[c] * inv;
    g[truth] -= inv;
  }
  out.loss = sum * inv;
  return out;
}

BatchLoss supervised_loss(std::span<const LabeledPrediction> batch) {
  if (batch.empty()) throw_validation("supervised loss of an empty batch");
  BatchLoss out;
  const double inv = 1.0 / static_cast<double>(batch.size());
  double sum = 0.0;
  for (const auto& item : batch) {
    CrossEntropy ce = cross_entropy(item.pred, item.mask);
    sum += ce.loss;
    out.per_image.push_back(ce.loss);
    for (double& g : ce.grad) g *= inv;
    out.grads.push_back(std::move(ce.grad));
  }
  out.loss = sum * inv;
  return out;
}

double eta(const PredictionMap& first, const PredictionMap& second, bool exclude_background) {
  if (first.width != second.width || first.height != second.height || first.classes != second.classes) {
    throw_validation("eta needs predictions of equal shape");
  }
  const LabelMask a = first.argmax();
  const LabelMask b = second.argmax();
  std::size_t agree = 0;
  std::size_t counted = 0;
  for (std::size_t p = 0; p < a.labels.size(); ++p) {
    if (exclude_background && a.labels[p] == 0 && b.labels[p] == 0) continue;
    ++counted;
    if (a.labels[p] == b.labels[p]) ++agree;
  }
  if (counted == 0) return 1.0;
  return static_cast<double>(agree) / static_cast<double>(counted);
}

double lambda_weight(const TrainClock& clock) {
  clock.validate();
  return static_cast<double>(clock.step()) / static_cast<double>(clock.max_iters);
}

PairLoss pair_loss_weighted(std::span<const PairSample> batch, double lambda, std::span<const double> etas) {
  if (batch.empty()) throw_validation("pair loss of an empty batch");
  if (etas.size() != batch.size()) throw_validation("pair loss needs one eta per pair");
  PairLoss out;
  out.lambda = lambda;
  out.etas.assign(etas.begin(), etas.end());
  const double inv = 1.0 / static_cast<double>(batch.size());
  double labeled_sum = 0.0;
  double pseudo_sum = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const PairSample& s = batch[i];
    if (s.labeled.width != s.pseudo.width || s.labeled.height != s.pseudo.height ||
        s.labeled.classes != s.pseudo.classes) {
      throw_validation("pair " + std::to_string(i) + ": predictions differ in shape");
    }
    CrossEntropy l = cross_entropy(s.labeled, s.mask);
    CrossEntropy u = cross_entropy(s.pseudo, s.mask);
    const double w = lambda * etas[i];
    labeled_sum += l.loss;
    pseudo_sum += w * u.loss;
    out.ce_labeled.push_back(l.loss);
    out.ce_pseudo.push_back(u.loss);
    for (double& g : l.grad) g *= inv;
    for (double& g : u.grad) g *= w * inv;
    out.grad_labeled.push_back(std::move(l.grad));
    out.grad_pseudo.push_back(std::move(u.grad));
  }
  out.labeled_term = labeled_sum * inv;
  out.pseudo_term = pseudo_sum * inv;
  out.loss = out.labeled_term + out.pseudo_term;
  return out;
}

PairLoss pair_loss(std::span<const PairSample> batch, const TrainClock& clock, PairLossOptions options) {
  const double lambda = options.use_lambda ? lambda_weight(clock) : 1.0;
  std::vector<double> etas;
  etas.reserve(batch.size());
  for (const auto& s : batch) {
    etas.push_back(options.use_eta ? eta(s.labeled, s.pseudo, options.eta_excludes_background) : 1.0);
  }
  return pair_loss_weighted(batch, lambda, etas);
}

double total_loss(double sup, double pair) {
  if (!std::isfinite(sup) || !std::isfinite(pair)) throw_runtime("non-finite loss component");
  return sup + pair;
}

}  // namespace slr
