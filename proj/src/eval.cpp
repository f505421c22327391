#include "slr/eval.hpp"

#include <string>

#include "slr/error.hpp"

namespace slr {

ConfusionMatrix::ConfusionMatrix(int classes) : classes_(classes) {
  if (classes < 1) throw_validation("confusion matrix needs at least one class");
  counts_.assign(static_cast<std::size_t>(classes) * classes, 0);
}

std::uint64_t ConfusionMatrix::row_sum(int truth) const {
  std::uint64_t s = 0;
  for (int j = 0; j < classes_; ++j) s += (*this)(truth, j);
  return s;
}

std::uint64_t ConfusionMatrix::col_sum(int predicted) const {
  std::uint64_t s = 0;
  for (int i = 0; i < classes_; ++i) s += (*this)(i, predicted);
  return s;
}

void ConfusionMatrix::add(int truth, int predicted, std::uint64_t count) {
  if (truth < 0 || truth >= classes_ || predicted < 0 || predicted >= classes_) {
    throw_validation("class index out of range: truth " + std::to_string(truth) + ", predicted " +
                     std::to_string(predicted) + " with " + std::to_string(classes_) + " classes");
  }
  counts_[static_cast<std::size_t>(truth) * classes_ + predicted] += count;
  total_ += count;
}

void ConfusionMatrix::accumulate(const LabelMask& predicted, const LabelMask& truth) {
  if (predicted.width != truth.width || predicted.height != truth.height) {
    throw_validation("prediction is " + std::to_string(predicted.width) + "x" + std::to_string(predicted.height) +
                     " but mask is " + std::to_string(truth.width) + "x" + std::to_string(truth.height));
  }
  for (std::size_t i = 0; i < truth.labels.size(); ++i) add(truth.labels[i], predicted.labels[i]);
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) throw_validation("cannot add confusion matrices of different class counts");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  total_ += other.total_;
  return *this;
}

SegmentationMetrics metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw_validation("metrics of an empty confusion matrix");
  SegmentationMetrics m;
  m.per_class_iou.resize(cm.classes());
  std::uint64_t trace = 0;
  double iou_sum = 0.0;
  int included = 0;
  for (int c = 0; c < cm.classes(); ++c) {
    const std::uint64_t tp = cm(c, c);
    trace += tp;
    const std::uint64_t denom = cm.row_sum(c) + cm.col_sum(c) - tp;
    if (denom == 0) continue;
    const double iou = static_cast<double>(tp) / static_cast<double>(denom);
    m.per_class_iou[c] = iou;
    iou_sum += iou;
    ++included;
  }
  m.mean_iou = iou_sum / included;
  m.pixel_acc = static_cast<double>(trace) / static_cast<double>(cm.total());
  return m;
}

MaskIou mask_iou(const LabelMask& a, const LabelMask& b) {
  if (a.width != b.width || a.height != b.height || a.classes != b.classes) {
    throw_validation("mask IoU needs equal shapes: " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                     "x" + std::to_string(a.classes) + " vs " + std::to_string(b.width) + "x" +
                     std::to_string(b.height) + "x" + std::to_string(b.classes));
  }
  ConfusionMatrix cm(a.classes);
  cm.accumulate(b, a);
  const SegmentationMetrics m = metrics(cm);
  return MaskIou{m.per_class_iou, m.mean_iou};
}

double foreground_iou(const LabelMask& a, const LabelMask& b) {
  const MaskIou iou = mask_iou(a, b);
  double sum = 0.0;
  int n = 0;
  for (std::size_t c = 1; c < iou.per_class.size(); ++c) {
    if (!iou.per_class[c]) continue;
    sum += *iou.per_class[c];
    ++n;
  }
  return n == 0 ? 1.0 : sum / n;
}

}  // namespace slr
