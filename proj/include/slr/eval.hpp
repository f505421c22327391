#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "slr/image.hpp"

namespace slr {

/// C x C pixel counts; entry (i, j) counts pixels of true class i predicted as j.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int classes);

  int classes() const { return classes_; }
  std::uint64_t operator()(int truth, int predicted) const {
    return counts_[static_cast<std::size_t>(truth) * classes_ + predicted];
  }
  std::uint64_t total() const { return total_; }
  std::uint64_t row_sum(int truth) const;
  std::uint64_t col_sum(int predicted) const;

  /// Adds one image. `predicted` is an argmax class grid of the same shape.
  void accumulate(const LabelMask& predicted, const LabelMask& truth);
  void add(int truth, int predicted, std::uint64_t count = 1);

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  int classes_;
  std::uint64_t total_ = 0;
  std::vector<std::uint64_t> counts_;
};

struct SegmentationMetrics {
  /// IoU per class; empty for classes absent from both truth and prediction.
  std::vector<std::optional<double>> per_class_iou;
  double mean_iou = 0.0;  // over classes with a defined IoU
  double pixel_acc = 0.0;
};

/// Throws on an all-zero matrix.
SegmentationMetrics metrics(const ConfusionMatrix& cm);

struct MaskIou {
  std::vector<std::optional<double>> per_class;
  double mean = 0.0;
};

/// IoU between two masks, scored as truth vs prediction through the
/// confusion-matrix formula. Symmetric in its arguments.
MaskIou mask_iou(const LabelMask& a, const LabelMask& b);

/// Mean IoU over foreground classes (>= 1) present in either mask. Two
/// masks with no foreground at all score 1.
double foreground_iou(const LabelMask& a, const LabelMask& b);

}  // namespace slr
