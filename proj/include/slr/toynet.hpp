#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "slr/image.hpp"
#include "slr/loss.hpp"

namespace slr {

struct Tensor {
  std::string name;
  std::vector<int> shape;
  std::vector<double> data;

  std::size_t size() const { return data.size(); }
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

using TensorList = std::vector<Tensor>;

TensorList zeros_like(const TensorList& tensors);

struct ToyNetShape {
  int features1 = 8;
  int features2 = 8;
  int classes = 3;

  friend bool operator==(const ToyNetShape&, const ToyNetShape&) = default;
};

/// Per-pixel segmentation network:
///   conv 3x3 (3 -> F1) + ReLU, conv 3x3 (F1 -> F2) + ReLU, conv 1x1 (F2 -> C),
/// zero "same" padding, softmax over classes.
///
/// Parameters, in order: conv1.weight [F1,3,3,3], conv1.bias [F1],
/// conv2.weight [F2,F1,3,3], conv2.bias [F2], head.weight [C,F2], head.bias [C].
class ToyNet {
 public:
  ToyNet() = default;
  /// He-normal convolution weights, zero biases, deterministic in `seed`.
  ToyNet(ToyNetShape shape, std::uint64_t seed);

  static ToyNet zeros(ToyNetShape shape);
  /// Rebuilds a net from stored tensors; shapes are checked.
  static ToyNet from_tensors(ToyNetShape shape, TensorList params);

  const ToyNetShape& shape() const { return shape_; }
  TensorList& params() { return params_; }
  const TensorList& params() const { return params_; }
  std::size_t parameter_count() const;

  enum Index { kConv1W = 0, kConv1B, kConv2W, kConv2B, kHeadW, kHeadB };

 private:
  ToyNetShape shape_;
  TensorList params_;
};

/// Network input: planar channels, pixel values mapped to [-0.5, 0.5].
struct NetInput {
  int width = 0;
  int height = 0;
  std::vector<double> planes;  // [3][H][W]
};

NetInput make_input(const RgbImage& image);

struct ForwardCache {
  NetInput input;
  std::vector<double> pre1, act1;  // [F1][H][W]
  std::vector<double> pre2, act2;  // [F2][H][W]
  Logits logits;
};

struct ForwardResult {
  PredictionMap pred;
  ForwardCache cache;
};

/// Requires width and height >= 3.
ForwardResult forward(const ToyNet& net, const NetInput& input);
ForwardResult forward(const ToyNet& net, const RgbImage& image);

/// Accumulates d loss / d params into `grads` given d loss / d logits
/// (pixel-major, as produced by the loss kernel).
void backward(const ToyNet& net, const ForwardCache& cache, std::span<const double> grad_logits, TensorList& grads);

}  // namespace slr
