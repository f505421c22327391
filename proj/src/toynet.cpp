#include "slr/toynet.hpp"

#include <algorithm>
#include <cmath>

#include "slr/error.hpp"
#include "slr/rng.hpp"

namespace slr {
namespace {

TensorList make_params(const ToyNetShape& s) {
  if (s.features1 < 1 || s.features2 < 1 || s.classes < 2) {
    throw_validation("ToyNet needs F1, F2 >= 1 and at least 2 classes");
  }
  auto tensor = [](std::string name, std::vector<int> shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return Tensor{std::move(name), std::move(shape), std::vector<double>(n, 0.0)};
  };
  TensorList p;
  p.push_back(tensor("conv1.weight", {s.features1, 3, 3, 3}));
  p.push_back(tensor("conv1.bias", {s.features1}));
  p.push_back(tensor("conv2.weight", {s.features2, s.features1, 3, 3}));
  p.push_back(tensor("conv2.bias", {s.features2}));
  p.push_back(tensor("head.weight", {s.classes, s.features2}));
  p.push_back(tensor("head.bias", {s.classes}));
  return p;
}

// Valid output range for a shift of `d` along an axis of length n.
inline int lo(int d) { return std::max(0, -d); }
inline int hi(int n, int d) { return std::min(n, n - d); }

void conv3x3_forward(const double* in, int cin, int w, int h, const double* weight, const double* bias, int cout,
                     double* out) {
  const std::size_t plane = static_cast<std::size_t>(w) * h;
  for (int o = 0; o < cout; ++o) {
    double* dst_plane = out + o * plane;
    std::fill(dst_plane, dst_plane + plane, bias[o]);
    for (int i = 0; i < cin; ++i) {
      const double* src_plane = in + i * plane;
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        for (int kx = 0; kx < 3; ++kx) {
          const int dx = kx - 1;
          const double wv = weight[((o * cin + i) * 3 + ky) * 3 + kx];
          for (int y = lo(dy); y < hi(h, dy); ++y) {
            const double* src = src_plane + static_cast<std::size_t>(y + dy) * w + dx;
            double* dst = dst_plane + static_cast<std::size_t>(y) * w;
            for (int x = lo(dx); x < hi(w, dx); ++x) dst[x] += wv * src[x];
          }
        }
      }
    }
  }
}

// grad_in may be null when the input gradient is not needed.
void conv3x3_backward(const double* in, int cin, int w, int h, const double* weight, int cout,
                      const double* grad_out, double* grad_weight, double* grad_bias, double* grad_in) {
  const std::size_t plane = static_cast<std::size_t>(w) * h;
  for (int o = 0; o < cout; ++o) {
    const double* g_plane = grad_out + o * plane;
    double bsum = 0.0;
    for (std::size_t p = 0; p < plane; ++p) bsum += g_plane[p];
    grad_bias[o] += bsum;
    for (int i = 0; i < cin; ++i) {
      const double* src_plane = in + i * plane;
      double* gin_plane = grad_in ? grad_in + i * plane : nullptr;
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        for (int kx = 0; kx < 3; ++kx) {
          const int dx = kx - 1;
          const std::size_t widx = static_cast<std::size_t>(((o * cin + i) * 3 + ky) * 3 + kx);
          const double wv = weight[widx];
          double wsum = 0.0;
          for (int y = lo(dy); y < hi(h, dy); ++y) {
            const double* src = src_plane + static_cast<std::size_t>(y + dy) * w + dx;
            const double* g = g_plane + static_cast<std::size_t>(y) * w;
            for (int x = lo(dx); x < hi(w, dx); ++x) wsum += g[x] * src[x];
            if (gin_plane) {
              double* gin = gin_plane + static_cast<std::size_t>(y + dy) * w + dx;
              for (int x = lo(dx); x < hi(w, dx); ++x) gin[x] += wv * g[x];
            }
          }
          grad_weight[widx] += wsum;
        }
      }
    }
  }
}

}  // namespace

TensorList zeros_like(const TensorList& tensors) {
  TensorList out = tensors;
  for (auto& t : out) std::fill(t.data.begin(), t.data.end(), 0.0);
  return out;
}

ToyNet::ToyNet(ToyNetShape shape, std::uint64_t seed) : shape_(shape), params_(make_params(shape)) {
  Rng rng(mix_seed(seed, 0x70f17e7));
  auto fill = [&rng](Tensor& t, double stddev) {
    for (double& v : t.data) v = rng.normal(0.0, stddev);
  };
  fill(params_[kConv1W], std::sqrt(2.0 / (3 * 9)));
  fill(params_[kConv2W], std::sqrt(2.0 / (shape.features1 * 9)));
  fill(params_[kHeadW], std::sqrt(1.0 / shape.features2));
}

ToyNet ToyNet::zeros(ToyNetShape shape) {
  ToyNet net;
  net.shape_ = shape;
  net.params_ = make_params(shape);
  return net;
}

ToyNet ToyNet::from_tensors(ToyNetShape shape, TensorList params) {
  ToyNet net = zeros(shape);
  if (params.size() != net.params_.size()) throw_validation("ToyNet expects 6 parameter tensors");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape != net.params_[i].shape || params[i].data.size() != net.params_[i].data.size()) {
      throw_validation("parameter tensor '" + params[i].name + "' has the wrong shape");
    }
    net.params_[i].data = std::move(params[i].data);
  }
  return net;
}

std::size_t ToyNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : params_) n += t.size();
  return n;
}

NetInput make_input(const RgbImage& image) {
  NetInput in{image.width, image.height, std::vector<double>(image.pixels.size())};
  const std::size_t plane = static_cast<std::size_t>(image.width) * image.height;
  for (std::size_t p = 0; p < plane; ++p) {
    for (int c = 0; c < 3; ++c) in.planes[c * plane + p] = image.pixels[p * 3 + c] / 255.0 - 0.5;
  }
  return in;
}

ForwardResult forward(const ToyNet& net, const NetInput& input) {
  const int w = input.width;
  const int h = input.height;
  if (w < 3 || h < 3) throw_validation("ToyNet input must be at least 3x3, got " + std::to_string(w) + "x" +
                                       std::to_string(h));
  if (input.planes.size() != static_cast<std::size_t>(w) * h * 3) throw_validation("ToyNet input buffer mismatch");
  const auto& s = net.shape();
  const auto& p = net.params();
  const std::size_t plane = static_cast<std::size_t>(w) * h;

  ForwardResult r;
  ForwardCache& c = r.cache;
  c.input = input;
  c.pre1.resize(plane * s.features1);
  conv3x3_forward(input.planes.data(), 3, w, h, p[ToyNet::kConv1W].data.data(), p[ToyNet::kConv1B].data.data(),
                  s.features1, c.pre1.data());
  c.act1 = c.pre1;
  for (double& v : c.act1) v = v > 0.0 ? v : 0.0;

  c.pre2.resize(plane * s.features2);
  conv3x3_forward(c.act1.data(), s.features1, w, h, p[ToyNet::kConv2W].data.data(), p[ToyNet::kConv2B].data.data(),
                  s.features2, c.pre2.data());
  c.act2 = c.pre2;
  for (double& v : c.act2) v = v > 0.0 ? v : 0.0;

  const int C = s.classes;
  c.logits = Logits{w, h, C, std::vector<double>(plane * C)};
  const double* hw = p[ToyNet::kHeadW].data.data();
  const double* hb = p[ToyNet::kHeadB].data.data();
  std::vector<double> plane_buf(plane);
  for (int k = 0; k < C; ++k) {
    std::fill(plane_buf.begin(), plane_buf.end(), hb[k]);
    for (int f = 0; f < s.features2; ++f) {
      const double wv = hw[k * s.features2 + f];
      const double* a = c.act2.data() + f * plane;
      for (std::size_t q = 0; q < plane; ++q) plane_buf[q] += wv * a[q];
    }
    for (std::size_t q = 0; q < plane; ++q) c.logits.values[q * C + k] = plane_buf[q];
  }
  r.pred = softmax(c.logits);
  return r;
}

ForwardResult forward(const ToyNet& net, const RgbImage& image) { return forward(net, make_input(image)); }

void backward(const ToyNet& net, const ForwardCache& cache, std::span<const double> grad_logits, TensorList& grads) {
  const auto& s = net.shape();
  const auto& p = net.params();
  const int w = cache.input.width;
  const int h = cache.input.height;
  const std::size_t plane = static_cast<std::size_t>(w) * h;
  const int C = s.classes;
  if (grad_logits.size() != plane * C || cache.act2.size() != plane * s.features2) {
    throw_validation("backward: gradient or cache does not match the forward pass");
  }
  if (grads.size() != p.size()) throw_validation("backward: gradient list does not match the parameters");

  // Head (1x1).
  std::vector<double> g_plane(plane);
  std::vector<double> grad_act2(plane * s.features2, 0.0);
  const double* hw = p[ToyNet::kHeadW].data.data();
  double* ghw = grads[ToyNet::kHeadW].data.data();
  double* ghb = grads[ToyNet::kHeadB].data.data();
  for (int k = 0; k < C; ++k) {
    double bsum = 0.0;
    for (std::size_t q = 0; q < plane; ++q) {
      g_plane[q] = grad_logits[q * C + k];
      bsum += g_plane[q];
    }
    ghb[k] += bsum;
    for (int f = 0; f < s.features2; ++f) {
      const double* a = cache.act2.data() + f * plane;
      double* ga = grad_act2.data() + f * plane;
      const double wv = hw[k * s.features2 + f];
      double wsum = 0.0;
      for (std::size_t q = 0; q < plane; ++q) {
        wsum += g_plane[q] * a[q];
        ga[q] += wv * g_plane[q];
      }
      ghw[k * s.features2 + f] += wsum;
    }
  }

  for (std::size_t q = 0; q < grad_act2.size(); ++q) {
    if (!(cache.pre2[q] > 0.0)) grad_act2[q] = 0.0;
  }
  std::vector<double> grad_act1(plane * s.features1, 0.0);
  conv3x3_backward(cache.act1.data(), s.features1, w, h, p[ToyNet::kConv2W].data.data(), s.features2,
                   grad_act2.data(), grads[ToyNet::kConv2W].data.data(), grads[ToyNet::kConv2B].data.data(),
                   grad_act1.data());

  for (std::size_t q = 0; q < grad_act1.size(); ++q) {
    if (!(cache.pre1[q] > 0.0)) grad_act1[q] = 0.0;
  }
  conv3x3_backward(cache.input.planes.data(), 3, w, h, p[ToyNet::kConv1W].data.data(), s.features1,
                   grad_act1.data(), grads[ToyNet::kConv1W].data.data(), grads[ToyNet::kConv1B].data.data(),
                   nullptr);
}

}  // namespace slr
