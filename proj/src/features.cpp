#include "slr/features.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "slr/error.hpp"
#include "slr/parallel.hpp"

namespace slr {
namespace {

void normalize_block(std::span<double> block) {
  double sq = 0.0;
  for (double v : block) sq += v * v;
  if (sq <= 0.0) return;
  const double inv = 1.0 / std::sqrt(sq);
  for (double& v : block) v *= inv;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

void FeatureVector::validate() const {
  if (values.empty()) throw_validation("feature vector '" + image_id + "' is empty");
  double sq = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw_validation("feature vector '" + image_id + "' has a non-finite entry at " + std::to_string(i));
    }
    sq += values[i] * values[i];
  }
  if (!(sq > 0.0)) throw_validation("feature vector '" + image_id + "' has zero norm");
}

FeatureVector compute_descriptor(const RgbImage& image, std::string image_id) {
  if (image.empty()) throw_validation("cannot describe a zero-area image '" + image_id + "'");
  const int w = image.width;
  const int h = image.height;
  const double pixels = static_cast<double>(w) * h;

  FeatureVector out{std::move(image_id), std::vector<double>(kDescriptorDim, 0.0)};
  std::span<double> color(out.values.data(), kColorBlockDim);
  std::span<double> gradient(out.values.data() + kColorBlockDim, kGradientBlockDim);
  std::span<double> stats(out.values.data() + kColorBlockDim + kGradientBlockDim, kStatsBlockDim);

  std::array<double, 3> sum{};
  std::array<double, 3> sum_sq{};
  std::vector<double> gray(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double g = 0.0;
      for (int c = 0; c < 3; ++c) {
        const int v = image.at(x, y, c);
        color[c * kColorBins + (v * kColorBins) / 256] += 1.0;
        const double f = v / 255.0;
        sum[c] += f;
        sum_sq[c] += f * f;
        g += f;
      }
      gray[static_cast<std::size_t>(y) * w + x] = g / 3.0;
    }
  }

  // Central differences with clamped borders; orientation votes are split
  // linearly between the two nearest bins.
  const double bin_width = 2.0 * std::numbers::pi / kOrientationBins;
  for (int y = 0; y < h; ++y) {
    const int ym = std::max(y - 1, 0);
    const int yp = std::min(y + 1, h - 1);
    const int cy = y * kGridCells / h;
    for (int x = 0; x < w; ++x) {
      const int xm = std::max(x - 1, 0);
      const int xp = std::min(x + 1, w - 1);
      const double gx = gray[static_cast<std::size_t>(y) * w + xp] - gray[static_cast<std::size_t>(y) * w + xm];
      const double gy = gray[static_cast<std::size_t>(yp) * w + x] - gray[static_cast<std::size_t>(ym) * w + x];
      const double mag = std::sqrt(gx * gx + gy * gy);
      if (mag == 0.0) continue;
      double angle = std::atan2(gy, gx);
      if (angle < 0.0) angle += 2.0 * std::numbers::pi;
      const double pos = angle / bin_width - 0.5;
      const double lo_f = std::floor(pos);
      const double frac = pos - lo_f;
      const int lo = (static_cast<int>(lo_f) % kOrientationBins + kOrientationBins) % kOrientationBins;
      const int hi = (lo + 1) % kOrientationBins;
      const int cx = x * kGridCells / w;
      const std::size_t cell = static_cast<std::size_t>(cy * kGridCells + cx) * kOrientationBins;
      gradient[cell + lo] += mag * (1.0 - frac);
      gradient[cell + hi] += mag * frac;
    }
  }

  for (int c = 0; c < 3; ++c) {
    const double mean = sum[c] / pixels;
    stats[c] = mean;
    stats[3 + c] = std::max(0.0, sum_sq[c] / pixels - mean * mean);
  }

  normalize_block(color);
  normalize_block(gradient);
  normalize_block(stats);
  return out;
}

FeatureStore compute_descriptors(const Corpus& corpus, int threads) {
  const auto& records = corpus.records();
  std::vector<FeatureVector> computed(records.size());
  parallel_for(records.size(), threads, [&](std::size_t i) {
    computed[i] = compute_descriptor(load_image(corpus, records[i]), records[i].id);
  });
  FeatureStore store;
  for (auto& v : computed) {
    const std::string id = v.image_id;
    store.emplace(id, std::move(v));
  }
  return store;
}

void save_features(const FeatureStore& store, const std::filesystem::path& path) {
  const std::size_t dim = store.empty() ? 0 : store.begin()->second.dim();
  std::ostringstream out;
  out << "SLRF1 " << store.size() << ' ' << dim << '\n';
  char buf[32];
  for (const auto& [id, v] : store) {
    if (v.dim() != dim) throw_validation("feature vector '" + id + "' has dim " + std::to_string(v.dim()) +
                                         ", expected " + std::to_string(dim));
    if (id.find_first_of(" \t\n") != std::string::npos) {
      throw_validation("feature id '" + id + "' contains whitespace");
    }
    out << id;
    for (double x : v.values) {
      std::snprintf(buf, sizeof buf, "%.9g", x);
      out << ' ' << buf;
    }
    out << '\n';
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw_runtime("cannot write feature file " + path.string());
  file << out.str();
  if (!file) throw_runtime("write failed for " + path.string());
}

FeatureStore load_features(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_validation("cannot open feature file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw_validation(path.string() + ": empty feature file");
  std::istringstream header(line);
  std::string magic;
  long long n = -1;
  long long dim = -1;
  header >> magic >> n >> dim;
  if (magic != "SLRF1" || header.fail() || n < 0 || dim < 1) {
    throw_validation(path.string() + ":1: bad header, expected 'SLRF1 <n> <dim>'");
  }
  FeatureStore store;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    std::istringstream row(line);
    FeatureVector v;
    row >> v.image_id;
    std::string token;
    while (row >> token) {
      char* end = nullptr;
      const double x = std::strtod(token.c_str(), &end);
      if (end != token.c_str() + token.size()) throw_validation(where + ": bad number '" + token + "'");
      v.values.push_back(x);
    }
    if (static_cast<long long>(v.dim()) != dim) {
      throw_validation(where + ": vector '" + v.image_id + "' has " + std::to_string(v.dim()) +
                       " entries but the header declares dim=" + std::to_string(dim));
    }
    try {
      v.validate();
    } catch (const Error& e) {
      throw_validation(where + ": " + e.what());
    }
    const std::string id = v.image_id;
    if (!store.emplace(id, std::move(v)).second) throw_validation(where + ": duplicate image id '" + id + "'");
  }
  if (static_cast<long long>(store.size()) != n) {
    throw_validation(path.string() + ": header declares " + std::to_string(n) + " vectors, found " +
                     std::to_string(store.size()));
  }
  return store;
}

void require_features(const FeatureStore& store, std::span<const std::string> ids) {
  std::size_t dim = 0;
  for (const auto& id : ids) {
    const auto it = store.find(id);
    if (it == store.end()) throw_validation("no feature vector for image '" + id + "'");
    if (dim == 0) dim = it->second.dim();
    if (it->second.dim() != dim) {
      throw_validation("feature vector '" + id + "' has dim " + std::to_string(it->second.dim()) +
                       ", expected " + std::to_string(dim));
    }
  }
}

void check_known_ids(const FeatureStore& store, const Corpus& corpus) {
  for (const auto& [id, v] : store) {
    if (!corpus.find(id)) throw_validation("feature file names unknown image_id '" + id + "'");
  }
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw_validation("cosine similarity of vectors with dims " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  }
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (!(na > 0.0) || !(nb > 0.0)) throw_validation("cosine similarity of a zero-norm vector");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

double cosine_similarity(const FeatureVector& a, const FeatureVector& b) {
  try {
    return cosine_similarity(std::span<const double>(a.values), std::span<const double>(b.values));
  } catch (const Error& e) {
    throw_validation("'" + a.image_id + "' vs '" + b.image_id + "': " + e.what());
  }
}

}  // namespace slr
