#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "slr/corpus.hpp"
#include "slr/image.hpp"

namespace slr {

struct FeatureVector {
  std::string image_id;
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
  /// Throws unless every entry is finite and the Euclidean norm is positive.
  void validate() const;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

/// image_id -> vector; ordered so that files and iteration are deterministic.
using FeatureStore = std::map<std::string, FeatureVector, std::less<>>;

// Hand-crafted descriptor layout.
inline constexpr int kColorBins = 16;
inline constexpr int kOrientationBins = 8;
inline constexpr int kGridCells = 4;
inline constexpr int kColorBlockDim = 3 * kColorBins;                                  // 48
inline constexpr int kGradientBlockDim = kOrientationBins * kGridCells * kGridCells;  // 128
inline constexpr int kStatsBlockDim = 6;
inline constexpr int kDescriptorDim = kColorBlockDim + kGradientBlockDim + kStatsBlockDim;  // 182

/// Fixed-length appearance descriptor: per-channel color histograms, a
/// magnitude-weighted gradient orientation histogram over a 4x4 grid, and
/// per-channel mean/variance. Each of the three blocks is L2-normalized on
/// its own; an all-zero block stays zero.
FeatureVector compute_descriptor(const RgbImage& image, std::string image_id = {});

/// Descriptors for every record of the corpus, computed over `threads` workers.
FeatureStore compute_descriptors(const Corpus& corpus, int threads = 1);

/// Feature file: header "SLRF1 <n> <dim>" then n lines "id v1 .. vdim",
/// values printed with 9 significant digits.
void save_features(const FeatureStore& store, const std::filesystem::path& path);
FeatureStore load_features(const std::filesystem::path& path);

/// Checks that every listed id has a vector and all vectors share one dim.
void require_features(const FeatureStore& store, std::span<const std::string> ids);

/// Rejects vectors whose id is not a record of the corpus.
void check_known_ids(const FeatureStore& store, const Corpus& corpus);

/// a.b / (|a||b|), clamped to [-1, 1]. Sums run in index order so results
/// are reproducible bit for bit.
double cosine_similarity(std::span<const double> a, std::span<const double> b);
double cosine_similarity(const FeatureVector& a, const FeatureVector& b);

}  // namespace slr
