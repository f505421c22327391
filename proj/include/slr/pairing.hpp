#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "slr/corpus.hpp"
#include "slr/features.hpp"
#include "slr/image.hpp"
#include "slr/oracle.hpp"
#include "slr/pca.hpp"

namespace slr {

struct Pair {
  std::string labeled_id;
  std::string pseudo_id;
  double similarity = 0.0;
  int hop_count = 1;

  friend bool operator==(const Pair&, const Pair&) = default;
};

/// Pairs ordered by labeled_id, then by acceptance order within a seed.
/// pseudo_id values are unique; a labeled_id may repeat.
struct PairSet {
  std::vector<Pair> pairs;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
  /// Throws if a pseudo_id repeats or appears as a labeled_id.
  void validate() const;

  friend bool operator==(const PairSet&, const PairSet&) = default;
};

struct PairingConfig {
  bool use_pca = true;
  int pca_dim = 0;       // 0: default_pca_dim()
  double tau_min = 0.0;  // absolute similarity floor; also AvgSim of an empty match list
};

/// Records eligible for pairing: labeled train seeds and unlabeled
/// candidates, restricted to subjects that own at least one labeled train
/// record. val/test records never take part.
Corpus pairing_corpus(const Corpus& corpus);

/// Vectors used for similarity, keyed by record position in `eligible`.
struct PairingFeatures {
  std::vector<std::vector<double>> vectors;
  int dim = 0;
};

/// Gathers features for every eligible record. With PCA enabled the model
/// is fit once on all of them and each vector is projected.
PairingFeatures prepare_pairing_features(const Corpus& eligible, const FeatureStore& store,
                                         const PairingConfig& config);

struct Match {
  std::string id;
  double similarity = 0.0;
  int hop = 1;
};

/// Per-seed search state of the recursive matcher.
struct SeedState {
  std::vector<Match> matches;  // acceptance order
  std::vector<char> visited;   // by record position
  double similarity_sum = 0.0;

  /// Mean accepted similarity so far, or `empty_value` before any match.
  double avg_sim(double empty_value) const {
    return matches.empty() ? empty_value : similarity_sum / static_cast<double>(matches.size());
  }
};

using MatchState = std::map<std::string, SeedState, std::less<>>;

/// Recursive neighbor matcher over a pairing corpus.
class Matcher {
 public:
  Matcher(const Corpus& eligible, const PairingFeatures& features, double tau_min);

  /// Starts a seed: marks it visited and expands from it.
  void seed(const std::string& seed_id, MatchState& state) const;

  /// For each neighboring day of `ref_id` (earlier day first) picks the
  /// unvisited image most similar to ref. Ties go to the smaller image
  /// index, then the smaller id. The best candidate is accepted when its
  /// similarity is at least both the seed's running average and tau_min;
  /// an accepted match is expanded recursively before the next day.
  void compare(const std::string& seed_id, const std::string& ref_id, MatchState& state) const;

 private:
  void compare_at(const std::string& seed_id, std::size_t ref, int hop, SeedState& seed) const;

  const Corpus& corpus_;
  const PairingFeatures& features_;
  double tau_min_;
};

/// Turns per-seed matches into a PairSet: drops matches that carry labels,
/// then gives each unlabeled image claimed by several seeds to the claim
/// with the highest similarity (ties: smallest seed id).
PairSet resolve_matches(const Corpus& eligible, const MatchState& state);

/// Full label-reuse pairing: eligibility filter, optional PCA, matching
/// from every labeled train image in id order, conflict resolution.
PairSet build_pairs(const Corpus& corpus, const FeatureStore& store, const PairingConfig& config);

/// Matching step only, on precomputed pairing features.
PairSet build_pairs(const Corpus& eligible, const PairingFeatures& features, double tau_min);

/// Baseline: every labeled train image gets `count_per_label` unlabeled
/// images drawn uniformly without replacement from the whole unlabeled
/// pool, so pseudo_ids stay unique. When a store is given, the similarity
/// field holds the true cosine similarity of the raw vectors.
PairSet random_pairs(const Corpus& corpus, int count_per_label, std::uint64_t seed,
                     const FeatureStore* store = nullptr);

struct IouStats {
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
};

struct PairQualityReport {
  std::size_t pairs = 0;
  double same_class_fraction = 0.0;
  IouStats pair_iou;
  /// All pairs of labeled images whose class sets are identical.
  IouStats baseline_iou;
};

IouStats summarize(std::vector<double> values);

/// Scores pairs against ground truth. Pair IoU is the foreground mean IoU
/// of the two true masks; the baseline scores every same-class-set pair
/// among `labeled_ids`.
PairQualityReport evaluate_pairs(const PairSet& pairs, const Oracle& oracle,
                                 std::span<const std::string> labeled_ids);

struct Histogram {
  std::vector<double> edges;    // bins + 1 uniform edges on [0, 1]
  std::vector<double> density;  // mass per bin, sums to 1 when any pair exists
  std::size_t samples = 0;
};

/// Histogram of foreground IoU over all label pairs with identical class
/// sets. Bins are half-open except the last, which includes 1.
Histogram pair_iou_histogram(std::span<const LabelMask> masks, int bins);

/// Pairs file: '#' header lines (config hash, tau_min), then
/// labeled_id, pseudo_id, similarity (6 decimals), hop_count; tab-separated.
void save_pairs(const PairSet& pairs, const std::filesystem::path& path, const std::string& config_hash,
                double tau_min);
PairSet load_pairs(const std::filesystem::path& path);

}  // namespace slr
