#include "slr/pairing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>

#include "slr/error.hpp"
#include "slr/eval.hpp"
#include "slr/log.hpp"
#include "slr/rng.hpp"

namespace slr {

void PairSet::validate() const {
  std::set<std::string_view> pseudo;
  std::set<std::string_view> labeled;
  for (const auto& p : pairs) {
    if (!pseudo.insert(p.pseudo_id).second) throw_validation("pseudo_id '" + p.pseudo_id + "' is paired twice");
    labeled.insert(p.labeled_id);
    if (p.hop_count < 1) throw_validation("pair (" + p.labeled_id + ", " + p.pseudo_id + ") has hop_count < 1");
  }
  for (auto id : pseudo) {
    if (labeled.count(id)) throw_validation("image '" + std::string(id) + "' is both labeled and pseudo-labeled");
  }
}

Corpus pairing_corpus(const Corpus& corpus) {
  std::set<std::string, std::less<>> labeled_subjects;
  for (const auto& r : corpus.records()) {
    if (r.is_labeled_train()) labeled_subjects.insert(r.subject_id);
  }
  return corpus.filtered([&](const ImageRecord& r) {
    return (r.split == Split::train || r.split == Split::unlabeled) && labeled_subjects.count(r.subject_id) > 0;
  });
}

PairingFeatures prepare_pairing_features(const Corpus& eligible, const FeatureStore& store,
                                         const PairingConfig& config) {
  std::vector<std::string> ids;
  ids.reserve(eligible.size());
  for (const auto& r : eligible.records()) ids.push_back(r.id);
  require_features(store, ids);

  PairingFeatures out;
  out.vectors.reserve(ids.size());
  if (ids.empty()) return out;
  const int d = static_cast<int>(store.find(ids.front())->second.dim());
  const int n = static_cast<int>(ids.size());

  if (!config.use_pca || n < 2) {
    if (config.use_pca) log_warn("pairing: fewer than 2 eligible images, PCA skipped");
    for (const auto& id : ids) out.vectors.push_back(store.find(id)->second.values);
    out.dim = d;
    return out;
  }

  int k = config.pca_dim > 0 ? std::min({config.pca_dim, n - 1, d}) : default_pca_dim(d, n);
  if (config.pca_dim > 0 && k != config.pca_dim) {
    log_warn("pairing: PCA dim clamped from " + std::to_string(config.pca_dim) + " to " + std::to_string(k));
  }
  Eigen::MatrixXd data(n, d);
  for (int i = 0; i < n; ++i) {
    data.row(i) = Eigen::Map<const Eigen::RowVectorXd>(store.find(ids[i])->second.values.data(), d);
  }
  const PcaModel model = fit_pca(data, k);
  const Eigen::MatrixXd reduced = (data.rowwise() - model.mean.transpose()) * model.components.transpose();
  for (int i = 0; i < n; ++i) {
    auto& v = out.vectors.emplace_back(k);
    for (int j = 0; j < k; ++j) v[j] = reduced(i, j);
  }
  out.dim = k;
  return out;
}

Matcher::Matcher(const Corpus& eligible, const PairingFeatures& features, double tau_min)
    : corpus_(eligible), features_(features), tau_min_(tau_min) {
  if (features.vectors.size() != eligible.size()) {
    throw_validation("pairing features cover " + std::to_string(features.vectors.size()) + " of " +
                     std::to_string(eligible.size()) + " images");
  }
}

void Matcher::seed(const std::string& seed_id, MatchState& state) const {
  const std::size_t pos = corpus_.position(seed_id);
  SeedState& s = state[seed_id];
  s.visited.assign(corpus_.size(), 0);
  s.visited[pos] = 1;
  compare_at(seed_id, pos, 0, s);
}

void Matcher::compare(const std::string& seed_id, const std::string& ref_id, MatchState& state) const {
  const auto it = state.find(seed_id);
  if (it == state.end()) throw_validation("compare called for unknown seed '" + seed_id + "'");
  SeedState& s = it->second;
  const std::size_t ref = corpus_.position(ref_id);
  if (!s.visited[ref]) throw_validation("compare reference '" + ref_id + "' was never visited by its seed");
  int hop = 0;
  for (const auto& m : s.matches) {
    if (m.id == ref_id) hop = m.hop;
  }
  compare_at(seed_id, ref, hop, s);
}

void Matcher::compare_at(const std::string& seed_id, std::size_t ref, int hop, SeedState& seed) const {
  const ImageRecord& ref_record = corpus_.records()[ref];
  const std::vector<double>& ref_vec = features_.vectors[ref];
  for (int day : corpus_.neighboring_days(ref_record.subject_id, ref_record.day)) {
    std::size_t best = std::numeric_limits<std::size_t>::max();
    double best_sim = -std::numeric_limits<double>::infinity();
    for (std::size_t candidate : corpus_.images_on(ref_record.subject_id, day)) {
      if (seed.visited[candidate]) continue;
      const double s = cosine_similarity(ref_vec, features_.vectors[candidate]);
      if (s > best_sim) {
        best_sim = s;
        best = candidate;
      }
    }
    if (best == std::numeric_limits<std::size_t>::max()) continue;
    if (best_sim >= seed.avg_sim(tau_min_) && best_sim >= tau_min_) {
      seed.matches.push_back(Match{corpus_.records()[best].id, best_sim, hop + 1});
      seed.similarity_sum += best_sim;
      seed.visited[best] = 1;
      compare_at(seed_id, best, hop + 1, seed);
    }
  }
}

PairSet resolve_matches(const Corpus& eligible, const MatchState& state) {
  struct Claim {
    double similarity;
    std::string_view seed;
  };
  std::unordered_map<std::string_view, Claim> winners;
  for (const auto& [seed_id, s] : state) {
    for (const auto& m : s.matches) {
      if (eligible.at(m.id).has_mask()) continue;
      auto [it, inserted] = winners.try_emplace(m.id, Claim{m.similarity, seed_id});
      if (!inserted && m.similarity > it->second.similarity) it->second = Claim{m.similarity, seed_id};
    }
  }
  PairSet out;
  for (const auto& [seed_id, s] : state) {
    for (const auto& m : s.matches) {
      const auto it = winners.find(m.id);
      if (it == winners.end() || it->second.seed != seed_id) continue;
      out.pairs.push_back(Pair{seed_id, m.id, m.similarity, m.hop});
    }
  }
  return out;
}

PairSet build_pairs(const Corpus& eligible, const PairingFeatures& features, double tau_min) {
  const Matcher matcher(eligible, features, tau_min);
  std::vector<std::string> seeds;
  for (const auto& r : eligible.records()) {
    if (r.is_labeled_train()) seeds.push_back(r.id);
  }
  std::sort(seeds.begin(), seeds.end());
  MatchState state;
  for (const auto& id : seeds) matcher.seed(id, state);
  PairSet pairs = resolve_matches(eligible, state);
  if (pairs.empty()) log_info("pairing produced no pairs");
  return pairs;
}

PairSet build_pairs(const Corpus& corpus, const FeatureStore& store, const PairingConfig& config) {
  const Corpus eligible = pairing_corpus(corpus);
  if (eligible.empty()) throw_validation("pairing needs at least one labeled train image");
  const PairingFeatures features = prepare_pairing_features(eligible, store, config);
  return build_pairs(eligible, features, config.tau_min);
}

PairSet random_pairs(const Corpus& corpus, int count_per_label, std::uint64_t seed, const FeatureStore* store) {
  if (count_per_label < 1) throw_validation("random pairing needs count_per_label >= 1");
  std::vector<std::string> labeled;
  std::vector<std::string> pool;
  for (const auto& r : corpus.records()) {
    if (r.is_labeled_train()) labeled.push_back(r.id);
    if (r.split == Split::unlabeled) pool.push_back(r.id);
  }
  if (pool.empty()) throw_validation("random pairing needs at least one unlabeled image");
  std::sort(labeled.begin(), labeled.end());
  std::sort(pool.begin(), pool.end());
  const std::size_t needed = labeled.size() * static_cast<std::size_t>(count_per_label);
  if (needed > pool.size()) {
    throw_validation("random pairing needs " + std::to_string(needed) + " unlabeled images but the pool has " +
                     std::to_string(pool.size()));
  }
  Rng rng(seed);
  rng.shuffle(std::span<std::string>(pool));
  PairSet out;
  std::size_t next = 0;
  for (const auto& l : labeled) {
    for (int c = 0; c < count_per_label; ++c) {
      const std::string& u = pool[next++];
      double sim = 0.0;
      if (store) {
        const auto a = store->find(l);
        const auto b = store->find(u);
        if (a == store->end() || b == store->end()) {
          throw_validation("no feature vector for '" + (a == store->end() ? l : u) + "'");
        }
        sim = cosine_similarity(a->second, b->second);
      }
      out.pairs.push_back(Pair{l, u, sim, 1});
    }
  }
  return out;
}

IouStats summarize(std::vector<double> values) {
  IouStats s;
  s.count = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  s.median = values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
  return s;
}

PairQualityReport evaluate_pairs(const PairSet& pairs, const Oracle& oracle,
                                 std::span<const std::string> labeled_ids) {
  PairQualityReport report;
  report.pairs = pairs.size();
  std::vector<double> ious;
  std::size_t same = 0;
  for (const auto& p : pairs.pairs) {
    const OracleEntry& a = oracle_lookup(oracle, p.labeled_id);
    const OracleEntry& b = oracle_lookup(oracle, p.pseudo_id);
    if (a.classes == b.classes) ++same;
    ious.push_back(foreground_iou(a.mask, b.mask));
  }
  report.same_class_fraction = pairs.empty() ? 0.0 : static_cast<double>(same) / static_cast<double>(pairs.size());
  report.pair_iou = summarize(std::move(ious));

  std::vector<const OracleEntry*> labeled;
  for (const auto& id : labeled_ids) labeled.push_back(&oracle_lookup(oracle, id));
  std::vector<double> baseline;
  for (std::size_t i = 0; i < labeled.size(); ++i) {
    for (std::size_t j = i + 1; j < labeled.size(); ++j) {
      if (labeled[i]->classes != labeled[j]->classes) continue;
      baseline.push_back(foreground_iou(labeled[i]->mask, labeled[j]->mask));
    }
  }
  report.baseline_iou = summarize(std::move(baseline));
  return report;
}

Histogram pair_iou_histogram(std::span<const LabelMask> masks, int bins) {
  if (bins < 1) throw_validation("histogram needs at least one bin");
  if (masks.size() < 2) throw_validation("pair IoU histogram needs at least 2 masks");
  Histogram h;
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) h.edges[i] = static_cast<double>(i) / bins;
  std::vector<std::size_t> counts(bins, 0);
  std::vector<std::set<int>> sets;
  for (const auto& m : masks) sets.push_back(class_set(m));
  for (std::size_t i = 0; i < masks.size(); ++i) {
    for (std::size_t j = i + 1; j < masks.size(); ++j) {
      if (sets[i] != sets[j]) continue;
      const double iou = foreground_iou(masks[i], masks[j]);
      const int bin = std::min(bins - 1, static_cast<int>(std::floor(iou * bins)));
      ++counts[bin];
      ++h.samples;
    }
  }
  h.density.assign(bins, 0.0);
  if (h.samples > 0) {
    for (int i = 0; i < bins; ++i) h.density[i] = static_cast<double>(counts[i]) / static_cast<double>(h.samples);
  }
  return h;
}

void save_pairs(const PairSet& pairs, const std::filesystem::path& path, const std::string& config_hash,
                double tau_min) {
  std::ostringstream out;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", tau_min);
  out << "# slr pairs v1\tconfig_hash=" << config_hash << "\ttau_min=" << buf << '\n';
  out << "# labeled_id\tpseudo_id\tsimilarity\thop_count\n";
  for (const auto& p : pairs.pairs) {
    std::snprintf(buf, sizeof buf, "%.6f", p.similarity);
    out << p.labeled_id << '\t' << p.pseudo_id << '\t' << buf << '\t' << p.hop_count << '\n';
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw_runtime("cannot write pairs file " + path.string());
  file << out.str();
  if (!file) throw_runtime("write failed for " + path.string());
}

PairSet load_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_validation("cannot open pairs file " + path.string());
  PairSet out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    std::istringstream row(line);
    Pair p;
    std::string sim;
    std::string hop;
    if (!std::getline(row, p.labeled_id, '\t') || !std::getline(row, p.pseudo_id, '\t') ||
        !std::getline(row, sim, '\t') || !std::getline(row, hop)) {
      throw_validation(where + ": expected 4 tab-separated fields");
    }
    try {
      std::size_t used = 0;
      p.similarity = std::stod(sim, &used);
      if (used != sim.size()) throw std::invalid_argument(sim);
      p.hop_count = std::stoi(hop, &used);
      if (used != hop.size()) throw std::invalid_argument(hop);
    } catch (const std::exception&) {
      throw_validation(where + ": bad similarity or hop_count");
    }
    out.pairs.push_back(std::move(p));
  }
  out.validate();
  return out;
}

}  // namespace slr
