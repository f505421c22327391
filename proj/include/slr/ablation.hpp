#pragma once

#include <cstdint>
#include <vector>

#include "slr/config.hpp"
#include "slr/corpus.hpp"
#include "slr/features.hpp"
#include "slr/oracle.hpp"
#include "slr/report.hpp"

namespace slr {

/// Trainer settings of one ablation row (see ablation_rows()).
TrainConfig ablation_row_config(const TrainConfig& base, const std::string& row);

/// Random-pair count per labeled image: the configured value when positive,
/// else the informed pair count spread evenly over labeled images (at
/// least 1, at most what the unlabeled pool allows).
int random_pair_count(const Corpus& corpus, std::size_t informed_pairs, int configured);

/// Builds informed pairs once, then trains every ablation row for every
/// seed. Random pairs are drawn per seed. Pair quality sections are filled
/// when an oracle is given.
ReportInput run_ablation(const Corpus& corpus, const FeatureStore& store, const RunConfig& config,
                         const std::vector<std::uint64_t>& seeds, int threads, const Oracle* oracle = nullptr);

}  // namespace slr
