#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "slr/eval.hpp"
#include "slr/pairing.hpp"

namespace slr {

/// Row names of the ablation grid, in report order.
const std::vector<std::string>& ablation_rows();

struct RunScore {
  double miou = 0.0;
  double macc = 0.0;
};

/// One ablation row; `scores[s]` belongs to `seeds[s]` of the report and is
/// empty when that run is missing.
struct GridRow {
  std::string run;
  std::vector<std::optional<RunScore>> scores;
};

struct ReportInput {
  std::string config_hash;
  std::vector<std::uint64_t> seeds;
  std::vector<GridRow> grid;       // best-val scores
  std::vector<GridRow> test_grid;  // scores of the best-val checkpoint on test
  std::vector<std::string> class_names;
  std::optional<std::vector<std::optional<double>>> per_class_iou;
  std::optional<PairQualityReport> pair_quality;
  std::optional<PairQualityReport> random_pair_quality;
  std::optional<Histogram> histogram;
};

/// Writes the report files that the input supports:
///   grid.csv            run,miou,macc (mean over seeds; blank when missing)
///   grid_seeds.csv      run,seed,miou,macc
///   grid_test.csv       run,miou,macc on the test split
///   per_class_iou.csv   class,iou
///   pair_iou_histogram.csv  bin_lo,bin_hi,density (+ a .txt bar chart)
///   pair_quality.txt
/// Output bytes depend only on the input.
void emit_report(const ReportInput& input, const std::filesystem::path& out_dir);

/// CSV text for per-class IoU; absent classes print as blank.
std::string per_class_csv(const std::vector<std::string>& class_names,
                          const std::vector<std::optional<double>>& iou);

std::string pair_quality_text(const PairQualityReport& report);

}  // namespace slr
