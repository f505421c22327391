#include "slr/report.hpp"

#include <cstdio>
#include <fstream>

#include "slr/error.hpp"

namespace slr {
namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_runtime("cannot write " + path.string());
  out << text;
  if (!out) throw_runtime("write failed for " + path.string());
}

std::string grid_csv(const std::vector<GridRow>& grid) {
  std::string out = "run,miou,macc\n";
  for (const auto& row : grid) {
    double miou = 0.0;
    double macc = 0.0;
    std::size_t n = 0;
    bool complete = !row.scores.empty();
    for (const auto& s : row.scores) {
      if (!s) {
        complete = false;
        continue;
      }
      miou += s->miou;
      macc += s->macc;
      ++n;
    }
    // Partial rows are left blank rather than averaged over fewer seeds.
    if (complete && n > 0) {
      out += row.run + "," + num(miou / static_cast<double>(n)) + "," + num(macc / static_cast<double>(n)) + "\n";
    } else {
      out += row.run + ",,\n";
    }
  }
  return out;
}

std::string seeds_csv(const std::vector<GridRow>& grid, const std::vector<std::uint64_t>& seeds) {
  std::string out = "run,seed,miou,macc\n";
  for (const auto& row : grid) {
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const auto& score = s < row.scores.size() ? row.scores[s] : std::nullopt;
      out += row.run + "," + std::to_string(seeds[s]) + ",";
      out += score ? num(score->miou) + "," + num(score->macc) + "\n" : ",\n";
    }
  }
  return out;
}

std::string histogram_text(const Histogram& h) {
  std::string out;
  for (std::size_t b = 0; b < h.density.size(); ++b) {
    char label[48];
    std::snprintf(label, sizeof label, "[%.2f, %.2f%c ", h.edges[b], h.edges[b + 1],
                  b + 1 == h.density.size() ? ']' : ')');
    out += label;
    out += std::string(static_cast<std::size_t>(h.density[b] * 50.0 + 0.5), '#');
    out += " " + num(h.density[b]) + "\n";
  }
  out += "samples " + std::to_string(h.samples) + "\n";
  return out;
}

}  // namespace

const std::vector<std::string>& ablation_rows() {
  static const std::vector<std::string> kRows = {"supervised",         "pairs",  "pairs+eta", "pairs+lambda",
                                                 "pairs+eta+lambda", "random"};
  return kRows;
}

std::string per_class_csv(const std::vector<std::string>& class_names,
                          const std::vector<std::optional<double>>& iou) {
  std::string out = "class,iou\n";
  for (std::size_t c = 0; c < iou.size(); ++c) {
    out += (c < class_names.size() ? class_names[c] : std::to_string(c)) + ",";
    out += iou[c] ? num(*iou[c]) + "\n" : "\n";
  }
  return out;
}

std::string pair_quality_text(const PairQualityReport& r) {
  std::string out;
  out += "pairs " + std::to_string(r.pairs) + "\n";
  out += "same_class_fraction " + num(r.same_class_fraction) + "\n";
  out += "pair_iou_mean " + num(r.pair_iou.mean) + "\n";
  out += "pair_iou_median " + num(r.pair_iou.median) + "\n";
  out += "baseline_pairs " + std::to_string(r.baseline_iou.count) + "\n";
  out += "baseline_iou_mean " + num(r.baseline_iou.mean) + "\n";
  out += "baseline_iou_median " + num(r.baseline_iou.median) + "\n";
  return out;
}

void emit_report(const ReportInput& input, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw_runtime("cannot create report directory " + out_dir.string() + ": " + ec.message());

  if (!input.grid.empty()) {
    write_text(out_dir / "grid.csv", grid_csv(input.grid));
    write_text(out_dir / "grid_seeds.csv", seeds_csv(input.grid, input.seeds));
  }
  if (!input.test_grid.empty()) write_text(out_dir / "grid_test.csv", grid_csv(input.test_grid));
  if (input.per_class_iou) {
    write_text(out_dir / "per_class_iou.csv", per_class_csv(input.class_names, *input.per_class_iou));
  }
  if (input.histogram) {
    std::string csv = "bin_lo,bin_hi,density\n";
    for (std::size_t b = 0; b < input.histogram->density.size(); ++b) {
      csv += num(input.histogram->edges[b]) + "," + num(input.histogram->edges[b + 1]) + "," +
             num(input.histogram->density[b]) + "\n";
    }
    write_text(out_dir / "pair_iou_histogram.csv", csv);
    write_text(out_dir / "pair_iou_histogram.txt", histogram_text(*input.histogram));
  }
  if (input.pair_quality || input.random_pair_quality) {
    std::string text = "config_hash " + input.config_hash + "\n";
    if (input.pair_quality) text += "[informed]\n" + pair_quality_text(*input.pair_quality);
    if (input.random_pair_quality) text += "[random]\n" + pair_quality_text(*input.random_pair_quality);
    write_text(out_dir / "pair_quality.txt", text);
  }
}

}  // namespace slr
