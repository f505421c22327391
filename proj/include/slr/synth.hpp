#pragma once

#include <cstdint>
#include <filesystem>

#include "slr/corpus.hpp"
#include "slr/image.hpp"
#include "slr/oracle.hpp"

namespace slr {

struct SynthConfig {
  int subjects = 5;
  int days = 20;
  int images_per_day = 2;
  int classes = 3;
  int size = 64;
  double evolution_rate = 0.15;  // per-day change magnitude in [0, 1]
  double label_fraction = 0.1;   // share of train images that keep masks, in (0, 1]
  double noise_level = 0.25;     // background texture amplitude in [0, 1]
  std::uint64_t seed = 1;

  void validate() const;
};

struct SynthFrame {
  RgbImage image;
  LabelMask mask;
};

/// Photographed days of one subject: starts at 1, gaps of 1 to 3 days.
std::vector<int> synth_days(const SynthConfig& config, int subject);

/// Renders one image. `subject` and `view` are zero-based; `view` doubles as
/// the image index within a day. Each view looks at the subject's blobs from
/// its own layout, and views after the first hide one blob, so views differ
/// in class set. Blobs shrink, fade and wander as days pass, scaled by
/// evolution_rate; at rate 0 a view renders identically on every day.
SynthFrame render_synth(const SynthConfig& config, int subject, int view, int day);

struct SynthOutput {
  Corpus corpus;
  Oracle oracle;
  std::filesystem::path manifest_path;
  std::filesystem::path oracle_path;
};

/// Writes images/, masks/, manifest.tsv and oracle.tsv under out_dir.
/// Splits are drawn 60/20/20 per subject; round(label_fraction * train)
/// train images (at least one) keep their masks and the rest become
/// unlabeled.
SynthOutput generate(const SynthConfig& config, const std::filesystem::path& out_dir);

}  // namespace slr
