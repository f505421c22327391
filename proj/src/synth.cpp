#include "slr/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "slr/error.hpp"
#include "slr/rng.hpp"

namespace slr {
namespace {

constexpr std::array<std::array<double, 3>, 6> kPalette = {{
    {200, 60, 50}, {60, 170, 70}, {60, 90, 210}, {220, 200, 60}, {180, 70, 190}, {60, 190, 190}}};
constexpr std::array<double, 3> kDecayColor = {115, 95, 70};

enum class Shape { ellipse, box, diamond };

struct Blob {
  Shape shape;
  double cx, cy;    // pixels
  double rx, ry;    // half extents in pixels
  double angle;     // radians
  std::array<double, 3> color;
  double phase_x, phase_y, phase_a;  // drift phases
};

std::uint64_t stream(const SynthConfig& c, std::uint64_t a, std::uint64_t b = 0, std::uint64_t d = 0) {
  return mix_seed(mix_seed(mix_seed(c.seed, a), b), d);
}

std::string class_name(int c) {
  static const char* kNames[] = {"ellipse", "box", "diamond"};
  std::string name = kNames[(c - 1) % 3];
  if (c > 3) name += std::to_string((c - 1) / 3 + 1);
  return name;
}

// Blob parameters shared by every view of a subject (colors, shapes, phases)
// plus the view's own layout.
std::vector<Blob> layout(const SynthConfig& config, int subject, int view) {
  Rng subject_rng(stream(config, 1, static_cast<std::uint64_t>(subject)));
  Rng view_rng(stream(config, 2, static_cast<std::uint64_t>(subject), static_cast<std::uint64_t>(view)));
  const double s = config.size;
  const int blobs = config.classes - 1;
  const double turn = view_rng.uniform(0.0, 2.0 * std::numbers::pi);
  std::vector<Blob> out;
  for (int c = 1; c <= blobs; ++c) {
    Blob b{};
    b.shape = static_cast<Shape>((c - 1) % 3);
    const auto& base = kPalette[static_cast<std::size_t>(c - 1) % kPalette.size()];
    for (int k = 0; k < 3; ++k) b.color[k] = std::clamp(base[k] + subject_rng.normal(0.0, 18.0), 20.0, 235.0);
    b.phase_x = subject_rng.uniform(0.0, 2.0 * std::numbers::pi);
    b.phase_y = subject_rng.uniform(0.0, 2.0 * std::numbers::pi);
    b.phase_a = subject_rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double sector = turn + 2.0 * std::numbers::pi * (c - 1) / blobs + view_rng.uniform(-0.3, 0.3);
    const double dist = (blobs == 1 ? 0.0 : 0.22) * s + view_rng.uniform(-0.03, 0.03) * s;
    b.cx = 0.5 * s + dist * std::cos(sector);
    b.cy = 0.5 * s + dist * std::sin(sector);
    b.rx = view_rng.uniform(0.12, 0.19) * s;
    b.ry = view_rng.uniform(0.12, 0.19) * s;
    b.angle = view_rng.uniform(0.0, std::numbers::pi);
    out.push_back(b);
  }
  return out;
}

bool inside(const Blob& b, double x, double y) {
  const double dx = x - b.cx;
  const double dy = y - b.cy;
  const double ca = std::cos(b.angle);
  const double sa = std::sin(b.angle);
  const double u = (ca * dx + sa * dy) / b.rx;
  const double v = (-sa * dx + ca * dy) / b.ry;
  switch (b.shape) {
    case Shape::ellipse:
      return u * u + v * v <= 1.0;
    case Shape::box:
      return std::abs(u) <= 0.85 && std::abs(v) <= 0.85;
    case Shape::diamond:
      return std::abs(u) + std::abs(v) <= 1.15;
  }
  return false;
}

// Smooth value noise in [-1, 1] on a coarse lattice, bilinearly interpolated.
std::vector<double> value_noise(int size, int cells, Rng& rng) {
  std::vector<double> lattice(static_cast<std::size_t>(cells + 1) * (cells + 1));
  for (double& v : lattice) v = rng.uniform(-1.0, 1.0);
  std::vector<double> out(static_cast<std::size_t>(size) * size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double fx = static_cast<double>(x) * cells / size;
      const double fy = static_cast<double>(y) * cells / size;
      const int ix = static_cast<int>(fx);
      const int iy = static_cast<int>(fy);
      const double tx = fx - ix;
      const double ty = fy - iy;
      auto at = [&](int i, int j) { return lattice[static_cast<std::size_t>(j) * (cells + 1) + i]; };
      const double top = at(ix, iy) * (1 - tx) + at(ix + 1, iy) * tx;
      const double bottom = at(ix, iy + 1) * (1 - tx) + at(ix + 1, iy + 1) * tx;
      out[static_cast<std::size_t>(y) * size + x] = top * (1 - ty) + bottom * ty;
    }
  }
  return out;
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

void SynthConfig::validate() const {
  if (subjects < 1) throw_validation("synth: subjects must be >= 1");
  if (days < 1) throw_validation("synth: days must be >= 1");
  if (images_per_day < 1) throw_validation("synth: images_per_day must be >= 1");
  if (classes < 2) throw_validation("synth: classes must be >= 2, got " + std::to_string(classes));
  if (classes > 255) throw_validation("synth: classes must be <= 255");
  if (size < 8) throw_validation("synth: size must be >= 8");
  if (!(evolution_rate >= 0.0 && evolution_rate <= 1.0)) throw_validation("synth: evolution_rate must be in [0, 1]");
  if (!(label_fraction > 0.0 && label_fraction <= 1.0)) throw_validation("synth: label_fraction must be in (0, 1]");
  if (!(noise_level >= 0.0 && noise_level <= 1.0)) throw_validation("synth: noise_level must be in [0, 1]");
}

std::vector<int> synth_days(const SynthConfig& config, int subject) {
  Rng rng(stream(config, 3, static_cast<std::uint64_t>(subject)));
  std::vector<int> days{1};
  while (static_cast<int>(days.size()) < config.days) {
    days.push_back(days.back() + 1 + static_cast<int>(rng.below(3)));
  }
  return days;
}

SynthFrame render_synth(const SynthConfig& config, int subject, int view, int day) {
  config.validate();
  const int s = config.size;
  const double rate = config.evolution_rate;
  const double t = day - 1;

  Rng bg_rng(stream(config, 4, static_cast<std::uint64_t>(subject), static_cast<std::uint64_t>(view)));
  std::array<double, 3> bg{};
  {
    Rng subject_rng(stream(config, 5, static_cast<std::uint64_t>(subject)));
    const double gray = subject_rng.uniform(110.0, 170.0);
    for (int k = 0; k < 3; ++k) bg[k] = gray + subject_rng.normal(0.0, 12.0);
    // Each view faces a differently lit backdrop.
    const double spread = config.images_per_day > 1 ? 2.0 * view / (config.images_per_day - 1) - 1.0 : 0.0;
    const double hue = 2.0 * std::numbers::pi * view / config.images_per_day;
    for (int k = 0; k < 3; ++k) {
      bg[k] += 35.0 * spread + 15.0 * std::cos(hue + 2.0 * std::numbers::pi * k / 3.0) + bg_rng.normal(0.0, 6.0);
    }
  }
  const std::vector<double> coarse = value_noise(s, 4, bg_rng);
  const std::vector<double> fine = value_noise(s, 16, bg_rng);

  // Lighting differs a little from day to day; the same for every view.
  Rng light_rng(stream(config, 6, static_cast<std::uint64_t>(subject), static_cast<std::uint64_t>(day)));
  const double light = rate * light_rng.normal(0.0, 20.0);

  std::vector<Blob> blobs = layout(config, subject, view);
  const double shrink = std::max(0.45, std::exp(-rate * 0.04 * t));
  const double fade = 1.0 - std::exp(-rate * 0.06 * t);
  const double wander = rate * 0.5 * s;
  for (auto& b : blobs) {
    b.cx += wander * (std::sin(0.08 * t + b.phase_x) - std::sin(b.phase_x));
    b.cy += wander * (std::sin(0.08 * t + b.phase_y) - std::sin(b.phase_y));
    const double aspect = 1.0 + rate * 0.6 * (std::sin(0.1 * t + b.phase_a) - std::sin(b.phase_a));
    b.rx *= shrink * aspect;
    b.ry *= shrink / aspect;
    b.angle += rate * 0.02 * t;
    for (int k = 0; k < 3; ++k) b.color[k] = b.color[k] * (1.0 - fade) + kDecayColor[k] * fade;
  }
  const int hidden = view == 0 || config.classes == 2 ? -1 : (view - 1) % (config.classes - 1) + 1;

  SynthFrame frame{RgbImage(s, s), LabelMask(s, s, config.classes)};
  const double amp = config.noise_level * 255.0;
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * s + x;
      const double texture = amp * (0.6 * coarse[p] + 0.4 * fine[p]);
      int label = 0;
      for (std::size_t c = 0; c < blobs.size(); ++c) {
        if (static_cast<int>(c) + 1 == hidden) continue;
        if (inside(blobs[c], x + 0.5, y + 0.5)) label = static_cast<int>(c) + 1;
      }
      frame.mask.at(x, y) = static_cast<std::uint8_t>(label);
      for (int k = 0; k < 3; ++k) {
        const double v = label == 0 ? bg[k] + texture : blobs[static_cast<std::size_t>(label - 1)].color[k] + 0.25 * texture;
        frame.image.at(x, y, k) = to_byte(v + light);
      }
    }
  }
  return frame;
}

SynthOutput generate(const SynthConfig& config, const std::filesystem::path& out_dir) {
  config.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (!ec) std::filesystem::create_directories(out_dir / "masks", ec);
  if (ec) throw_runtime("cannot create output directory " + out_dir.string() + ": " + ec.message());

  std::vector<std::string> class_names{"background"};
  for (int c = 1; c < config.classes; ++c) class_names.push_back(class_name(c));

  std::vector<ImageRecord> records;
  std::map<std::string, OracleEntry, std::less<>> entries;
  for (int subject = 0; subject < config.subjects; ++subject) {
    char subject_id[32];
    std::snprintf(subject_id, sizeof subject_id, "s%02d", subject + 1);
    const std::vector<int> days = synth_days(config, subject);

    // Splits per subject: shuffle, then 60/20/20, then label a share of train.
    const std::size_t n = days.size() * static_cast<std::size_t>(config.images_per_day);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng split_rng(stream(config, 7, static_cast<std::uint64_t>(subject)));
    split_rng.shuffle(std::span<std::size_t>(order));
    const auto n_train = static_cast<std::size_t>(std::lround(0.6 * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::lround(0.2 * static_cast<double>(n)));
    const auto n_labeled = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(config.label_fraction * static_cast<double>(n_train))));
    std::vector<Split> split_of(n);
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t i = order[r];
      if (r < n_train) {
        split_of[i] = r < std::min(n_labeled, n_train) ? Split::train : Split::unlabeled;
      } else {
        split_of[i] = r < n_train + n_val ? Split::val : Split::test;
      }
    }
    if (n_train == 0) split_of[order[0]] = Split::train;

    for (std::size_t d = 0; d < days.size(); ++d) {
      for (int view = 0; view < config.images_per_day; ++view) {
        const std::size_t i = d * static_cast<std::size_t>(config.images_per_day) + static_cast<std::size_t>(view);
        char id[64];
        std::snprintf(id, sizeof id, "%s_d%03d_n%d", subject_id, days[d], view + 1);
        const SynthFrame frame = render_synth(config, subject, view, days[d]);
        const std::string image_path = std::string("images/") + id + ".ppm";
        const std::string mask_path = std::string("masks/") + id + ".pgm";
        write_ppm(out_dir / image_path, frame.image);
        write_mask(out_dir / mask_path, frame.mask);

        ImageRecord r{id, subject_id, days[d], view + 1, image_path, std::nullopt, split_of[i]};
        if (r.split != Split::unlabeled) r.mask_path = mask_path;
        OracleEntry e{r, frame.mask, class_set(frame.mask)};
        e.record.mask_path = mask_path;
        entries.emplace(id, std::move(e));
        records.push_back(std::move(r));
      }
    }
  }

  SynthOutput out;
  out.corpus = Corpus(std::move(records), class_names, out_dir);
  out.oracle = Oracle(class_names, std::move(entries));
  out.manifest_path = out_dir / "manifest.tsv";
  out.oracle_path = out_dir / "oracle.tsv";
  save_manifest(out.corpus, out.manifest_path);
  save_oracle(out.oracle, out.oracle_path);
  return out;
}

}  // namespace slr
