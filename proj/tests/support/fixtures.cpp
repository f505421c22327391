#include "fixtures.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "slr/rng.hpp"

namespace slr::test {

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

ImageRecord record(std::string id, std::string subject, int day, int index, Split split) {
  ImageRecord r;
  r.id = std::move(id);
  r.subject_id = std::move(subject);
  r.day = day;
  r.index = index;
  r.image_path = "images/" + r.id + ".ppm";
  if (split != Split::unlabeled) r.mask_path = "masks/" + r.id + ".pgm";
  r.split = split;
  return r;
}

RandomPairingCase random_pairing_case(std::uint64_t seed, int max_images, int dim) {
  Rng rng(mix_seed(seed, 0xca5e));
  const int subjects = 1 + static_cast<int>(rng.below(3));
  const int n = 10 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_images - 9)));
  std::vector<ImageRecord> records;
  FeatureStore store;
  std::vector<std::vector<double>> base(subjects, std::vector<double>(dim));
  std::vector<std::vector<double>> drift(subjects, std::vector<double>(dim));
  for (int s = 0; s < subjects; ++s) {
    for (int j = 0; j < dim; ++j) {
      base[s][j] = rng.normal();
      drift[s][j] = rng.normal(0.0, 0.15);
    }
  }
  for (int i = 0; i < n; ++i) {
    const int s = static_cast<int>(rng.below(static_cast<std::uint64_t>(subjects)));
    const int day = 1 + static_cast<int>(rng.below(12));
    const int index = 1 + static_cast<int>(rng.below(4));
    const std::string subject = "subj" + std::to_string(s);
    bool taken = false;
    for (const auto& r : records) taken = taken || (r.subject_id == subject && r.day == day && r.index == index);
    if (taken) continue;
    const double u = rng.uniform();
    const Split split = u < 0.25 ? Split::train : u < 0.8 ? Split::unlabeled : u < 0.9 ? Split::val : Split::test;
    // Ids are deliberately not ordered like (subject, day, index).
    const std::string id = "img" + std::to_string(rng.below(1000)) + "_" + std::to_string(i);
    records.push_back(record(id, subject, day, index, split));
    FeatureVector v{id, std::vector<double>(dim)};
    for (int j = 0; j < dim; ++j) v.values[j] = base[s][j] + drift[s][j] * day + rng.normal(0.0, 0.2);
    store.emplace(id, std::move(v));
  }
  return {Corpus(std::move(records), {"background", "thing"}), std::move(store)};
}

RgbImage smooth_image(int width, int height, std::uint64_t seed) {
  Rng rng(seed);
  const double cx = rng.uniform(0.3, 0.7) * width;
  const double cy = rng.uniform(0.3, 0.7) * height;
  const double r = 0.25 * std::min(width, height);
  RgbImage img(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const bool in = std::hypot(x - cx, y - cy) < r;
      img.at(x, y, 0) = static_cast<std::uint8_t>(in ? 200 : 40 + 2 * x);
      img.at(x, y, 1) = static_cast<std::uint8_t>(in ? 80 : 60 + y);
      img.at(x, y, 2) = static_cast<std::uint8_t>(in ? 60 : 120 + (x + y) / 2);
    }
  }
  return img;
}

}  // namespace slr::test
