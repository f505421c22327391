#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "slr/corpus.hpp"
#include "slr/features.hpp"
#include "slr/image.hpp"

namespace slr::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "slr");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

ImageRecord record(std::string id, std::string subject, int day, int index, Split split);

/// In-memory corpus of `n <= max_images` records over a few subjects with
/// random days and splits, plus features that drift smoothly with the day
/// so recursive matching finds chains.
struct RandomPairingCase {
  Corpus corpus;
  FeatureStore store;
};
RandomPairingCase random_pairing_case(std::uint64_t seed, int max_images = 50, int dim = 8);

/// Smooth test image: gradients plus a disc.
RgbImage smooth_image(int width, int height, std::uint64_t seed);

}  // namespace slr::test
