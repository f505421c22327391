#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "slr/image.hpp"

namespace slr {

enum class Split { train, val, test, unlabeled };

std::string_view to_string(Split split);
/// Throws a validation error for anything other than the four split names.
Split parse_split(std::string_view text);

struct ImageRecord {
  std::string id;
  std::string subject_id;
  int day = 0;
  int index = 0;
  std::string image_path;
  std::optional<std::string> mask_path;
  Split split = Split::unlabeled;

  bool has_mask() const { return mask_path.has_value(); }
  bool is_labeled_train() const { return split == Split::train && mask_path.has_value(); }

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

/// An indexed, immutable collection of image records.
///
/// Construction checks the structural invariants: unique ids, unique
/// (subject, day, index) keys, positive day/index, masks present exactly
/// for labeled splits, and at least two class names with class 0 being
/// background. File contents are checked separately by validate_files().
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<ImageRecord> records, std::vector<std::string> class_names,
         std::filesystem::path root = {});

  const std::vector<ImageRecord>& records() const { return records_; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  int num_classes() const { return static_cast<int>(class_names_.size()); }
  const std::filesystem::path& root() const { return root_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  /// Relative paths resolve against the directory the manifest lives in.
  std::filesystem::path resolve(const std::string& path) const;

  const ImageRecord* find(std::string_view id) const;
  const ImageRecord& at(std::string_view id) const;
  std::size_t position(std::string_view id) const;

  /// Subjects in sorted order.
  std::vector<std::string> subjects() const;
  bool has_subject(std::string_view subject) const;
  /// Sorted distinct photographed days of a subject.
  const std::vector<int>& days(std::string_view subject) const;
  /// Record positions photographed on (subject, day), ordered by image index.
  std::span<const std::size_t> images_on(std::string_view subject, int day) const;

  /// Immediately preceding and following photographed days, by position in
  /// the sorted day list (0, 1 or 2 entries, ascending).
  std::vector<int> neighboring_days(std::string_view subject, int day) const;

  Corpus filtered(const std::function<bool(const ImageRecord&)>& keep) const;

  friend bool operator==(const Corpus& a, const Corpus& b) {
    return a.records_ == b.records_ && a.class_names_ == b.class_names_;
  }

 private:
  struct SubjectIndex {
    std::vector<int> days;
    std::map<int, std::vector<std::size_t>> by_day;
  };

  void build_index();

  std::vector<ImageRecord> records_;
  std::vector<std::string> class_names_;
  std::filesystem::path root_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::map<std::string, SubjectIndex, std::less<>> subjects_;
};

struct ManifestOptions {
  /// Open and parse every referenced image and mask.
  bool check_files = true;
};

/// Parses a tab-separated manifest:
///   id  subject_id  day  index  image_path  mask_path_or_dash  split
/// Lines starting with '#' are comments; a "#classes" comment line carries
/// the tab-separated class names. Without it, class names are inferred from
/// the largest mask value.
Corpus load_manifest(const std::filesystem::path& path, ManifestOptions options = {});

/// Writes records in corpus order. Paths are written verbatim.
void save_manifest(const Corpus& corpus, const std::filesystem::path& path);

/// Opens every image and mask, checking that masks parse, hold valid class
/// indices and match their image's dimensions.
void validate_files(const Corpus& corpus);

RgbImage load_image(const Corpus& corpus, const ImageRecord& record);
LabelMask load_mask(const Corpus& corpus, const ImageRecord& record);

/// Counts per split; every split key is present.
std::map<Split, std::size_t> split_counts(const Corpus& corpus);

}  // namespace slr
