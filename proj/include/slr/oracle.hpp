#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "slr/corpus.hpp"
#include "slr/image.hpp"

namespace slr {

/// Full ground truth for one generated image, including images that the
/// manifest lists as unlabeled.
struct OracleEntry {
  ImageRecord record;  // split as in the manifest; mask_path always set
  LabelMask mask;
  std::set<int> classes;
};

class Oracle {
 public:
  Oracle() = default;
  Oracle(std::vector<std::string> class_names, std::map<std::string, OracleEntry, std::less<>> entries)
      : class_names_(std::move(class_names)), entries_(std::move(entries)) {}

  const std::vector<std::string>& class_names() const { return class_names_; }
  const std::map<std::string, OracleEntry, std::less<>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool contains(std::string_view id) const { return entries_.find(id) != entries_.end(); }

 private:
  std::vector<std::string> class_names_;
  std::map<std::string, OracleEntry, std::less<>> entries_;
};

/// Exact mask and class set for any image id; throws for unknown ids.
const OracleEntry& oracle_lookup(const Oracle& oracle, std::string_view image_id);

/// Oracle file: manifest syntax with a mask on every row plus an eighth
/// column holding the comma-separated class set. Masks are loaded eagerly.
Oracle load_oracle(const std::filesystem::path& path);
void save_oracle(const Oracle& oracle, const std::filesystem::path& path);

/// Class indices present in a mask, ascending.
std::set<int> class_set(const LabelMask& mask);

}  // namespace slr
