#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "slr/pairing.hpp"
#include "slr/synth.hpp"
#include "slr/trainer.hpp"

namespace slr {

/// Declarative run configuration: `key = value` lines, '#' comments.
/// Every known key always has a value (defaults fill the gaps), so the
/// canonical form and its hash describe the complete run.
class RunConfig {
 public:
  RunConfig();

  static RunConfig from_file(const std::filesystem::path& path);
  static RunConfig from_text(std::string_view text, std::string_view source = "config");

  /// Throws a validation error for unknown keys or unparsable values.
  void set(std::string_view key, std::string_view value);
  const std::string& get(std::string_view key) const;

  int get_int(std::string_view key) const;
  double get_double(std::string_view key) const;
  bool get_bool(std::string_view key) const;
  std::uint64_t get_u64(std::string_view key) const;

  /// Sorted `key=value` lines; independent of the order keys were given.
  std::string canonical() const;
  /// 64-bit FNV-1a of canonical(), as 16 hex digits.
  std::string hash() const;

  SynthConfig synth() const;
  PairingConfig pairing() const;
  TrainConfig train() const;

  const std::map<std::string, std::string, std::less<>>& values() const { return values_; }

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

std::string fnv1a_hex(std::string_view text);

}  // namespace slr
