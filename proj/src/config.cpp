#include "slr/config.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "slr/error.hpp"

namespace slr {
namespace {

const std::map<std::string, std::string, std::less<>>& defaults() {
  static const std::map<std::string, std::string, std::less<>> kDefaults = {
      {"seed", "1"},
      {"synth.subjects", "5"},
      {"synth.days", "20"},
      {"synth.images_per_day", "2"},
      {"synth.classes", "3"},
      {"synth.size", "64"},
      {"synth.evolution_rate", "0.15"},
      {"synth.label_fraction", "0.1"},
      {"synth.noise_level", "0.25"},
      {"pca", "true"},
      {"pca.dim", "0"},
      {"tau_min", "0.0"},
      {"random.count", "0"},
      {"train.features1", "8"},
      {"train.features2", "8"},
      {"train.resolution", "64"},
      {"train.batch", "8"},
      {"train.epochs", "40"},
      {"train.lr", "0.02"},
      {"train.momentum", "0.9"},
      {"train.weight_decay", "0.0001"},
      {"train.poly_power", "0.9"},
      {"pairs", "true"},
      {"eta", "true"},
      {"eta.exclude_background", "false"},
      {"lambda", "true"},
      {"ablate.seeds", "3"},
  };
  return kDefaults;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, const std::string& value, std::string_view kind) {
  throw_validation("config key '" + std::string(key) + "': '" + value + "' is not a valid " + std::string(kind));
}

}  // namespace

RunConfig::RunConfig() : values_(defaults()) {
  for (const auto& [k, v] : defaults()) set(k, v);
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_validation("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str(), path.string());
}

RunConfig RunConfig::from_text(std::string_view text, std::string_view source) {
  RunConfig config;
  std::istringstream in{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw_validation(std::string(source) + ":" + std::to_string(number) + ": expected key = value");
    }
    try {
      config.set(trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)));
    } catch (const Error& e) {
      throw_validation(std::string(source) + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return config;
}

void RunConfig::set(std::string_view key, std::string_view value) {
  const auto it = values_.find(key);
  if (it == values_.end()) throw_validation("unknown config key '" + std::string(key) + "'");
  const std::string previous = it->second;
  it->second = std::string(value);
  try {
    const std::string& def = defaults().find(key)->second;
    char buf[40];
    if (def == "true" || def == "false") {
      it->second = get_bool(key) ? "true" : "false";
    } else if (def.find('.') != std::string::npos) {
      const auto r = std::to_chars(buf, buf + sizeof buf, get_double(key));
      it->second.assign(buf, r.ptr);
    } else if (key == "seed") {
      it->second = std::to_string(get_u64(key));
    } else {
      it->second = std::to_string(get_int(key));
    }
  } catch (...) {
    it->second = previous;
    throw;
  }
}

const std::string& RunConfig::get(std::string_view key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw_validation("unknown config key '" + std::string(key) + "'");
  return it->second;
}

int RunConfig::get_int(std::string_view key) const {
  const std::string& v = get(key);
  int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "integer");
  return out;
}

std::uint64_t RunConfig::get_u64(std::string_view key) const {
  const std::string& v = get(key);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "unsigned integer");
  return out;
}

double RunConfig::get_double(std::string_view key) const {
  const std::string& v = get(key);
  char* end = nullptr;
  errno = 0;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE || !std::isfinite(out)) {
    bad_value(key, v, "number");
  }
  return out;
}

bool RunConfig::get_bool(std::string_view key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v, "boolean");
}

std::string RunConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string RunConfig::hash() const { return fnv1a_hex(canonical()); }

SynthConfig RunConfig::synth() const {
  SynthConfig c;
  c.subjects = get_int("synth.subjects");
  c.days = get_int("synth.days");
  c.images_per_day = get_int("synth.images_per_day");
  c.classes = get_int("synth.classes");
  c.size = get_int("synth.size");
  c.evolution_rate = get_double("synth.evolution_rate");
  c.label_fraction = get_double("synth.label_fraction");
  c.noise_level = get_double("synth.noise_level");
  c.seed = get_u64("seed");
  c.validate();
  return c;
}

PairingConfig RunConfig::pairing() const {
  PairingConfig c;
  c.use_pca = get_bool("pca");
  c.pca_dim = get_int("pca.dim");
  c.tau_min = get_double("tau_min");
  if (c.pca_dim < 0) throw_validation("config key 'pca.dim' must be >= 0");
  return c;
}

TrainConfig RunConfig::train() const {
  TrainConfig c;
  c.features1 = get_int("train.features1");
  c.features2 = get_int("train.features2");
  c.resolution = get_int("train.resolution");
  c.batch = get_int("train.batch");
  c.epochs = get_int("train.epochs");
  c.sgd.base_lr = get_double("train.lr");
  c.sgd.momentum = get_double("train.momentum");
  c.sgd.weight_decay = get_double("train.weight_decay");
  c.sgd.poly_power = get_double("train.poly_power");
  c.use_pairs = get_bool("pairs");
  c.use_eta = get_bool("eta");
  c.eta_excludes_background = get_bool("eta.exclude_background");
  c.use_lambda = get_bool("lambda");
  c.seed = get_u64("seed");
  c.config_hash = hash();
  if (c.features1 < 1 || c.features2 < 1) throw_validation("train.features1/2 must be >= 1");
  if (c.batch < 1) throw_validation("train.batch must be >= 1");
  if (c.epochs < 0) throw_validation("train.epochs must be >= 0");
  if (c.resolution < 3) throw_validation("train.resolution must be >= 3");
  return c;
}

}  // namespace slr
