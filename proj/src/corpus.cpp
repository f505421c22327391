#include "slr/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "slr/error.hpp"

namespace slr {
namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

int parse_int_field(const std::string& text, const std::string& where, const char* name) {
  int value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw_validation(where + ": field '" + name + "' is not an integer: '" + text + "'");
  }
  return value;
}

std::string key_string(const ImageRecord& r) {
  return "(" + r.subject_id + ", " + std::to_string(r.day) + ", " + std::to_string(r.index) + ")";
}

const std::vector<int> kNoDays;

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    case Split::unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "val") return Split::val;
  if (text == "test") return Split::test;
  if (text == "unlabeled") return Split::unlabeled;
  throw_validation("unknown split '" + std::string(text) + "' (expected train, val, test or unlabeled)");
}

Corpus::Corpus(std::vector<ImageRecord> records, std::vector<std::string> class_names,
               std::filesystem::path root)
    : records_(std::move(records)), class_names_(std::move(class_names)), root_(std::move(root)) {
  if (class_names_.size() < 2) {
    throw_validation("a corpus needs at least 2 classes (background plus one), got " +
                     std::to_string(class_names_.size()));
  }
  if (class_names_.size() > 256) throw_validation("at most 256 classes fit in an 8-bit mask");
  build_index();
}

void Corpus::build_index() {
  std::set<std::tuple<std::string_view, int, int>> keys;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const ImageRecord& r = records_[i];
    if (r.id.empty()) throw_validation("record " + std::to_string(i) + " has an empty id");
    if (r.subject_id.empty()) throw_validation("record '" + r.id + "' has an empty subject_id");
    if (r.day < 1) throw_validation("record '" + r.id + "': day must be >= 1");
    if (r.index < 1) throw_validation("record '" + r.id + "': index must be >= 1");
    if (r.image_path.empty()) throw_validation("record '" + r.id + "' has an empty image_path");
    const bool wants_mask = r.split != Split::unlabeled;
    if (wants_mask != r.has_mask()) {
      throw_validation("record '" + r.id + "': split " + std::string(to_string(r.split)) +
                       (wants_mask ? " requires a mask" : " must not carry a mask"));
    }
    if (!by_id_.emplace(r.id, i).second) throw_validation("duplicate record id '" + r.id + "'");
    if (!keys.emplace(r.subject_id, r.day, r.index).second) {
      throw_validation("duplicate (subject, day, index) key " + key_string(r) + " at record '" + r.id + "'");
    }
    subjects_[r.subject_id].by_day[r.day].push_back(i);
  }
  for (auto& [subject, index] : subjects_) {
    for (auto& [day, positions] : index.by_day) {
      index.days.push_back(day);
      std::sort(positions.begin(), positions.end(), [this](std::size_t a, std::size_t b) {
        return std::tie(records_[a].index, records_[a].id) < std::tie(records_[b].index, records_[b].id);
      });
    }
  }
}

std::filesystem::path Corpus::resolve(const std::string& path) const {
  std::filesystem::path p(path);
  if (p.is_absolute() || root_.empty()) return p;
  return root_ / p;
}

const ImageRecord* Corpus::find(std::string_view id) const {
  const auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &records_[it->second];
}

const ImageRecord& Corpus::at(std::string_view id) const {
  return records_[position(id)];
}

std::size_t Corpus::position(std::string_view id) const {
  const auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) throw_validation("unknown image id '" + std::string(id) + "'");
  return it->second;
}

std::vector<std::string> Corpus::subjects() const {
  std::vector<std::string> out;
  out.reserve(subjects_.size());
  for (const auto& [subject, index] : subjects_) out.push_back(subject);
  return out;
}

bool Corpus::has_subject(std::string_view subject) const { return subjects_.find(subject) != subjects_.end(); }

const std::vector<int>& Corpus::days(std::string_view subject) const {
  const auto it = subjects_.find(subject);
  return it == subjects_.end() ? kNoDays : it->second.days;
}

std::span<const std::size_t> Corpus::images_on(std::string_view subject, int day) const {
  const auto it = subjects_.find(subject);
  if (it == subjects_.end()) return {};
  const auto d = it->second.by_day.find(day);
  if (d == it->second.by_day.end()) return {};
  return d->second;
}

std::vector<int> Corpus::neighboring_days(std::string_view subject, int day) const {
  const auto it = subjects_.find(subject);
  if (it == subjects_.end()) throw_validation("unknown subject '" + std::string(subject) + "'");
  const std::vector<int>& days = it->second.days;
  std::vector<int> out;
  const auto lower = std::lower_bound(days.begin(), days.end(), day);
  if (lower != days.begin()) out.push_back(*std::prev(lower));
  const auto upper = std::upper_bound(days.begin(), days.end(), day);
  if (upper != days.end()) out.push_back(*upper);
  return out;
}

Corpus Corpus::filtered(const std::function<bool(const ImageRecord&)>& keep) const {
  std::vector<ImageRecord> kept;
  for (const auto& r : records_) {
    if (keep(r)) kept.push_back(r);
  }
  return Corpus(std::move(kept), class_names_, root_);
}

Corpus load_manifest(const std::filesystem::path& path, ManifestOptions options) {
  std::ifstream in(path);
  if (!in) throw_validation("cannot open manifest " + path.string());

  std::vector<ImageRecord> records;
  std::vector<std::string> class_names;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("#classes\t", 0) == 0) {
        auto names = split_tabs(line.substr(9));
        for (const auto& n : names) {
          if (n.empty()) throw_validation(where + ": empty class name");
        }
        class_names = std::move(names);
      }
      continue;
    }
    const auto fields = split_tabs(line);
    if (fields.size() != 7) {
      throw_validation(where + ": expected 7 tab-separated fields, got " + std::to_string(fields.size()));
    }
    ImageRecord r;
    r.id = fields[0];
    r.subject_id = fields[1];
    r.day = parse_int_field(fields[2], where, "day");
    r.index = parse_int_field(fields[3], where, "index");
    r.image_path = fields[4];
    if (fields[5] != "-") r.mask_path = fields[5];
    try {
      r.split = parse_split(fields[6]);
    } catch (const Error& e) {
      throw_validation(where + ": " + e.what());
    }
    records.push_back(std::move(r));
  }

  const auto root = path.parent_path();
  if (class_names.empty()) {
    if (!options.check_files) throw_validation(path.string() + ": no #classes line and file checks disabled");
    int max_label = 1;
    Corpus probe(records, {"background", "foreground"}, root);
    for (const auto& r : probe.records()) {
      if (!r.mask_path) continue;
      const GrayImage gray = read_pgm(probe.resolve(*r.mask_path));
      for (auto v : gray.pixels) max_label = std::max<int>(max_label, v);
    }
    class_names.push_back("background");
    for (int c = 1; c <= max_label; ++c) class_names.push_back("class_" + std::to_string(c));
  }

  Corpus corpus(std::move(records), std::move(class_names), root);
  if (options.check_files) validate_files(corpus);
  return corpus;
}

void save_manifest(const Corpus& corpus, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "# slr manifest: id subject_id day index image_path mask_path split\n";
  out << "#classes";
  for (const auto& name : corpus.class_names()) out << '\t' << name;
  out << '\n';
  for (const auto& r : corpus.records()) {
    out << r.id << '\t' << r.subject_id << '\t' << r.day << '\t' << r.index << '\t' << r.image_path << '\t'
        << (r.mask_path ? *r.mask_path : std::string("-")) << '\t' << to_string(r.split) << '\n';
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw_runtime("cannot write manifest " + path.string());
  file << out.str();
  if (!file) throw_runtime("write failed for " + path.string());
}

void validate_files(const Corpus& corpus) {
  for (const auto& r : corpus.records()) {
    const auto image_path = corpus.resolve(r.image_path);
    if (!std::filesystem::exists(image_path)) {
      throw_validation("record '" + r.id + "': image file not found: " + image_path.string());
    }
    const RgbImage image = read_ppm(image_path);
    if (!r.mask_path) continue;
    const auto mask_path = corpus.resolve(*r.mask_path);
    if (!std::filesystem::exists(mask_path)) {
      throw_validation("record '" + r.id + "': mask file not found: " + mask_path.string());
    }
    const LabelMask mask = read_mask(mask_path, corpus.num_classes());
    if (mask.width != image.width || mask.height != image.height) {
      throw_validation("record '" + r.id + "': mask is " + std::to_string(mask.width) + "x" +
                       std::to_string(mask.height) + " but image is " + std::to_string(image.width) + "x" +
                       std::to_string(image.height));
    }
  }
}

RgbImage load_image(const Corpus& corpus, const ImageRecord& record) {
  return read_ppm(corpus.resolve(record.image_path));
}

LabelMask load_mask(const Corpus& corpus, const ImageRecord& record) {
  if (!record.mask_path) throw_validation("record '" + record.id + "' has no mask");
  return read_mask(corpus.resolve(*record.mask_path), corpus.num_classes());
}

std::map<Split, std::size_t> split_counts(const Corpus& corpus) {
  std::map<Split, std::size_t> counts{
      {Split::train, 0}, {Split::val, 0}, {Split::test, 0}, {Split::unlabeled, 0}};
  for (const auto& r : corpus.records()) ++counts[r.split];
  return counts;
}

}  // namespace slr
