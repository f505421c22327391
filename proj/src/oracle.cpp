#include "slr/oracle.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "slr/error.hpp"

namespace slr {
namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream in(line);
  std::string field;
  while (std::getline(in, field, '\t')) fields.push_back(field);
  if (!line.empty() && line.back() == '\t') fields.emplace_back();
  return fields;
}

int to_int(const std::string& text, const std::string& where) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw_validation(where + ": expected an integer, got '" + text + "'");
  }
  return v;
}

std::string format_classes(const std::set<int>& classes) {
  std::string out;
  for (int c : classes) {
    if (!out.empty()) out += ',';
    out += std::to_string(c);
  }
  return out;
}

}  // namespace

std::set<int> class_set(const LabelMask& mask) {
  std::vector<char> seen(256, 0);
  for (auto v : mask.labels) seen[v] = 1;
  std::set<int> out;
  for (int c = 0; c < 256; ++c) {
    if (seen[c]) out.insert(c);
  }
  return out;
}

const OracleEntry& oracle_lookup(const Oracle& oracle, std::string_view image_id) {
  const auto it = oracle.entries().find(image_id);
  if (it == oracle.entries().end()) throw_validation("oracle has no entry for image '" + std::string(image_id) + "'");
  return it->second;
}

Oracle load_oracle(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_validation("cannot open oracle file " + path.string());
  const auto root = path.parent_path();
  std::vector<std::string> class_names;
  std::map<std::string, OracleEntry, std::less<>> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("#classes\t", 0) == 0) class_names = split_tabs(line.substr(9));
      continue;
    }
    if (class_names.size() < 2) throw_validation(where + ": oracle rows before a #classes line");
    const auto f = split_tabs(line);
    if (f.size() != 8) throw_validation(where + ": expected 8 tab-separated fields, got " + std::to_string(f.size()));
    OracleEntry e;
    e.record.id = f[0];
    e.record.subject_id = f[1];
    e.record.day = to_int(f[2], where);
    e.record.index = to_int(f[3], where);
    e.record.image_path = f[4];
    if (f[5] == "-") throw_validation(where + ": oracle rows must name a mask");
    e.record.mask_path = f[5];
    e.record.split = parse_split(f[6]);
    std::istringstream cls(f[7]);
    std::string token;
    while (std::getline(cls, token, ',')) e.classes.insert(to_int(token, where));
    const std::filesystem::path mask_path = std::filesystem::path(f[5]).is_absolute() ? std::filesystem::path(f[5]) : root / f[5];
    e.mask = read_mask(mask_path, static_cast<int>(class_names.size()));
    if (class_set(e.mask) != e.classes) {
      throw_validation(where + ": class set column disagrees with mask " + mask_path.string());
    }
    const std::string id = e.record.id;
    if (!entries.emplace(id, std::move(e)).second) throw_validation(where + ": duplicate id '" + id + "'");
  }
  return Oracle(std::move(class_names), std::move(entries));
}

void save_oracle(const Oracle& oracle, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "# slr oracle: id subject_id day index image_path mask_path split classes\n";
  out << "#classes";
  for (const auto& n : oracle.class_names()) out << '\t' << n;
  out << '\n';
  for (const auto& [id, e] : oracle.entries()) {
    const auto& r = e.record;
    out << r.id << '\t' << r.subject_id << '\t' << r.day << '\t' << r.index << '\t' << r.image_path << '\t'
        << r.mask_path.value_or("-") << '\t' << to_string(r.split) << '\t' << format_classes(e.classes) << '\n';
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw_runtime("cannot write oracle file " + path.string());
  file << out.str();
}

}  // namespace slr
