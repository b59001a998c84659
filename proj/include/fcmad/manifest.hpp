#pragma once

// Line-oriented manifests.
//   dataset:  relative_path<TAB>identity_id<TAB>kind
//   morphs:   relative_path<TAB>id_first<TAB>id_second<TAB>kind
//   split:    identity_id<TAB>subset

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "fcmad/error.hpp"
#include "fcmad/kinds.hpp"

namespace fcmad {

inline std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.emplace_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

struct ManifestRecord {
  std::string path;
  std::size_t id_first = 0;
  std::size_t id_second = 0;
  SampleKind kind = SampleKind::BonaFide;

  bool operator==(const ManifestRecord&) const = default;
};

inline std::size_t parse_id(const std::string& s, std::string_view what) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty() || s.front() == '-') {
    throw IoError(std::string(what) + ": bad identity id '" + s + "'");
  }
  return static_cast<std::size_t>(v);
}

/// Reads either layout; 3 fields = dataset row, 4 fields = morph row.
inline std::vector<ManifestRecord> read_manifest(std::istream& in, std::string_view name = "manifest") {
  std::vector<ManifestRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto f = split_tabs(line);
    const std::string where = std::string(name) + ":" + std::to_string(lineno);
    if (f.size() == 3) {
      const auto id = parse_id(f[1], where);
      out.push_back({f[0], id, id, sample_kind_from_string(f[2])});
    } else if (f.size() == 4) {
      out.push_back({f[0], parse_id(f[1], where), parse_id(f[2], where), sample_kind_from_string(f[3])});
    } else {
      throw IoError(where + ": expected 3 or 4 tab-separated fields");
    }
  }
  return out;
}

inline std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("missing manifest " + path.string());
  return read_manifest(in, path.string());
}

inline void write_dataset_manifest(std::ostream& out, const std::vector<ManifestRecord>& records) {
  for (const auto& r : records) out << r.path << '\t' << r.id_first << '\t' << to_string(r.kind) << '\n';
}

inline void write_morph_manifest(std::ostream& out, const std::vector<ManifestRecord>& records) {
  for (const auto& r : records) {
    out << r.path << '\t' << r.id_first << '\t' << r.id_second << '\t' << to_string(r.kind) << '\n';
  }
}

}  // namespace fcmad
