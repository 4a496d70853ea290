// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "rankdist/dataset.hpp"
#include "rankdist/error.hpp"

namespace rankdist {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json counts_json(const CorpusCounts& c) {
  return json{{"train", c.train},
              {"val", c.val},
              {"test", c.test},
              {"skipped", c.skipped},
              {"total", c.train + c.val + c.test}};
}

json entry_json(const ManifestEntry& e) {
  json j;
  j["source_id"] = e.source_id;
  j["kind"] = to_string(e.kind);
  j["level_a"] = e.level_a;
  j["level_b"] = e.level_b;
  if (e.direction) j["direction"] = to_string(*e.direction);
  j["rect"] = {e.rect.x, e.rect.y, e.rect.w, e.rect.h};
  j["patch_a_path"] = e.patch_a_path;
  j["patch_b_path"] = e.patch_b_path;
  j["split"] = to_string(e.split);
  return j;
}

ManifestEntry parse_entry(const json& j) {
  ManifestEntry e;
  e.source_id = j.at("source_id").get<std::string>();
  e.kind = parse_distortion_kind(j.at("kind").get<std::string>());
  e.level_a = j.at("level_a").get<double>();
  e.level_b = j.at("level_b").get<double>();
  if (j.contains("direction")) e.direction = parse_diagonal(j.at("direction").get<std::string>());
  const auto& r = j.at("rect");
  if (!r.is_array() || r.size() != 4) throw Error(ErrorCode::CorruptData, "rect must be [x,y,w,h]");
  e.rect = {r[0].get<int>(), r[1].get<int>(), r[2].get<int>(), r[3].get<int>()};
  e.patch_a_path = j.at("patch_a_path").get<std::string>();
  e.patch_b_path = j.at("patch_b_path").get<std::string>();
  e.split = parse_split(j.at("split").get<std::string>());
  return e;
}

}  // namespace

std::string format_manifest(const CorpusManifest& manifest) {
  std::ostringstream out;
  json header;
  header["version"] = manifest.version;
  header["seed"] = manifest.seed;
  header["kind"] = to_string(manifest.kind);
  header["counts"] = counts_json(manifest.counts);
  out << header.dump() << '\n';
  for (const auto& e : manifest.entries) out << entry_json(e).dump() << '\n';
  return out.str();
}

void write_manifest(const CorpusManifest& manifest, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << format_manifest(manifest);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

CorpusManifest read_manifest(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw Error(ErrorCode::FileNotFound, path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());

  CorpusManifest manifest;
  manifest.root = path.parent_path();
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      if (!have_header) {
        manifest.version = j.at("version").get<int>();
        if (manifest.version != 1) {
          throw Error(ErrorCode::VersionMismatch, "unsupported manifest version");
        }
        manifest.seed = j.at("seed").get<std::uint64_t>();
        manifest.kind = parse_distortion_kind(j.at("kind").get<std::string>());
        const auto& c = j.at("counts");
        manifest.counts.train = c.at("train").get<std::size_t>();
        manifest.counts.val = c.at("val").get<std::size_t>();
        manifest.counts.test = c.at("test").get<std::size_t>();
        manifest.counts.skipped = c.value("skipped", std::size_t{0});
        have_header = true;
      } else {
        manifest.entries.push_back(parse_entry(j));
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::CorruptData, path.string() + " line " + std::to_string(line_no) +
                                              ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code() == ErrorCode::VersionMismatch ? e.code() : ErrorCode::CorruptData,
                  path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw Error(ErrorCode::CorruptData, path.string() + " line 1: missing header");
  return manifest;
}

}  // namespace rankdist
