#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "priorauth/error.hpp"
#include "priorauth/ingest.hpp"

namespace priorauth {

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  auto j = nlohmann::json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded()) throw SchemaError(path.string() + " is not valid JSON");
  return j;
}

/// Loads one patient document. With no explicit chunking, ".json" files
/// are resource bundles and anything else is a plain-text note. The id
/// defaults to the file stem.
inline Document load_document(const std::filesystem::path& path, std::optional<ChunkKind> chunking = std::nullopt,
                              std::string id = {}) {
  Document d;
  d.id = id.empty() ? path.stem().string() : std::move(id);
  d.kind = chunking.value_or(path.extension() == ".json" ? ChunkKind::Resource : ChunkKind::Sentence);
  if (d.kind == ChunkKind::Resource) {
    d.resources = read_json_file(path);
  } else {
    d.text = read_text_file(path);
  }
  return d;
}

inline std::optional<ChunkKind> parse_chunking(std::string_view s) {
  if (s == "sentence") return ChunkKind::Sentence;
  if (s == "resource") return ChunkKind::Resource;
  return std::nullopt;
}

}  // namespace priorauth
