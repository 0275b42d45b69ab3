#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "priorauth/error.hpp"

namespace priorauth {

enum class ChunkKind { Sentence, Resource };

inline std::string_view to_string(ChunkKind k) { return k == ChunkKind::Sentence ? "Sentence" : "Resource"; }

/// Smallest unit of evidence: one sentence of a note, or one structured
/// resource flattened to text.
struct DocumentChunk {
  std::string chunk_id;
  std::string source_id;
  std::string text;
  ChunkKind kind = ChunkKind::Sentence;
  /// Byte offset of `text` inside its source note (sentences only).
  std::size_t offset = 0;

  friend bool operator==(const DocumentChunk&, const DocumentChunk&) = default;
};

/// A patient document as it arrives: free-text note or resource bundle.
struct Document {
  std::string id;
  ChunkKind kind = ChunkKind::Sentence;
  std::string text;           // notes
  nlohmann::json resources;   // bundles: array of flat objects
};

namespace detail {

inline constexpr std::array<std::string_view, 9> kAbbreviations{
    "dr.", "mr.", "ms.", "mrs.", "e.g.", "i.e.", "vs.", "mg.", "hx."};

inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

inline bool is_terminator(char c) { return c == '.' || c == '?' || c == '!'; }

inline std::string make_chunk_id(const std::string& source, char tag, std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%c%04zu", tag, index);
  return source + "#" + buf;
}

// True when the '.' at `dot` closes one of the guarded abbreviations.
inline bool ends_abbreviation(std::string_view text, std::size_t begin, std::size_t dot) {
  std::size_t w = dot;
  while (w > begin && !is_space(text[w - 1])) --w;
  while (w < dot && (text[w] == '(' || text[w] == '"' || text[w] == '\'')) ++w;
  std::string word;
  for (std::size_t i = w; i <= dot; ++i) {
    word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i]))));
  }
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), word) != kAbbreviations.end();
}

// A line consisting only of a short heading ending in ':' ("Chief Complaint:").
inline bool is_section_header(std::string_view line) {
  if (line.size() < 2 || line.size() > 80 || line.back() != ':') return false;
  return std::none_of(line.begin(), line.end() - 1, [](char c) { return is_terminator(c) || c == ':'; });
}

}  // namespace detail

/// Splits a free-text note into sentence chunks.
///
/// Sentences end at '.', '?' or '!' followed by whitespace or end of text,
/// except after a guarded abbreviation. Blank lines and standalone section
/// header lines also delimit chunks; headers become chunks of their own.
/// Every chunk is the exact byte range of the note, trimmed of whitespace.
inline std::vector<DocumentChunk> chunk_text(const std::string& source_id, std::string_view note) {
  if (std::all_of(note.begin(), note.end(), detail::is_space)) {
    throw EmptyInput("note '" + source_id + "' is empty");
  }

  std::vector<DocumentChunk> out;
  constexpr auto npos = std::string_view::npos;
  std::size_t open = npos;  // start of the sentence being accumulated
  std::size_t last_nonspace = 0;

  auto emit = [&](std::size_t begin, std::size_t end) {
    out.push_back({detail::make_chunk_id(source_id, 's', out.size()), source_id,
                   std::string(note.substr(begin, end - begin)), ChunkKind::Sentence, begin});
  };
  auto flush = [&] {
    if (open != npos) emit(open, last_nonspace + 1);
    open = npos;
  };

  std::size_t line_start = 0;
  while (line_start <= note.size()) {
    auto nl = note.find('\n', line_start);
    const std::size_t line_end = nl == npos ? note.size() : nl;

    std::size_t ts = line_start;
    std::size_t te = line_end;
    while (ts < te && detail::is_space(note[ts])) ++ts;
    while (te > ts && detail::is_space(note[te - 1])) --te;

    if (ts == te) {
      flush();
    } else if (detail::is_section_header(note.substr(ts, te - ts))) {
      flush();
      emit(ts, te);
    } else {
      for (std::size_t i = ts; i < te; ++i) {
        const char c = note[i];
        if (detail::is_space(c)) continue;
        if (open == npos) open = i;
        last_nonspace = i;
        if (!detail::is_terminator(c)) continue;

        // Absorb runs like "?!" or '."' before testing the boundary.
        std::size_t j = i;
        while (j + 1 < te && (detail::is_terminator(note[j + 1]) || note[j + 1] == '"' ||
                              note[j + 1] == '\'' || note[j + 1] == ')')) {
          ++j;
        }
        const bool boundary = j + 1 == te || detail::is_space(note[j + 1]);
        if (!boundary) continue;
        if (c == '.' && j == i && detail::ends_abbreviation(note, open, i)) continue;
        last_nonspace = j;
        i = j;
        flush();
      }
    }
    if (nl == npos) break;
    line_start = nl + 1;
  }
  flush();
  return out;
}

/// Canonical text of one flat resource: "key: value" per field, keys sorted.
inline std::string flatten_resource(const nlohmann::json& resource) {
  if (!resource.is_object()) throw MalformedResource("resource must be a JSON object");
  if (resource.empty()) throw MalformedResource("resource has no fields");
  std::vector<std::string> keys;
  for (const auto& [k, _] : resource.items()) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  std::string text;
  for (const auto& k : keys) {
    if (!text.empty()) text += '\n';
    const auto& v = resource[k];
    text += k + ": " + (v.is_string() ? v.get<std::string>() : v.dump());
  }
  return text;
}

/// One chunk per resource of a bundle.
inline std::vector<DocumentChunk> chunk_resources(const std::string& source_id, const nlohmann::json& bundle) {
  if (!bundle.is_array()) throw MalformedResource("bundle '" + source_id + "' must be a JSON array");
  std::vector<DocumentChunk> out;
  for (const auto& r : bundle) {
    try {
      out.push_back({detail::make_chunk_id(source_id, 'r', out.size()), source_id, flatten_resource(r),
                     ChunkKind::Resource, 0});
    } catch (const MalformedResource& e) {
      throw MalformedResource("bundle '" + source_id + "' resource " + std::to_string(out.size()) + ": " +
                              e.what());
    }
  }
  return out;
}

/// Chunks every document of a set, in document order.
inline std::vector<DocumentChunk> ingest(const std::vector<Document>& docs) {
  if (docs.empty()) throw EmptyInput("document set is empty");
  std::vector<DocumentChunk> out;
  for (const auto& d : docs) {
    auto part = d.kind == ChunkKind::Sentence ? chunk_text(d.id, d.text) : chunk_resources(d.id, d.resources);
    out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  if (out.empty()) throw EmptyInput("document set produced no chunks");
  return out;
}

inline nlohmann::json to_json(const DocumentChunk& c) {
  return {{"chunk_id", c.chunk_id},
          {"source_id", c.source_id},
          {"text", c.text},
          {"kind", std::string(to_string(c.kind))},
          {"offset", c.offset}};
}

inline DocumentChunk chunk_from_json(const nlohmann::json& j) {
  DocumentChunk c;
  c.chunk_id = j.at("chunk_id").get<std::string>();
  c.source_id = j.at("source_id").get<std::string>();
  c.text = j.at("text").get<std::string>();
  c.kind = j.at("kind").get<std::string>() == "Resource" ? ChunkKind::Resource : ChunkKind::Sentence;
  c.offset = j.value("offset", std::size_t{0});
  return c;
}

inline nlohmann::json to_json(const Document& d) {
  nlohmann::json j{{"id", d.id}, {"kind", d.kind == ChunkKind::Sentence ? "note" : "bundle"}};
  if (d.kind == ChunkKind::Sentence) {
    j["text"] = d.text;
  } else {
    j["resources"] = d.resources;
  }
  return j;
}

/// {"id", "kind": "note"|"bundle", "text" | "resources"}; kind defaults
/// from which payload field is present.
inline Document document_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("document must be an object");
  Document d;
  d.id = j.value("id", std::string{});
  if (d.id.empty()) throw SchemaError("document needs a non-empty 'id'");
  const auto kind = j.value("kind", std::string{j.contains("resources") ? "bundle" : "note"});
  if (kind == "bundle") {
    d.kind = ChunkKind::Resource;
    d.resources = j.at("resources");
  } else if (kind == "note") {
    d.kind = ChunkKind::Sentence;
    if (!j.contains("text") || !j["text"].is_string()) throw SchemaError("note '" + d.id + "' needs 'text'");
    d.text = j["text"].get<std::string>();
  } else {
    throw SchemaError("unknown document kind '" + kind + "'");
  }
  return d;
}

}  // namespace priorauth
