#pragma once

#include <memory>
#include <string>

#include "priorauth/annotations.hpp"
#include "priorauth/embedding.hpp"
#include "priorauth/error.hpp"
#include "priorauth/http_backends.hpp"
#include "priorauth/mock_clients.hpp"

namespace priorauth {

/// Builds a completion client from its spec string:
///   mock:oracle | mock:noise:<p>[:<seed>] | mock:always:<Judgment> |
///   mock:phrase | mock:hallucinate | http:<url>
/// Oracle-backed mocks read `labels`.
inline std::unique_ptr<CompletionClient> make_client(const std::string& spec, const GoldLabels& labels = {}) {
  auto rest = [&](std::string_view prefix) { return spec.substr(prefix.size()); };
  if (spec == "mock:oracle") return std::make_unique<OracleClient>(labels);
  if (spec == "mock:phrase") return std::make_unique<PhraseRuleClient>();
  if (spec == "mock:hallucinate") return std::make_unique<HallucinatingClient>(std::make_unique<OracleClient>(labels));
  if (spec.starts_with("mock:noise:")) {
    auto args = rest("mock:noise:");
    std::uint64_t seed = 0;
    if (auto colon = args.find(':'); colon != std::string::npos) {
      seed = std::stoull(args.substr(colon + 1));
      args = args.substr(0, colon);
    }
    double p = 0;
    try {
      p = std::stod(args);
    } catch (const std::exception&) {
      throw ConfigError("bad noise probability in '" + spec + "'");
    }
    return std::make_unique<NoiseClient>(labels, p, seed);
  }
  if (spec.starts_with("mock:always:")) {
    auto j = parse_judgment(rest("mock:always:"));
    if (!j) throw ConfigError("bad judgment in '" + spec + "'");
    return std::make_unique<AlwaysClient>(*j);
  }
  if (spec.starts_with("http:")) return std::make_unique<HttpCompletionClient>(rest("http:"));
  throw ConfigError("unknown client '" + spec + "'");
}

/// "test" (hash embedder), "lexical", or an http(s) URL.
inline std::unique_ptr<Encoder> make_encoder(const std::string& spec, std::size_t dim = 384) {
  if (spec == "test") return std::make_unique<HashEmbedder>(dim);
  if (spec == "lexical") return std::make_unique<LexicalEmbedder>(dim);
  if (spec.starts_with("http://") || spec.starts_with("https://")) return std::make_unique<HttpEncoder>(spec);
  throw ConfigError("unknown encoder '" + spec + "'");
}

}  // namespace priorauth
