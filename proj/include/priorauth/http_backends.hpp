#pragma once

#include <cstdlib>
#include <mutex>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "priorauth/completion.hpp"
#include "priorauth/embedding.hpp"
#include "priorauth/error.hpp"

namespace priorauth {

/// "http://host:port/path" split into origin and path.
struct Endpoint {
  std::string origin;
  std::string path;

  static Endpoint parse(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos) throw ConfigError("endpoint '" + url + "' has no scheme");
    const auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
  }
};

namespace detail {

inline nlohmann::json post_json(const Endpoint& ep, const nlohmann::json& body, int timeout_s,
                                const std::string& bearer = {}) {
  httplib::Client cli(ep.origin);
  cli.set_connection_timeout(timeout_s, 0);
  cli.set_read_timeout(timeout_s, 0);
  httplib::Headers headers;
  if (!bearer.empty()) headers.emplace("Authorization", "Bearer " + bearer);
  auto res = cli.Post(ep.path, headers, body.dump(), "application/json");
  if (!res) {
    throw BackendUnavailable("POST " + ep.origin + ep.path + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw BackendUnavailable("POST " + ep.origin + ep.path + " returned HTTP " + std::to_string(res->status));
  }
  auto j = nlohmann::json::parse(res->body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw BackendUnavailable("response from " + ep.origin + " is not a JSON object");
  return j;
}

}  // namespace detail

/// Remote encoder: POST {"texts": [...]} -> {"vectors": [[...], ...]}.
/// Vectors are re-normalized; the dimension is fixed by the first reply
/// unless given up front.
class HttpEncoder final : public Encoder {
 public:
  explicit HttpEncoder(const std::string& url, std::size_t dim = 0, int timeout_s = 30)
      : endpoint_(Endpoint::parse(url)), dim_(dim), timeout_s_(timeout_s) {}

  std::size_t dim() const override {
    std::lock_guard lock(mu_);
    if (dim_ == 0) {
      // Probe once so the index knows its dimension.
      auto j = detail::post_json(endpoint_, {{"texts", {"dimension probe"}}}, timeout_s_);
      dim_ = j.at("vectors").at(0).size();
    }
    return dim_;
  }

  std::string name() const override { return "http:" + endpoint_.origin + endpoint_.path; }

  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override {
    const auto expected = dim();
    nlohmann::json body{{"texts", nlohmann::json::array()}};
    for (const auto& t : texts) body["texts"].push_back(t);
    auto j = detail::post_json(endpoint_, body, timeout_s_);
    if (!j.contains("vectors") || !j["vectors"].is_array() || j["vectors"].size() != texts.size()) {
      throw BackendUnavailable("encoder reply lacks one vector per text");
    }
    std::vector<EmbeddingVector> out;
    for (const auto& v : j["vectors"]) {
      auto raw = v.get<std::vector<double>>();
      if (raw.size() != expected) {
        throw DimensionMismatch("encoder returned dimension " + std::to_string(raw.size()) + ", expected " +
                                std::to_string(expected));
      }
      out.push_back(EmbeddingVector::normalized(std::move(raw)));
    }
    return out;
  }

 private:
  Endpoint endpoint_;
  mutable std::mutex mu_;
  mutable std::size_t dim_;
  int timeout_s_;
};

/// Remote completion model: POST {"prompt", "sampling"} -> {"text"}.
/// A bearer token is read from PRIORAUTH_CLIENT_TOKEN when set.
class HttpCompletionClient final : public CompletionClient {
 public:
  explicit HttpCompletionClient(const std::string& url, int timeout_s = 120)
      : endpoint_(Endpoint::parse(url)), timeout_s_(timeout_s) {
    if (const char* tok = std::getenv("PRIORAUTH_CLIENT_TOKEN")) token_ = tok;
  }

  std::string id() const override { return "http:" + endpoint_.origin + endpoint_.path; }

  std::string complete(const CompletionRequest& req) override {
    nlohmann::json reply;
    try {
      reply = detail::post_json(endpoint_, {{"prompt", req.prompt}, {"sampling", to_json(req.sampling)}}, timeout_s_,
                                token_);
    } catch (const BackendUnavailable& e) {
      throw ClientError(e.what());
    }
    if (!reply.contains("text") || !reply["text"].is_string()) throw ClientError("completion reply lacks 'text'");
    return reply["text"].get<std::string>();
  }

 private:
  Endpoint endpoint_;
  int timeout_s_;
  std::string token_;
};

}  // namespace priorauth
