#pragma once

#include <filesystem>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "priorauth/io.hpp"
#include "priorauth/service.hpp"

namespace priorauth {

struct RestOptions {
  /// Defaults applied under each request's "config".
  PipelineConfig defaults;
  /// Directory that "document_refs" paths resolve against; refs are
  /// rejected when empty.
  std::filesystem::path documents_root;
};

namespace detail {

inline int status_for(const std::exception& e) {
  if (dynamic_cast<const UnknownRecord*>(&e) || dynamic_cast<const UnknownLeaf*>(&e)) return 404;
  if (dynamic_cast<const ConcurrentOverrideConflict*>(&e)) return 409;
  if (dynamic_cast<const Error*>(&e) || dynamic_cast<const nlohmann::json::exception*>(&e)) return 400;
  return 500;
}

inline const char* error_name(const std::exception& e) {
  if (dynamic_cast<const UnknownRecord*>(&e)) return "UnknownRecord";
  if (dynamic_cast<const UnknownLeaf*>(&e)) return "UnknownLeaf";
  if (dynamic_cast<const ConcurrentOverrideConflict*>(&e)) return "ConcurrentOverrideConflict";
  if (dynamic_cast<const SchemaError*>(&e)) return "SchemaError";
  if (dynamic_cast<const StructureError*>(&e)) return "StructureError";
  if (dynamic_cast<const ConfigError*>(&e)) return "ConfigError";
  if (dynamic_cast<const Error*>(&e)) return "Error";
  if (dynamic_cast<const nlohmann::json::exception*>(&e)) return "SchemaError";
  return "InternalError";
}

inline void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline nlohmann::json record_summary(const AdjudicationRecord& r) {
  nlohmann::json j{{"id", r.id},           {"case_id", r.case_id}, {"status", std::string(to_string(r.status))},
                   {"version", r.version}, {"created_at", r.created_at}};
  if (r.decision) {
    j["y"] = r.decision->y;
    j["root_confidence"] = r.decision->root_confidence.str();
    j["root_confidence_value"] = r.decision->root_confidence.value();
  }
  return j;
}

}  // namespace detail

/// HTTP front end of the adjudication service.
class RestServer {
 public:
  RestServer(AdjudicationService& service, RestOptions opts = {}) : service_(service), opts_(std::move(opts)) {
    routes();
  }

  ~RestServer() { stop(); }

  RestServer(const RestServer&) = delete;
  RestServer& operator=(const RestServer&) = delete;

  /// Binds to `port` (0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port) {
    port_ = port == 0 ? svr_.bind_to_any_port(host) : (svr_.bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
    return port_;
  }

  /// Serves until stop(); call after bind().
  void listen() { svr_.listen_after_bind(); }

  /// Serves on a background thread.
  void start() {
    thread_ = std::jthread([this] { listen(); });
    svr_.wait_until_ready();
  }

  void stop() {
    svr_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }

  /// Builds a request from a POST /adjudications body.
  AdjudicationRequest parse_request(const nlohmann::json& body) const {
    if (!body.is_object()) throw SchemaError("request body must be a JSON object");
    AdjudicationRequest req;
    req.id = body.value("id", std::string{});
    if (!req.id.empty()) check_record_id(req.id);
    req.case_id = body.value("case_id", std::string{});
    if (!body.contains("checklist")) throw SchemaError("missing 'checklist'");
    req.checklist = checklist_from_json(body["checklist"]);
    if (body.contains("documents")) {
      for (const auto& d : body["documents"]) req.documents.push_back(document_from_json(d));
    }
    if (body.contains("document_refs")) {
      if (opts_.documents_root.empty()) throw ConfigError("document_refs are not enabled on this server");
      const auto root = std::filesystem::weakly_canonical(opts_.documents_root);
      for (const auto& ref : body["document_refs"]) {
        const auto rel = ref.is_string() ? ref.get<std::string>() : ref.at("path").get<std::string>();
        const auto path = std::filesystem::weakly_canonical(root / rel);
        auto [r_end, _] = std::mismatch(root.begin(), root.end(), path.begin(), path.end());
        if (r_end != root.end()) throw ConfigError("document_ref '" + rel + "' escapes the documents root");
        std::optional<ChunkKind> kind;
        std::string id;
        if (ref.is_object()) {
          if (ref.contains("chunking")) kind = parse_chunking(ref["chunking"].get<std::string>());
          id = ref.value("id", std::string{});
        }
        req.documents.push_back(load_document(path, kind, id));
      }
    }
    if (req.documents.empty()) throw SchemaError("request has no documents");
    req.config = config_from_json(body.value("config", nlohmann::json::object()), opts_.defaults);
    return req;
  }

 private:
  template <typename Fn>
  static auto guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const std::exception& e) {
        detail::send_json(res, detail::status_for(e), {{"error", detail::error_name(e)}, {"message", e.what()}});
      }
    };
  }

  static nlohmann::json body_of(const httplib::Request& req) {
    auto j = nlohmann::json::parse(req.body.empty() ? "{}" : req.body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw SchemaError("request body must be a JSON object");
    return j;
  }

  static std::optional<std::uint64_t> version_of(const nlohmann::json& body) {
    if (!body.contains("version") || body["version"].is_null()) return std::nullopt;
    return body["version"].get<std::uint64_t>();
  }

  static std::string reviewer_of(const httplib::Request& req, const nlohmann::json& body) {
    auto r = body.value("reviewer", std::string{});
    if (r.empty()) r = req.get_header_value("X-Reviewer-Id");
    if (r.empty()) throw SchemaError("missing reviewer");
    return r;
  }

  void routes() {
    svr_.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      detail::send_json(res, 200, {{"status", "ok"}});
    });

    svr_.Post("/adjudications", guarded([this](const httplib::Request& req, httplib::Response& res) {
                auto id = service_.submit(parse_request(body_of(req)));
                res.set_header("Location", "/adjudications/" + id);
                detail::send_json(res, 202, {{"id", id}, {"status", "Pending"}});
              }));

    svr_.Get("/adjudications", guarded([this](const httplib::Request& req, httplib::Response& res) {
               std::optional<RecordStatus> status;
               if (req.has_param("status")) {
                 status = parse_status(req.get_param_value("status"));
                 if (!status) throw SchemaError("unknown status '" + req.get_param_value("status") + "'");
               }
               nlohmann::json out = nlohmann::json::array();
               for (const auto& r : service_.list(status)) out.push_back(detail::record_summary(r));
               detail::send_json(res, 200, out);
             }));

    svr_.Get(R"(/adjudications/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
               detail::send_json(res, 200, to_json(get_or_throw(req.matches[1])));
             }));

    svr_.Get(R"(/adjudications/([^/]+)/evidence/([^/]+))",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
               detail::send_json(res, 200, evidence_view(get_or_throw(req.matches[1]), req.matches[2]));
             }));

    svr_.Post(R"(/adjudications/([^/]+)/overrides)",
              guarded([this](const httplib::Request& req, httplib::Response& res) {
                const auto body = body_of(req);
                OverrideRequest o;
                o.record_id = req.matches[1];
                o.leaf_id = body.at("leaf_id").get<std::string>();
                auto j = parse_judgment(body.at("judgment").get<std::string>());
                if (!j) throw SchemaError("unknown judgment '" + body["judgment"].get<std::string>() + "'");
                o.judgment = *j;
                o.reviewer = reviewer_of(req, body);
                o.note = body.value("note", std::string{});
                o.version = version_of(body);
                detail::send_json(res, 200, to_json(service_.apply_override(o)));
              }));

    svr_.Post(R"(/adjudications/([^/]+)/overrides/([^/]+)/revert)",
              guarded([this](const httplib::Request& req, httplib::Response& res) {
                const auto body = body_of(req);
                detail::send_json(res, 200,
                                  to_json(service_.revert_override(req.matches[1], req.matches[2],
                                                                   reviewer_of(req, body),
                                                                   body.value("note", std::string{}),
                                                                   version_of(body))));
              }));

    svr_.set_logger([](const httplib::Request& req, const httplib::Response& res) {
      spdlog::debug("{} {} -> {}", req.method, req.path, res.status);
    });
  }

  AdjudicationRecord get_or_throw(const std::string& id) const {
    check_record_id(id);
    auto r = service_.get(id);
    if (!r) throw UnknownRecord("no record '" + id + "'");
    return *r;
  }

  AdjudicationService& service_;
  RestOptions opts_;
  httplib::Server svr_;
  std::jthread thread_;
  int port_ = -1;
};

}  // namespace priorauth
