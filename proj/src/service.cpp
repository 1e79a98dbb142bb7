#include "nl2api/service.hpp"

#include <algorithm>

#include <httplib.h>

#include "nl2api/error.hpp"
#include "nl2api/util.hpp"

namespace nl2api {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ServiceReply error_reply(int status, std::string code, std::string message) {
  ordered_json body;
  body["error"] = std::move(code);
  body["message"] = std::move(message);
  return {status, std::move(body)};
}

// Upstream failures surface as 502 with a stable error code.
ServiceReply upstream_reply(const Error& e, bool from_api) {
  if (from_api) return error_reply(502, "api_error", e.what());
  switch (e.kind()) {
    case ErrorKind::Timeout: return error_reply(502, "llm_timeout", e.what());
    case ErrorKind::Unauthorized:
    case ErrorKind::MissingCredential: return error_reply(502, "llm_unauthorized", e.what());
    case ErrorKind::BackendUnavailable:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::MalformedIndex: return error_reply(502, "embedding_error", e.what());
    case ErrorKind::CassetteMiss:
    case ErrorKind::UpstreamError:
    case ErrorKind::Transport:
    case ErrorKind::RateLimited: return error_reply(502, "llm_error", e.what());
    default: return error_reply(500, "internal_error", e.what());
  }
}

// The deal records of a payload, following the same envelope rules as the
// id extraction.
json result_records(const json& payload, Dialect dialect, const std::string& root) {
  const json* collection = nullptr;
  if (dialect == Dialect::Rest) {
    if (payload.is_array()) collection = &payload;
    else if (payload.is_object() && payload.contains("results")) collection = &payload["results"];
    else if (payload.is_object() && payload.contains("id")) return json::array({payload});
  } else if (payload.is_object() && payload.contains("data") && payload["data"].is_object()) {
    const auto& data = payload["data"];
    if (auto it = data.find(root); !root.empty() && it != data.end()) collection = &*it;
    else if (!data.empty()) collection = &data.begin().value();
  }
  if (!collection || collection->is_null()) return json::array();
  if (collection->is_object()) return json::array({*collection});
  if (!collection->is_array()) return json::array();
  return *collection;
}

}  // namespace

Service::Service(std::shared_ptr<Runtime> runtime, std::ostream* log) : runtime_(std::move(runtime)), log_(log) {
  if (!runtime_) throw Error(ErrorKind::InvalidArgument, "service needs a runtime");
}

Service::~Service() { stop(); }

std::shared_ptr<Runtime> Service::snapshot() const {
  std::lock_guard lock(mutex_);
  return runtime_;
}

void Service::reload(std::shared_ptr<Runtime> runtime) {
  if (!runtime) throw Error(ErrorKind::InvalidArgument, "service needs a runtime");
  std::lock_guard lock(mutex_);
  runtime_ = std::move(runtime);
}

ServiceReply Service::handle_ask(std::string_view body_text, bool full) {
  auto rt = snapshot();
  const auto& cfg = rt->config();

  json req = json::parse(body_text.begin(), body_text.end(), nullptr, false);
  if (req.is_discarded() || !req.is_object()) return error_reply(400, "bad_request", "body must be a JSON object");

  auto text_field = [&](const char* name) -> std::string {
    auto it = req.find(name);
    return it != req.end() && it->is_string() ? trim(it->get<std::string>()) : std::string();
  };
  auto question = text_field("question");
  if (question.empty()) return error_reply(400, "bad_request", "question must be a non-empty string");

  Dialect dialect;
  Strategy strategy;
  try {
    dialect = parse_dialect(text_field("dialect"));
    strategy = parse_strategy(text_field("strategy"));
  } catch (const Error& e) {
    return error_reply(400, "bad_request", e.what());
  }
  auto model = text_field("model");
  if (model.empty()) model = cfg.llm.models.front();
  if (std::find(cfg.llm.models.begin(), cfg.llm.models.end(), model) == cfg.llm.models.end())
    return error_reply(400, "bad_request", "model '" + model + "' is not configured");

  auto finish = [&](ServiceReply reply) {
    if (log_) {
      ordered_json line;
      line["event"] = "ask";
      line["question"] = cfg.service.redact_questions ? std::string("[redacted]") : question;
      line["strategy"] = std::string(to_string(strategy));
      line["model"] = model;
      line["dialect"] = std::string(to_string(dialect));
      line["status"] = reply.status;
      std::lock_guard lock(log_mutex_);
      *log_ << line.dump() << std::endl;
    }
    return reply;
  };

  GenerationTrace trace;
  try {
    trace = generate(question, strategy, dialect, model, rt->deps(strategy != Strategy::PromptEngineering));
  } catch (const Error& e) {
    return finish(upstream_reply(e, false));
  }

  ordered_json body;
  body["query"] = trace.extracted_query.value_or("");
  body["valid"] = false;
  body["results"] = json::array();
  body["result_count"] = 0;
  body["truncated"] = false;
  body["strategy"] = std::string(to_string(strategy));
  body["model"] = model;
  body["dialect"] = std::string(to_string(dialect));
  body["trace"] = trace.digest();
  body["warnings"] = trace.warnings;

  if (trace.error) {
    if (trace.error->kind != ErrorKind::NoQueryFound) return finish(upstream_reply(Error(trace.error->kind, trace.error->message), false));
    body["error"] = "model produced no query";
    return finish({200, std::move(body)});
  }

  ExecutionResult result;
  try {
    result = rt->executor().execute(*trace.extracted_query, dialect);
  } catch (const Error& e) {
    return finish(upstream_reply(e, true));
  }
  for (const auto& w : result.warnings) body["warnings"].push_back(w);

  if (!result.valid) {
    body["error"] = result.status == 0 ? std::string("query was not submitted")
                                       : "the API rejected the query (HTTP " + std::to_string(result.status) + ")";
    return finish({200, std::move(body)});
  }

  std::string root;
  if (dialect == Dialect::GraphQL) {
    try {
      root = parse_graphql(*trace.extracted_query).resource;
    } catch (const Error&) {
    }
  }
  auto records = result_records(*result.payload, dialect, root);
  const std::size_t total = records.size();
  const std::size_t cap = cfg.service.result_cap;
  if (!full && total > cap) records.erase(records.begin() + static_cast<std::ptrdiff_t>(cap), records.end());
  body["valid"] = true;
  body["results"] = std::move(records);
  body["result_count"] = total;
  body["truncated"] = !full && total > cap;
  return finish({200, std::move(body)});
}

ServiceReply Service::handle_health() const {
  auto rt = snapshot();
  ordered_json body;
  body["status"] = "ok";
  body["version"] = kVersion;
  body["strategies"] = json::array();
  for (auto s : all_strategies()) body["strategies"].push_back(std::string(to_string(s)));
  body["models"] = rt->config().llm.models;
  body["dialects"] = {"REST", "GRAPHQL"};
  body["mode"] = std::string(to_string(rt->mode()));
  body["llm_backend"] = rt->llm_backend() == BackendKind::Scripted ? "scripted" : "live";
  body["embedding_backend"] = rt->embedder().id();
  body["result_cap"] = rt->config().service.result_cap;
  return {200, std::move(body)};
}

ServiceReply Service::handle_config() const {
  auto rt = snapshot();
  auto body = rt->config().public_json();
  body["run"]["mode"] = std::string(to_string(rt->mode()));
  return {200, std::move(body)};
}

void Service::install_routes() {
  auto send = [](httplib::Response& res, const ServiceReply& reply) {
    res.status = reply.status;
    res.set_content(reply.body.dump(), "application/json");
  };

  server_->set_post_routing_handler([this](const httplib::Request&, httplib::Response& res) {
    const auto& origin = snapshot()->config().service.cors_origin;
    if (origin.empty()) return;
    res.set_header("Access-Control-Allow-Origin", origin);
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
  });
  server_->Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  server_->Post("/ask", [this, send](const httplib::Request& req, httplib::Response& res) {
    bool full = req.has_param("full") && to_lower(req.get_param_value("full")) == "true";
    send(res, handle_ask(req.body, full));
  });
  server_->Get("/health", [this, send](const httplib::Request&, httplib::Response& res) { send(res, handle_health()); });
  server_->Get("/config", [this, send](const httplib::Request&, httplib::Response& res) { send(res, handle_config()); });
}

int Service::bind(const std::string& host, int port) {
  server_ = std::make_unique<httplib::Server>();
  install_routes();
  if (port == 0) return server_->bind_to_any_port(host);
  return server_->bind_to_port(host, port) ? port : -1;
}

void Service::run() {
  if (!server_) throw Error(ErrorKind::InvalidArgument, "service is not bound");
  server_->listen_after_bind();
}

void Service::stop() {
  if (server_) server_->stop();
}

}  // namespace nl2api
