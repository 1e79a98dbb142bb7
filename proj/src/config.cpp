#include "nl2api/config.hpp"

#include "nl2api/error.hpp"
#include "nl2api/util.hpp"

namespace nl2api {

using nlohmann::json;

std::string_view to_string(EmbeddingBackendKind k) {
  switch (k) {
    case EmbeddingBackendKind::Http: return "http";
    case EmbeddingBackendKind::Fixture: return "fixture";
    case EmbeddingBackendKind::Hashing: return "hashing";
  }
  return "hashing";
}

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& why) {
  throw Error(ErrorKind::MalformedConfig, "config key '" + key + "': " + why, key);
}

const json* section(const json& root, const char* name) {
  auto it = root.find(name);
  if (it == root.end() || it->is_null()) return nullptr;
  if (!it->is_object()) bad(name, "expected an object");
  return &*it;
}

template <typename T>
void read(const json* sec, const char* sec_name, const char* key, T& out) {
  if (!sec) return;
  auto it = sec->find(key);
  if (it == sec->end() || it->is_null()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    bad(std::string(sec_name) + "." + key, e.what());
  }
}

void read_ms(const json* sec, const char* sec_name, const char* key, std::chrono::milliseconds& out) {
  std::int64_t ms = out.count();
  read(sec, sec_name, key, ms);
  if (ms <= 0) bad(std::string(sec_name) + "." + key, "must be positive");
  out = std::chrono::milliseconds(ms);
}

void read_path(const json* sec, const char* sec_name, const char* key, const std::filesystem::path& base,
               std::filesystem::path& out) {
  std::string text;
  read(sec, sec_name, key, text);
  if (text.empty()) return;
  std::filesystem::path p(text);
  out = p.is_absolute() ? p : (base / p).lexically_normal();
}

}  // namespace

Config parse_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  json root = json::parse(json_text.begin(), json_text.end(), nullptr, false);
  if (root.is_discarded() || !root.is_object()) bad("<root>", "not a JSON object");

  Config c;
  if (const auto* s = section(root, "llm")) {
    read(s, "llm", "endpoint", c.llm.endpoint);
    read(s, "llm", "models", c.llm.models);
    read_ms(s, "llm", "timeout_ms", c.llm.timeout);
    read(s, "llm", "max_in_flight", c.llm.max_in_flight);
    read(s, "llm", "temperature", c.llm.temperature);
    read(s, "llm", "max_tokens", c.llm.max_tokens);
    read_path(s, "llm", "cassette", base_dir, c.llm.cassette);
    if (c.llm.models.empty()) bad("llm.models", "at least one model is required");
    if (c.llm.max_in_flight == 0) bad("llm.max_in_flight", "must be at least 1");
  }
  if (const auto* s = section(root, "embedding")) {
    read(s, "embedding", "endpoint", c.embedding.endpoint);
    read(s, "embedding", "model", c.embedding.model);
    read(s, "embedding", "dimension", c.embedding.dimension);
    std::string backend(to_string(c.embedding.backend));
    read(s, "embedding", "backend", backend);
    if (backend == "http") c.embedding.backend = EmbeddingBackendKind::Http;
    else if (backend == "fixture") c.embedding.backend = EmbeddingBackendKind::Fixture;
    else if (backend == "hashing") c.embedding.backend = EmbeddingBackendKind::Hashing;
    else bad("embedding.backend", "expected http, fixture or hashing");
    read_path(s, "embedding", "fixture", base_dir, c.embedding.fixture);
    if (c.embedding.dimension == 0) bad("embedding.dimension", "must be positive");
  }
  if (const auto* s = section(root, "api")) {
    read(s, "api", "rest_base", c.api.rest_base);
    read(s, "api", "graphql_url", c.api.graphql_url);
    read_path(s, "api", "cassette", base_dir, c.api.cassette);
    read(s, "api", "rate_per_sec", c.api.rate_per_sec);
    read_ms(s, "api", "timeout_ms", c.api.timeout);
    if (!(c.api.rate_per_sec > 0)) bad("api.rate_per_sec", "must be positive");
  }
  if (const auto* s = section(root, "rag")) {
    read(s, "rag", "k", c.rag.k);
    read_path(s, "rag", "index", base_dir, c.rag.index);
    std::string pool = c.rag.pool_all ? "all" : "dev";
    read(s, "rag", "pool", pool);
    if (pool != "dev" && pool != "all") bad("rag.pool", "expected dev or all");
    c.rag.pool_all = pool == "all";
    if (c.rag.k == 0) bad("rag.k", "must be at least 1");
  }
  if (const auto* s = section(root, "run")) {
    std::string mode(to_string(c.run.mode));
    read(s, "run", "mode", mode);
    try {
      c.run.mode = parse_run_mode(mode);
    } catch (const Error& e) {
      bad("run.mode", e.what());
    }
    read(s, "run", "test_fraction", c.run.test_fraction);
    read(s, "run", "seed", c.run.seed);
    read(s, "run", "jobs", c.run.jobs);
    if (!(c.run.test_fraction > 0 && c.run.test_fraction < 1)) bad("run.test_fraction", "must lie in (0, 1)");
    if (c.run.jobs == 0) bad("run.jobs", "must be at least 1");
  }
  if (const auto* s = section(root, "data")) {
    read_path(s, "data", "corpus", base_dir, c.data.corpus);
    read_path(s, "data", "dev_corpus", base_dir, c.data.dev_corpus);
    read_path(s, "data", "vocabulary", base_dir, c.data.vocabulary);
    read_path(s, "data", "schema", base_dir, c.data.schema);
    read_path(s, "data", "templates", base_dir, c.data.templates);
  }
  if (const auto* s = section(root, "agentic")) {
    std::string extractor;
    read(s, "agentic", "extractor_model", extractor);
    if (!extractor.empty()) c.agentic.extractor_model = extractor;
    read(s, "agentic", "pass_bindings", c.agentic.pass_bindings);
  }
  if (const auto* s = section(root, "service")) {
    read(s, "service", "host", c.service.host);
    read(s, "service", "port", c.service.port);
    read(s, "service", "cors_origin", c.service.cors_origin);
    read(s, "service", "result_cap", c.service.result_cap);
    read(s, "service", "redact_questions", c.service.redact_questions);
    if (c.service.port < 0 || c.service.port > 65535) bad("service.port", "out of range");
  }
  return c;
}

Config load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorKind::NotFound, "config not found: " + path.string(), path.string());
  auto base = std::filesystem::absolute(path).parent_path();
  auto c = parse_config(read_file(path), base);
  c.source = path;
  return c;
}

nlohmann::ordered_json Config::public_json() const {
  nlohmann::ordered_json j;
  j["llm"] = {{"endpoint", llm.endpoint},
              {"models", llm.models},
              {"timeout_ms", llm.timeout.count()},
              {"temperature", llm.temperature},
              {"max_tokens", llm.max_tokens}};
  j["embedding"] = {{"endpoint", embedding.endpoint},
                    {"model", embedding.model},
                    {"dimension", embedding.dimension},
                    {"backend", std::string(to_string(embedding.backend))}};
  j["api"] = {{"rest_base", api.rest_base}, {"graphql_url", api.graphql_url}, {"rate_per_sec", api.rate_per_sec}};
  j["rag"] = {{"k", rag.k}, {"pool", rag.pool_all ? "all" : "dev"}};
  j["run"] = {{"mode", std::string(to_string(run.mode))}, {"test_fraction", run.test_fraction}, {"seed", run.seed}};
  j["agentic"] = {{"extractor_model", agentic.extractor_model ? nlohmann::ordered_json(*agentic.extractor_model)
                                                                : nlohmann::ordered_json(nullptr)},
                  {"pass_bindings", agentic.pass_bindings}};
  j["service"] = {{"result_cap", service.result_cap}};
  return j;
}

}  // namespace nl2api
