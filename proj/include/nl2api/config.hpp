#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nl2api/api_executor.hpp"

namespace nl2api {

struct LlmSettings {
  std::string endpoint = "http://127.0.0.1:8000/v1/chat/completions";
  std::vector<std::string> models = {"Codestral-22B"};
  std::chrono::milliseconds timeout{120000};
  std::size_t max_in_flight = 4;
  double temperature = 0.0;
  int max_tokens = 1024;
  std::filesystem::path cassette;
};

enum class EmbeddingBackendKind { Http, Fixture, Hashing };

struct EmbeddingSettings {
  std::string endpoint = "http://127.0.0.1:8001/embed";
  std::string model = "all-mpnet-base-v2";
  std::size_t dimension = 768;
  EmbeddingBackendKind backend = EmbeddingBackendKind::Hashing;
  std::filesystem::path fixture;
};

struct ApiSettings {
  std::string rest_base = "https://landmatrix.org/api/";
  std::string graphql_url = "https://landmatrix.org/graphql/";
  std::filesystem::path cassette;
  double rate_per_sec = 2.0;
  std::chrono::milliseconds timeout{30000};
};

struct RagSettings {
  std::size_t k = 5;
  std::filesystem::path index;  // built in memory from the pool when empty or missing
  bool pool_all = false;        // false: dev split only
};

struct RunSettings {
  RunMode mode = RunMode::Cassette;
  double test_fraction = 0.2;
  std::uint64_t seed = 42;
  std::size_t jobs = 1;
};

struct DataSettings {
  std::filesystem::path corpus;
  /// Optional retrieval pool; when set, `eval` scores the whole corpus.
  std::filesystem::path dev_corpus;
  std::filesystem::path vocabulary;
  std::filesystem::path schema;
  std::filesystem::path templates;  // optional directory of <name>.txt overrides
};

struct AgenticSettings {
  std::optional<std::string> extractor_model;
  bool pass_bindings = true;
};

struct ServiceSettings {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string cors_origin;
  std::size_t result_cap = 100;
  bool redact_questions = false;
};

/// Nested JSON document; relative paths resolve against the file's directory.
struct Config {
  LlmSettings llm;
  EmbeddingSettings embedding;
  ApiSettings api;
  RagSettings rag;
  RunSettings run;
  DataSettings data;
  AgenticSettings agentic;
  ServiceSettings service;
  std::filesystem::path source;

  /// Settings safe to show to clients (no credentials, no local paths).
  nlohmann::ordered_json public_json() const;
};

/// Throws NotFound or MalformedConfig.
Config load_config(const std::filesystem::path& path);
Config parse_config(std::string_view json_text, const std::filesystem::path& base_dir);

std::string_view to_string(EmbeddingBackendKind k);

}  // namespace nl2api
