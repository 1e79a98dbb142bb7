#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "nl2api/api_executor.hpp"
#include "nl2api/config.hpp"
#include "nl2api/corpus.hpp"
#include "nl2api/http_client.hpp"
#include "nl2api/llm_gateway.hpp"
#include "nl2api/strategies.hpp"
#include "nl2api/templates.hpp"
#include "nl2api/vector_index.hpp"

namespace nl2api {

/// An embedder plus the backend it wraps, if any.
struct EmbedderStack {
  std::unique_ptr<EmbeddingBackend> base;
  std::unique_ptr<EmbeddingBackend> top;

  EmbeddingBackend& get() { return *top; }
};

/// Hashing and fixture backends ignore the mode. The HTTP backend replays
/// embedding.fixture in cassette mode and records into it in record mode.
EmbedderStack make_embedder(const EmbeddingSettings& settings, RunMode mode, HttpClient& http);

struct RuntimeOverrides {
  std::optional<RunMode> mode;
  std::optional<std::filesystem::path> corpus;
  /// When set, the whole corpus is evaluated and this file is the RAG pool.
  std::optional<std::filesystem::path> dev_corpus;
  /// LLM bearer token; read from NL2API_LLM_TOKEN when absent.
  std::optional<std::string> token;
  /// Replaces the HTTP transport (tests).
  std::shared_ptr<HttpClient> http;
  /// Replaces the chat backend chosen by the mode (fixture tooling, tests).
  std::shared_ptr<ChatBackend> chat;
};

/// Everything a run needs, wired from a Config: data files, backends chosen
/// by run mode, executor. Construction fails fast with the module error.
class Runtime {
 public:
  explicit Runtime(Config config, RuntimeOverrides overrides = {});
  ~Runtime();

  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  const Config& config() const noexcept { return config_; }
  RunMode mode() const noexcept { return mode_; }

  const Corpus& corpus() const noexcept { return corpus_; }
  /// Samples scored by `eval`: the test split, or the whole corpus when an
  /// explicit dev corpus was given.
  const Corpus& eval_set() const noexcept { return eval_set_; }
  const Corpus& rag_pool() const noexcept { return rag_pool_; }
  const AttributeVocabulary& vocabulary() const noexcept { return vocab_; }
  const SchemaContext& schema() const noexcept { return schema_; }
  const PromptTemplates& templates() const noexcept { return templates_; }

  EmbeddingBackend& embedder() { return embedder_.get(); }
  ChatBackend& chat() { return *chat_; }
  const ApiExecutor& executor() const { return *executor_; }
  BackendKind llm_backend() const { return chat_->kind(); }

  /// Loaded from rag.index when that file exists, otherwise built from the
  /// RAG pool on first use. Thread-safe.
  const VectorIndex& index();

  /// `with_index` = false skips the index (prompt engineering only).
  GenerationDeps deps(bool with_index = true);

 private:
  Config config_;
  RunMode mode_;
  Corpus corpus_;
  Corpus eval_set_;
  Corpus rag_pool_;
  AttributeVocabulary vocab_;
  SchemaContext schema_;
  PromptTemplates templates_;

  std::shared_ptr<HttpClient> http_;
  EmbedderStack embedder_;
  std::shared_ptr<ChatBackend> base_chat_;
  std::shared_ptr<ChatBackend> chat_;
  std::shared_ptr<ApiCassette> api_cassette_;
  std::shared_ptr<TokenBucket> limiter_;
  std::unique_ptr<ApiExecutor> executor_;

  std::once_flag index_once_;
  std::optional<VectorIndex> index_;
};

}  // namespace nl2api
