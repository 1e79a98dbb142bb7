#include "nl2api/runtime.hpp"

#include <cstdlib>

#include "nl2api/error.hpp"

namespace nl2api {

namespace {

std::filesystem::path require_path(const std::filesystem::path& p, const char* key) {
  if (p.empty()) throw Error(ErrorKind::MalformedConfig, std::string("config key '") + key + "' is required", key);
  return p;
}

std::string token_from_env() {
  const char* v = std::getenv("NL2API_LLM_TOKEN");
  return v ? std::string(v) : std::string();
}

}  // namespace

EmbedderStack make_embedder(const EmbeddingSettings& emb, RunMode mode, HttpClient& http) {
  EmbedderStack stack;
  auto load_fixture = [&] {
    if (emb.fixture.empty() || !std::filesystem::exists(emb.fixture))
      throw Error(ErrorKind::BackendUnavailable, "embedding fixture not found: " +
                                                     (emb.fixture.empty() ? std::string("(embedding.fixture unset)")
                                                                          : emb.fixture.string()));
    return std::make_unique<FixtureEmbeddingBackend>(FixtureEmbeddingBackend::load(emb.fixture));
  };
  switch (emb.backend) {
    case EmbeddingBackendKind::Hashing:
      stack.top = std::make_unique<HashingEmbeddingBackend>(emb.dimension);
      break;
    case EmbeddingBackendKind::Fixture:
      stack.top = load_fixture();
      break;
    case EmbeddingBackendKind::Http:
      if (mode == RunMode::Cassette) {
        stack.top = load_fixture();
      } else if (mode == RunMode::Record && !emb.fixture.empty()) {
        stack.base = std::make_unique<HttpEmbeddingBackend>(http, emb.endpoint, emb.model, emb.dimension);
        stack.top = std::make_unique<RecordingEmbeddingBackend>(*stack.base, emb.fixture);
      } else {
        stack.top = std::make_unique<HttpEmbeddingBackend>(http, emb.endpoint, emb.model, emb.dimension);
      }
      break;
  }
  return stack;
}

Runtime::Runtime(Config config, RuntimeOverrides overrides)
    : config_(std::move(config)), mode_(overrides.mode.value_or(config_.run.mode)) {
  // Data.
  corpus_ = load_corpus(overrides.corpus ? *overrides.corpus : require_path(config_.data.corpus, "data.corpus"));
  if (!overrides.dev_corpus && !config_.data.dev_corpus.empty()) overrides.dev_corpus = config_.data.dev_corpus;
  if (overrides.dev_corpus) {
    eval_set_ = corpus_;
    rag_pool_ = load_corpus(*overrides.dev_corpus);
  } else {
    auto split = split_corpus(corpus_, config_.run.test_fraction, config_.run.seed);
    eval_set_ = std::move(split.test);
    rag_pool_ = config_.rag.pool_all ? corpus_ : std::move(split.dev);
  }
  vocab_ = load_vocabulary(require_path(config_.data.vocabulary, "data.vocabulary"));
  schema_ = load_schema_context(require_path(config_.data.schema, "data.schema"));
  fill_static_examples(schema_, rag_pool_, kStaticExamplesPerDialect);
  templates_ = config_.data.templates.empty() ? PromptTemplates::defaults() : PromptTemplates::load(config_.data.templates);

  http_ = overrides.http ? overrides.http : std::make_shared<HttplibClient>();

  embedder_ = make_embedder(config_.embedding, mode_, *http_);

  // Chat.
  if (overrides.chat) {
    chat_ = overrides.chat;
  } else if (mode_ == RunMode::Cassette) {
    const auto& path = require_path(config_.llm.cassette, "llm.cassette");
    if (!std::filesystem::exists(path)) throw Error(ErrorKind::BackendUnavailable, "LLM cassette not found: " + path.string());
    chat_ = std::make_shared<ScriptedChatBackend>(ScriptedChatBackend::load(path));
  } else {
    auto token = overrides.token ? *overrides.token : token_from_env();
    if (token.empty())
      throw Error(ErrorKind::MissingCredential, "NL2API_LLM_TOKEN is not set; live and record modes need an LLM token");
    LiveChatOptions opts{config_.llm.endpoint, token, config_.llm.timeout, static_cast<int>(config_.llm.max_in_flight)};
    auto live = std::make_shared<LiveChatBackend>(*http_, std::move(opts));
    if (mode_ == RunMode::Record) {
      base_chat_ = std::move(live);
      chat_ = std::make_shared<RecordingChatBackend>(*base_chat_, require_path(config_.llm.cassette, "llm.cassette"));
    } else {
      chat_ = std::move(live);
    }
  }

  // API.
  if (mode_ == RunMode::Cassette) {
    const auto& path = require_path(config_.api.cassette, "api.cassette");
    if (!std::filesystem::exists(path)) throw Error(ErrorKind::BackendUnavailable, "API cassette not found: " + path.string());
    api_cassette_ = ApiCassette::open(path);
  } else if (mode_ == RunMode::Record) {
    api_cassette_ = ApiCassette::open(require_path(config_.api.cassette, "api.cassette"));
  }
  if (mode_ != RunMode::Cassette) limiter_ = std::make_shared<TokenBucket>(config_.api.rate_per_sec);
  ExecutorConfig exec{config_.api.rest_base, config_.api.graphql_url, config_.api.timeout};
  executor_ = std::make_unique<ApiExecutor>(std::move(exec), mode_, mode_ == RunMode::Cassette ? nullptr : http_.get(),
                                            api_cassette_, limiter_);
}

Runtime::~Runtime() {
  if (limiter_) limiter_->shutdown();
}

const VectorIndex& Runtime::index() {
  std::call_once(index_once_, [this] {
    const auto& path = config_.rag.index;
    if (!path.empty() && std::filesystem::exists(path)) {
      auto loaded = load_index(path);
      if (loaded.backend_id != embedder_.top->id() || loaded.dimension != embedder_.top->dimension())
        throw Error(ErrorKind::DimensionMismatch,
                    "index " + path.string() + " was built with " + loaded.backend_id + "/" +
                        std::to_string(loaded.dimension) + " but the embedder is " + embedder_.top->id() + "/" +
                        std::to_string(embedder_.top->dimension()));
      index_ = std::move(loaded);
    } else {
      index_ = build_index(rag_pool_, embedder_.get());
    }
  });
  return *index_;
}

GenerationDeps Runtime::deps(bool with_index) {
  GenerationDeps d;
  d.rag_pool = &rag_pool_;
  d.vocab = &vocab_;
  d.schema = &schema_;
  d.embedder = embedder_.top.get();
  d.chat = chat_.get();
  d.templates = &templates_;
  d.k = config_.rag.k;
  d.params = {config_.llm.temperature, config_.llm.max_tokens};
  d.extractor_model = config_.agentic.extractor_model;
  d.pass_bindings = config_.agentic.pass_bindings;
  if (with_index) d.index = &index();
  return d;
}

}  // namespace nl2api
