#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "nl2api/corpus.hpp"
#include "nl2api/error.hpp"
#include "nl2api/llm_gateway.hpp"
#include "nl2api/query_model.hpp"
#include "nl2api/templates.hpp"
#include "nl2api/vector_index.hpp"

namespace nl2api {

enum class Strategy { PromptEngineering, Rag, Agentic };

inline constexpr std::size_t kDefaultRagK = 5;
inline constexpr std::size_t kStaticExamplesPerDialect = 4;

/// "prompt_engineering", "rag", "agentic".
std::string_view to_string(Strategy s);
/// Throws InvalidArgument naming the valid ids.
Strategy parse_strategy(std::string_view text);
const std::vector<Strategy>& all_strategies();

/// Instruction, question and context, rendered in that order.
struct PromptBundle {
  std::string instruction;
  std::string context;
  std::string question;
  Dialect dialect = Dialect::Rest;

  /// Throws InvalidArgument when a section is empty.
  void validate() const;
  /// system = instruction; user = question followed by context.
  std::vector<ChatMessage> messages() const;

  friend bool operator==(const PromptBundle&, const PromptBundle&) = default;
};

struct EntityBinding {
  std::string entity;
  std::string value;

  friend bool operator==(const EntityBinding&, const EntityBinding&) = default;
};

struct TraceError {
  ErrorKind kind = ErrorKind::InvalidArgument;
  std::string message;
};

struct GenerationTrace {
  std::string question;
  Strategy strategy = Strategy::PromptEngineering;
  std::string model;
  Dialect dialect = Dialect::Rest;
  std::vector<PromptBundle> prompts;
  std::vector<std::string> raw_outputs;
  std::optional<std::string> extracted_query;  // absent <=> generation failed
  std::optional<std::vector<EntityBinding>> bindings;
  std::optional<std::vector<std::string>> retrieved_examples;
  std::vector<std::string> warnings;
  std::optional<TraceError> error;

  nlohmann::json to_json() const;
  /// FNV-1a digest of the JSON form.
  std::string digest() const;
};

/// Attribute listing used by prompt engineering and RAG: every attribute with
/// its kind, description and (for enumerated attributes) every value.
std::string render_vocabulary(const AttributeVocabulary& vocab);
std::string render_examples(const std::vector<ExamplePair>& examples);

/// Throws MissingExamples when the schema has no static example for `dialect`.
PromptBundle build_prompt_engineering(std::string_view question, const SchemaContext& schema,
                                      const AttributeVocabulary& vocab, Dialect dialect,
                                      const PromptTemplates& templates);

struct RetrievedExample {
  std::string entry_id;
  double similarity = 0.0;
  ExamplePair pair;
};

/// The k most similar pool entries that carry a `dialect` query, in
/// similarity order.
std::vector<RetrievedExample> retrieve_examples(std::string_view question, const VectorIndex& index,
                                                const Corpus& pool, std::size_t k, Dialect dialect,
                                                EmbeddingBackend& embedder);

struct RagPrompt {
  PromptBundle bundle;
  std::vector<std::string> retrieved_ids;
};

RagPrompt build_rag(std::string_view question, const VectorIndex& index, const Corpus& pool, std::size_t k,
                    const SchemaContext& schema, const AttributeVocabulary& vocab, Dialect dialect,
                    EmbeddingBackend& embedder, const PromptTemplates& templates);

/// Parses `[entity: value]` lines; falls back to a JSON object or list of
/// pairs. Returns nothing (and no error) when neither form is present.
std::vector<EntityBinding> parse_bindings(std::string_view raw);

struct EntityExtraction {
  std::vector<EntityBinding> bindings;
  std::vector<std::string> warnings;
  PromptBundle prompt;
  std::string raw_output;
};

struct ChatParams {
  double temperature = 0.0;
  int max_tokens = 1024;
};

/// Agent 1. Bindings whose entity is not in the vocabulary are dropped with
/// a warning; a non-empty reply without any binding yields a ParseWarning.
/// Gateway errors propagate.
EntityExtraction extract_entities(std::string_view question, const AttributeVocabulary& vocab, Dialect dialect,
                                  ChatBackend& gateway, const std::string& model, const PromptTemplates& templates,
                                  ChatParams params = {});

/// Context fragment for agent 2: one block per distinct bound attribute.
/// Enumerated attributes list every allowed value; other kinds carry the
/// description only. Empty bindings give an empty fragment.
std::string resolve_entity_values(const std::vector<EntityBinding>& bindings, const AttributeVocabulary& vocab);

PromptBundle build_agentic_prompt(std::string_view question, const std::vector<EntityBinding>& bindings,
                                  std::string_view resolved_fragment, const std::vector<RetrievedExample>& examples,
                                  const SchemaContext& schema, Dialect dialect, const PromptTemplates& templates,
                                  bool pass_bindings = true);

struct GenerationDeps {
  const Corpus* rag_pool = nullptr;
  const AttributeVocabulary* vocab = nullptr;
  const SchemaContext* schema = nullptr;
  const VectorIndex* index = nullptr;
  EmbeddingBackend* embedder = nullptr;
  ChatBackend* chat = nullptr;
  const PromptTemplates* templates = nullptr;
  std::size_t k = kDefaultRagK;
  ChatParams params;
  std::optional<std::string> extractor_model;  // agent 1; defaults to the generation model
  bool pass_bindings = true;
};

/// Runs one strategy end to end. Never throws for upstream failures: the
/// trace then has no extracted query and carries the error.
GenerationTrace generate(std::string_view question, Strategy strategy, Dialect dialect, const std::string& model,
                         const GenerationDeps& deps);

}  // namespace nl2api
