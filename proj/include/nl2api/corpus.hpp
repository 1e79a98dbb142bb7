#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nl2api/query_model.hpp"

namespace nl2api {

/// One annotated sample: a question with the expert REST and/or GraphQL query.
struct CorpusEntry {
  std::string id;
  std::string question;
  std::optional<std::string> rest_query;
  std::optional<std::string> graphql_query;
  std::vector<std::string> tags;

  const std::optional<std::string>& query(Dialect d) const {
    return d == Dialect::Rest ? rest_query : graphql_query;
  }

  friend bool operator==(const CorpusEntry&, const CorpusEntry&) = default;
};

struct Corpus {
  std::vector<CorpusEntry> entries;

  std::size_t size() const noexcept { return entries.size(); }
  bool empty() const noexcept { return entries.empty(); }
  const CorpusEntry* find(std::string_view id) const;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

/// Reads line-delimited JSON records. Blank lines are skipped. Every record
/// is validated: non-empty unique id, non-empty question, at least one query,
/// and each query must parse.
///
/// Throws MalformedRecord (position = 1-based line), DuplicateId (subject =
/// id), UnparseableQuery (subject = id, message names the dialect and cause).
Corpus load_corpus(const std::filesystem::path& path);
Corpus read_corpus(std::istream& in);

void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
std::string corpus_to_jsonl(const Corpus& corpus);

struct CorpusSplit {
  Corpus dev;
  Corpus test;
};

/// Deterministic partition. |test| = round(fraction * n) clamped to [1, n-1];
/// both parts keep the original file order.
/// Throws CorpusTooSmall for fewer than two entries and InvalidArgument for a
/// fraction outside (0, 1).
CorpusSplit split_corpus(const Corpus& corpus, double test_fraction, std::uint64_t seed);

enum class AttributeKind { Enumerated, Numeric, FreeText, Identifier };

std::string_view to_string(AttributeKind k);

struct AttributeSpec {
  AttributeKind kind = AttributeKind::FreeText;
  std::vector<std::string> allowed_values;  // file order, unique
  std::string description;
};

struct AttributeVocabulary {
  std::map<std::string, AttributeSpec> attributes;

  const AttributeSpec* find(std::string_view name) const;
  bool contains(std::string_view name) const { return find(name) != nullptr; }
  /// Case-insensitive lookup of an enumerated value; returns the declared token.
  std::optional<std::string> resolve(std::string_view attribute, std::string_view value) const;
};

/// Top-level JSON object keyed by attribute name:
///   {"negotiation_status": {"kind": "enumerated", "values": [...], "description": "..."}}
/// Throws MalformedVocabulary or EnumeratedWithoutValues(subject = attribute).
AttributeVocabulary load_vocabulary(const std::filesystem::path& path);
AttributeVocabulary parse_vocabulary(std::string_view json_text);

struct ExamplePair {
  std::string question;
  std::string query;

  friend bool operator==(const ExamplePair&, const ExamplePair&) = default;
};

struct SchemaContext {
  std::string schema_text;
  std::map<Dialect, std::string> api_rules;
  std::map<Dialect, std::vector<ExamplePair>> static_examples;

  const std::string& rules(Dialect d) const;
  const std::vector<ExamplePair>& examples(Dialect d) const;
};

/// JSON document with `schema_text` (or `schema_file`, relative to the
/// document), `api_rules` {"REST": ..., "GRAPHQL": ...} and optional
/// `examples` {"REST": [{"question", "query"}], ...}.
SchemaContext load_schema_context(const std::filesystem::path& path);

/// Fills dialects that have no static examples with the first `per_dialect`
/// dev entries carrying a query in that dialect.
void fill_static_examples(SchemaContext& schema, const Corpus& dev, std::size_t per_dialect = 4);

/// Lint: enumerated values referenced by corpus query filters that do not
/// resolve in the vocabulary, and filter attributes unknown to it. The base
/// attribute of a dotted GraphQL path is its first segment.
std::vector<std::string> lint_corpus(const Corpus& corpus, const AttributeVocabulary& vocab);

}  // namespace nl2api
