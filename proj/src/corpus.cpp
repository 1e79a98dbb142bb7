#include "nl2api/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "nl2api/error.hpp"
#include "nl2api/util.hpp"

namespace nl2api {

using nlohmann::json;
using nlohmann::ordered_json;

const CorpusEntry* Corpus::find(std::string_view id) const {
  for (const auto& e : entries)
    if (e.id == id) return &e;
  return nullptr;
}

namespace {

[[noreturn]] void malformed(std::size_t line, const std::string& why) {
  throw Error(ErrorKind::MalformedRecord, "corpus line " + std::to_string(line) + ": " + why, {},
              static_cast<std::int64_t>(line));
}

std::optional<std::string> optional_text(const json& record, const char* key, std::size_t line) {
  auto it = record.find(key);
  if (it == record.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) malformed(line, std::string("field '") + key + "' must be a string");
  auto text = trim(it->get<std::string>());
  if (text.empty()) return std::nullopt;
  return it->get<std::string>();
}

CorpusEntry parse_record(const std::string& text, std::size_t line) {
  json record;
  try {
    record = json::parse(text);
  } catch (const json::parse_error& e) {
    malformed(line, e.what());
  }
  if (!record.is_object()) malformed(line, "record is not an object");

  CorpusEntry entry;
  auto id = record.find("id");
  if (id == record.end() || !id->is_string() || id->get<std::string>().empty())
    malformed(line, "missing or empty 'id'");
  entry.id = id->get<std::string>();
  auto question = record.find("question");
  if (question == record.end() || !question->is_string() || trim(question->get<std::string>()).empty())
    malformed(line, "missing or empty 'question'");
  entry.question = question->get<std::string>();
  entry.rest_query = optional_text(record, "rest_query", line);
  entry.graphql_query = optional_text(record, "graphql_query", line);
  if (!entry.rest_query && !entry.graphql_query) malformed(line, "record has neither rest_query nor graphql_query");
  if (auto tags = record.find("tags"); tags != record.end() && !tags->is_null()) {
    if (!tags->is_array()) malformed(line, "'tags' must be a list");
    for (const auto& t : *tags) {
      if (!t.is_string()) malformed(line, "'tags' must contain strings");
      entry.tags.push_back(t.get<std::string>());
    }
  }
  return entry;
}

void validate_queries(const CorpusEntry& entry) {
  for (auto dialect : {Dialect::Rest, Dialect::GraphQL}) {
    const auto& q = entry.query(dialect);
    if (!q) continue;
    try {
      parse_query(*q, dialect);
    } catch (const Error& e) {
      throw Error(ErrorKind::UnparseableQuery,
                  "entry '" + entry.id + "': " + std::string(to_string(dialect)) + " query does not parse: " + e.what(),
                  entry.id);
    }
  }
}

}  // namespace

Corpus read_corpus(std::istream& in) {
  Corpus corpus;
  std::set<std::string> seen;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    auto entry = parse_record(line, number);
    if (!seen.insert(entry.id).second)
      throw Error(ErrorKind::DuplicateId, "duplicate corpus id '" + entry.id + "'", entry.id,
                  static_cast<std::int64_t>(number));
    validate_queries(entry);
    corpus.entries.push_back(std::move(entry));
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::NotFound, "corpus not found: " + path.string(), path.string());
  return read_corpus(in);
}

std::string corpus_to_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& e : corpus.entries) {
    ordered_json record;
    record["id"] = e.id;
    record["question"] = e.question;
    record["rest_query"] = e.rest_query ? ordered_json(*e.rest_query) : ordered_json(nullptr);
    record["graphql_query"] = e.graphql_query ? ordered_json(*e.graphql_query) : ordered_json(nullptr);
    record["tags"] = e.tags;
    out += record.dump() + "\n";
  }
  return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  write_file(path, corpus_to_jsonl(corpus));
}

CorpusSplit split_corpus(const Corpus& corpus, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw Error(ErrorKind::InvalidArgument, "test fraction must lie in (0, 1)");
  const auto n = corpus.size();
  if (n < 2) throw Error(ErrorKind::CorpusTooSmall, "cannot split a corpus of " + std::to_string(n) + " entries");

  auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);

  // Fisher-Yates with an explicit modulo keeps the permutation identical
  // across standard library implementations.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng() % (i + 1)]);

  std::vector<bool> in_test(n, false);
  for (std::size_t i = 0; i < n_test; ++i) in_test[order[i]] = true;

  CorpusSplit split;
  for (std::size_t i = 0; i < n; ++i) (in_test[i] ? split.test : split.dev).entries.push_back(corpus.entries[i]);
  return split;
}

// ---------------------------------------------------------------------------
// Vocabulary

std::string_view to_string(AttributeKind k) {
  switch (k) {
    case AttributeKind::Enumerated: return "enumerated";
    case AttributeKind::Numeric: return "numeric";
    case AttributeKind::FreeText: return "free_text";
    case AttributeKind::Identifier: return "identifier";
  }
  return "free_text";
}

const AttributeSpec* AttributeVocabulary::find(std::string_view name) const {
  auto it = attributes.find(std::string(name));
  return it == attributes.end() ? nullptr : &it->second;
}

std::optional<std::string> AttributeVocabulary::resolve(std::string_view attribute, std::string_view value) const {
  const auto* spec = find(attribute);
  if (!spec) return std::nullopt;
  auto wanted = to_lower(trim(value));
  for (const auto& v : spec->allowed_values)
    if (to_lower(v) == wanted) return v;
  return std::nullopt;
}

AttributeVocabulary parse_vocabulary(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::MalformedVocabulary, std::string("vocabulary is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorKind::MalformedVocabulary, "vocabulary must be an object keyed by attribute");

  AttributeVocabulary vocab;
  for (const auto& [name, body] : doc.items()) {
    if (name.empty()) throw Error(ErrorKind::MalformedVocabulary, "empty attribute name");
    if (!body.is_object()) throw Error(ErrorKind::MalformedVocabulary, "attribute '" + name + "' must be an object", name);
    AttributeSpec spec;
    auto kind = body.value("kind", std::string{});
    if (kind == "enumerated") spec.kind = AttributeKind::Enumerated;
    else if (kind == "numeric") spec.kind = AttributeKind::Numeric;
    else if (kind == "free_text") spec.kind = AttributeKind::FreeText;
    else if (kind == "identifier") spec.kind = AttributeKind::Identifier;
    else throw Error(ErrorKind::MalformedVocabulary, "attribute '" + name + "' has unknown kind '" + kind + "'", name);

    if (auto values = body.find("values"); values != body.end() && !values->is_null()) {
      if (!values->is_array())
        throw Error(ErrorKind::MalformedVocabulary, "values of '" + name + "' must be a list", name);
      std::set<std::string> seen;
      for (const auto& v : *values) {
        std::string token = v.is_string() ? v.get<std::string>() : v.dump();
        if (seen.insert(token).second) spec.allowed_values.push_back(token);
      }
    }
    if (auto d = body.find("description"); d != body.end() && d->is_string()) spec.description = *d;
    if (spec.kind == AttributeKind::Enumerated && spec.allowed_values.empty())
      throw Error(ErrorKind::EnumeratedWithoutValues, "enumerated attribute '" + name + "' lists no values", name);
    vocab.attributes.emplace(name, std::move(spec));
  }
  return vocab;
}

AttributeVocabulary load_vocabulary(const std::filesystem::path& path) {
  return parse_vocabulary(read_file(path));
}

// ---------------------------------------------------------------------------
// Schema context

const std::string& SchemaContext::rules(Dialect d) const {
  static const std::string kEmpty;
  auto it = api_rules.find(d);
  return it == api_rules.end() ? kEmpty : it->second;
}

const std::vector<ExamplePair>& SchemaContext::examples(Dialect d) const {
  static const std::vector<ExamplePair> kEmpty;
  auto it = static_examples.find(d);
  return it == static_examples.end() ? kEmpty : it->second;
}

namespace {

std::string text_block(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::vector<std::string> lines;
    for (const auto& line : v) lines.push_back(line.is_string() ? line.get<std::string>() : line.dump());
    return join(lines, "\n");
  }
  return {};
}

}  // namespace

SchemaContext load_schema_context(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::MalformedConfig, "schema context " + path.string() + ": " + e.what());
  }
  SchemaContext ctx;
  if (doc.contains("schema_file")) {
    ctx.schema_text = read_file(path.parent_path() / doc["schema_file"].get<std::string>());
  } else {
    ctx.schema_text = text_block(doc.value("schema_text", json{}));
  }
  if (auto rules = doc.find("api_rules"); rules != doc.end()) {
    if (rules->is_object()) {
      for (const auto& [k, v] : rules->items()) ctx.api_rules[parse_dialect(k)] = text_block(v);
    } else {
      auto text = text_block(*rules);
      ctx.api_rules[Dialect::Rest] = text;
      ctx.api_rules[Dialect::GraphQL] = text;
    }
  }
  if (auto examples = doc.find("examples"); examples != doc.end() && examples->is_object()) {
    for (const auto& [k, list] : examples->items()) {
      auto& out = ctx.static_examples[parse_dialect(k)];
      for (const auto& pair : list) out.push_back({pair.at("question"), pair.at("query")});
    }
  }
  return ctx;
}

void fill_static_examples(SchemaContext& schema, const Corpus& dev, std::size_t per_dialect) {
  for (auto dialect : {Dialect::Rest, Dialect::GraphQL}) {
    auto& examples = schema.static_examples[dialect];
    if (!examples.empty()) continue;
    for (const auto& e : dev.entries) {
      if (examples.size() >= per_dialect) break;
      if (const auto& q = e.query(dialect)) examples.push_back({e.question, *q});
    }
  }
}

std::vector<std::string> lint_corpus(const Corpus& corpus, const AttributeVocabulary& vocab) {
  std::vector<std::string> warnings;
  for (const auto& e : corpus.entries) {
    for (auto dialect : {Dialect::Rest, Dialect::GraphQL}) {
      const auto& text = e.query(dialect);
      if (!text) continue;
      auto q = parse_query(*text, dialect);
      for (const auto& f : q.filters) {
        auto base = f.attribute().substr(0, f.attribute().find('.'));
        const auto* spec = vocab.find(base);
        if (!spec) {
          warnings.push_back(e.id + " [" + std::string(to_string(dialect)) + "]: attribute '" + f.attribute() +
                             "' is not in the vocabulary");
          continue;
        }
        if (spec->kind != AttributeKind::Enumerated) continue;
        for (const auto& v : f.values()) {
          if (!vocab.resolve(base, v.canonical))
            warnings.push_back(e.id + " [" + std::string(to_string(dialect)) + "]: value '" + v.canonical +
                               "' of '" + base + "' is not an allowed value");
        }
      }
    }
  }
  return warnings;
}

}  // namespace nl2api
