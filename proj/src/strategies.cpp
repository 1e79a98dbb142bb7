#include "nl2api/strategies.hpp"

#include <algorithm>
#include <regex>
#include <set>

#include <nlohmann/json.hpp>

#include "nl2api/util.hpp"

namespace nl2api {

using nlohmann::json;

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::PromptEngineering: return "prompt_engineering";
    case Strategy::Rag: return "rag";
    case Strategy::Agentic: return "agentic";
  }
  return "prompt_engineering";
}

const std::vector<Strategy>& all_strategies() {
  static const std::vector<Strategy> kAll = {Strategy::PromptEngineering, Strategy::Rag, Strategy::Agentic};
  return kAll;
}

Strategy parse_strategy(std::string_view text) {
  auto t = to_lower(trim(text));
  for (auto s : all_strategies())
    if (t == to_string(s)) return s;
  throw Error(ErrorKind::InvalidArgument,
              "unknown strategy '" + std::string(text) + "' (valid: prompt_engineering, rag, agentic)",
              std::string(text));
}

void PromptBundle::validate() const {
  if (trim(instruction).empty()) throw Error(ErrorKind::InvalidArgument, "prompt instruction is empty");
  if (trim(question).empty()) throw Error(ErrorKind::InvalidArgument, "prompt question is empty");
  if (trim(context).empty()) throw Error(ErrorKind::InvalidArgument, "prompt context is empty");
}

std::vector<ChatMessage> PromptBundle::messages() const {
  return {{Role::System, instruction}, {Role::User, "### Question\n" + question + "\n\n### Context\n" + context}};
}

json GenerationTrace::to_json() const {
  nlohmann::ordered_json j;
  j["question"] = question;
  j["strategy"] = std::string(to_string(strategy));
  j["model"] = model;
  j["dialect"] = std::string(to_string(dialect));
  auto prompts_json = nlohmann::ordered_json::array();
  for (const auto& p : prompts)
    prompts_json.push_back({{"instruction", p.instruction},
                            {"question", p.question},
                            {"context", p.context},
                            {"dialect", std::string(to_string(p.dialect))}});
  j["prompts"] = prompts_json;
  j["raw_outputs"] = raw_outputs;
  j["extracted_query"] = extracted_query ? nlohmann::ordered_json(*extracted_query) : nlohmann::ordered_json(nullptr);
  if (bindings) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& b : *bindings) arr.push_back({{"entity", b.entity}, {"value", b.value}});
    j["bindings"] = arr;
  } else {
    j["bindings"] = nullptr;
  }
  j["retrieved_examples"] =
      retrieved_examples ? nlohmann::ordered_json(*retrieved_examples) : nlohmann::ordered_json(nullptr);
  j["warnings"] = warnings;
  if (error) j["error"] = {{"kind", std::string(to_string(error->kind))}, {"message", error->message}};
  else j["error"] = nullptr;
  return json::parse(j.dump());
}

std::string GenerationTrace::digest() const { return hex64(fnv1a64(to_json().dump())); }

// ---------------------------------------------------------------------------
// Rendering helpers

namespace {

std::string attribute_header(const std::string& name, const AttributeSpec& spec) {
  std::string line = "- " + name + " (" + std::string(to_string(spec.kind)) + ")";
  if (!spec.description.empty()) line += ": " + spec.description;
  return line;
}

std::string attribute_names(const AttributeVocabulary& vocab) {
  std::vector<std::string> lines;
  for (const auto& [name, spec] : vocab.attributes) lines.push_back(attribute_header(name, spec));
  return join(lines, "\n");
}

std::string or_none(std::string text) { return trim(text).empty() ? std::string("(none)") : text; }

}  // namespace

std::string render_vocabulary(const AttributeVocabulary& vocab) {
  std::vector<std::string> lines;
  for (const auto& [name, spec] : vocab.attributes) {
    lines.push_back(attribute_header(name, spec));
    if (spec.kind == AttributeKind::Enumerated) lines.push_back("  values: " + join(spec.allowed_values, ", "));
  }
  return join(lines, "\n");
}

std::string render_examples(const std::vector<ExamplePair>& examples) {
  std::vector<std::string> blocks;
  for (const auto& e : examples) blocks.push_back("Question: " + e.question + "\nRequest: " + e.query);
  return join(blocks, "\n\n");
}

// ---------------------------------------------------------------------------
// Prompt engineering

PromptBundle build_prompt_engineering(std::string_view question, const SchemaContext& schema,
                                      const AttributeVocabulary& vocab, Dialect dialect,
                                      const PromptTemplates& templates) {
  const auto& examples = schema.examples(dialect);
  if (examples.empty())
    throw Error(ErrorKind::MissingExamples,
                "schema context has no static " + std::string(to_string(dialect)) + " examples",
                std::string(to_string(dialect)));
  std::map<std::string, std::string> values = {
      {"dialect", std::string(to_string(dialect))},
      {"question", std::string(question)},
      {"schema", or_none(schema.schema_text)},
      {"rules", or_none(schema.rules(dialect))},
      {"examples", render_examples(examples)},
      {"values_fragment", or_none(render_vocabulary(vocab))},
  };
  PromptBundle bundle{templates.render("instruction", values), templates.render("context_prompt_engineering", values),
                      std::string(question), dialect};
  bundle.validate();
  return bundle;
}

// ---------------------------------------------------------------------------
// RAG

std::vector<RetrievedExample> retrieve_examples(std::string_view question, const VectorIndex& index,
                                                const Corpus& pool, std::size_t k, Dialect dialect,
                                                EmbeddingBackend& embedder) {
  if (k == 0) throw Error(ErrorKind::InvalidArgument, "k must be at least 1");
  auto query = embed(question, embedder);
  std::vector<RetrievedExample> out;
  if (index.entries.empty()) return out;
  for (const auto& hit : top_k(index, query, index.size())) {
    if (out.size() >= k) break;
    const auto* entry = pool.find(hit.entry_id);
    if (!entry || !entry->query(dialect)) continue;
    out.push_back({hit.entry_id, hit.similarity, {entry->question, *entry->query(dialect)}});
  }
  return out;
}

RagPrompt build_rag(std::string_view question, const VectorIndex& index, const Corpus& pool, std::size_t k,
                    const SchemaContext& schema, const AttributeVocabulary& vocab, Dialect dialect,
                    EmbeddingBackend& embedder, const PromptTemplates& templates) {
  auto retrieved = retrieve_examples(question, index, pool, k, dialect, embedder);
  std::vector<ExamplePair> pairs;
  RagPrompt out;
  for (const auto& r : retrieved) {
    pairs.push_back(r.pair);
    out.retrieved_ids.push_back(r.entry_id);
  }
  std::map<std::string, std::string> values = {
      {"dialect", std::string(to_string(dialect))},
      {"question", std::string(question)},
      {"schema", or_none(schema.schema_text)},
      {"rules", or_none(schema.rules(dialect))},
      {"examples", or_none(render_examples(pairs))},
      {"values_fragment", or_none(render_vocabulary(vocab))},
  };
  out.bundle = {templates.render("instruction", values), templates.render("context_rag", values),
                std::string(question), dialect};
  out.bundle.validate();
  return out;
}

// ---------------------------------------------------------------------------
// Agents

namespace {

std::string scalar_text(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

void bindings_from_json(const json& doc, std::vector<EntityBinding>& out) {
  if (doc.is_object()) {
    if (doc.contains("entity") && doc.contains("value")) {
      out.push_back({trim(scalar_text(doc["entity"])), trim(scalar_text(doc["value"]))});
      return;
    }
    for (const auto& [k, v] : doc.items()) {
      if (v.is_array()) {
        for (const auto& item : v) out.push_back({trim(k), trim(scalar_text(item))});
      } else if (!v.is_object()) {
        out.push_back({trim(k), trim(scalar_text(v))});
      }
    }
  } else if (doc.is_array()) {
    for (const auto& item : doc) bindings_from_json(item, out);
  }
}

}  // namespace

std::vector<EntityBinding> parse_bindings(std::string_view raw) {
  static const std::regex kPair(R"(\[\s*([^\[\]:\n]+?)\s*:\s*([^\[\]\n]*?)\s*\])");
  std::vector<EntityBinding> out;
  std::string text(raw);
  for (auto it = std::sregex_iterator(text.begin(), text.end(), kPair); it != std::sregex_iterator(); ++it) {
    auto entity = trim((*it)[1].str());
    auto value = trim((*it)[2].str());
    if (!entity.empty() && (entity.front() == '"' || entity.front() == '{')) continue;  // JSON, handled below
    out.push_back({entity, value});
  }
  if (!out.empty()) return out;

  auto start = text.find_first_of("{[");
  if (start == std::string::npos) return out;
  auto end = text.find_last_of("}]");
  if (end == std::string::npos || end < start) return out;
  try {
    bindings_from_json(json::parse(text.substr(start, end - start + 1)), out);
  } catch (const json::exception&) {
    out.clear();
  }
  std::erase_if(out, [](const EntityBinding& b) { return b.entity.empty(); });
  return out;
}

EntityExtraction extract_entities(std::string_view question, const AttributeVocabulary& vocab, Dialect dialect,
                                  ChatBackend& gateway, const std::string& model, const PromptTemplates& templates,
                                  ChatParams params) {
  std::map<std::string, std::string> values = {
      {"dialect", std::string(to_string(dialect))},
      {"question", std::string(question)},
      {"values_fragment", or_none(attribute_names(vocab))},
  };
  EntityExtraction ex;
  ex.prompt = {templates.render("extractor_instruction", values), templates.render("extractor_context", values),
               std::string(question), dialect};
  ex.prompt.validate();

  ChatRequest req{model, ex.prompt.messages(), params.temperature, params.max_tokens};
  ex.raw_output = gateway.complete(req).text;

  auto parsed = parse_bindings(ex.raw_output);
  if (parsed.empty() && !trim(ex.raw_output).empty())
    ex.warnings.push_back("ParseWarning: agent 1 reply contained no [entity: value] pair");
  for (auto& b : parsed) {
    if (!vocab.contains(b.entity)) {
      ex.warnings.push_back("dropped binding [" + b.entity + ": " + b.value + "]: attribute not in vocabulary");
      continue;
    }
    ex.bindings.push_back(std::move(b));
  }
  return ex;
}

std::string resolve_entity_values(const std::vector<EntityBinding>& bindings, const AttributeVocabulary& vocab) {
  std::vector<std::string> lines;
  std::set<std::string> seen;
  for (const auto& b : bindings) {
    if (!seen.insert(b.entity).second) continue;
    const auto* spec = vocab.find(b.entity);
    if (!spec) continue;
    lines.push_back(attribute_header(b.entity, *spec));
    if (spec->kind == AttributeKind::Enumerated)
      lines.push_back("  allowed values: " + join(spec->allowed_values, ", "));
  }
  return join(lines, "\n");
}

PromptBundle build_agentic_prompt(std::string_view question, const std::vector<EntityBinding>& bindings,
                                  std::string_view resolved_fragment, const std::vector<RetrievedExample>& examples,
                                  const SchemaContext& schema, Dialect dialect, const PromptTemplates& templates,
                                  bool pass_bindings) {
  std::string fragment;
  if (bindings.empty()) {
    fragment = "No specific filter was identified in the question.";
  } else {
    if (pass_bindings) {
      std::vector<std::string> lines;
      for (const auto& b : bindings) lines.push_back("[" + b.entity + ": " + b.value + "]");
      fragment = "Requested filters:\n" + join(lines, "\n") + "\n\n";
    }
    fragment += "Attribute details:\n" + std::string(resolved_fragment);
  }
  std::vector<ExamplePair> pairs;
  for (const auto& e : examples) pairs.push_back(e.pair);
  std::map<std::string, std::string> values = {
      {"dialect", std::string(to_string(dialect))},
      {"question", std::string(question)},
      {"schema", or_none(schema.schema_text)},
      {"rules", or_none(schema.rules(dialect))},
      {"examples", or_none(render_examples(pairs))},
      {"values_fragment", fragment},
  };
  PromptBundle bundle{templates.render("instruction", values), templates.render("context_agentic", values),
                      std::string(question), dialect};
  bundle.validate();
  return bundle;
}

// ---------------------------------------------------------------------------
// Dispatch

namespace {

template <class T>
const T& require(const T* p, const char* what) {
  if (!p) throw Error(ErrorKind::InvalidArgument, std::string("generation dependency missing: ") + what);
  return *p;
}

std::string run_chat(const PromptBundle& bundle, const std::string& model, const GenerationDeps& deps) {
  ChatRequest req{model, bundle.messages(), deps.params.temperature, deps.params.max_tokens};
  return deps.chat->complete(req).text;
}

}  // namespace

GenerationTrace generate(std::string_view question, Strategy strategy, Dialect dialect, const std::string& model,
                         const GenerationDeps& deps) {
  GenerationTrace trace;
  trace.question = std::string(question);
  trace.strategy = strategy;
  trace.model = model;
  trace.dialect = dialect;

  try {
    if (!deps.chat) throw Error(ErrorKind::InvalidArgument, "generation dependency missing: chat backend");
    const auto& templates = require(deps.templates, "templates");
    const auto& schema = require(deps.schema, "schema context");
    const auto& vocab = require(deps.vocab, "vocabulary");

    switch (strategy) {
      case Strategy::PromptEngineering: {
        auto bundle = build_prompt_engineering(question, schema, vocab, dialect, templates);
        trace.prompts.push_back(bundle);
        trace.raw_outputs.push_back(run_chat(bundle, model, deps));
        break;
      }
      case Strategy::Rag: {
        if (!deps.embedder) throw Error(ErrorKind::InvalidArgument, "generation dependency missing: embedder");
        auto rag = build_rag(question, require(deps.index, "index"), require(deps.rag_pool, "RAG pool"), deps.k, schema,
                             vocab, dialect, *deps.embedder, templates);
        trace.retrieved_examples = rag.retrieved_ids;
        trace.prompts.push_back(rag.bundle);
        trace.raw_outputs.push_back(run_chat(rag.bundle, model, deps));
        break;
      }
      case Strategy::Agentic: {
        if (!deps.embedder) throw Error(ErrorKind::InvalidArgument, "generation dependency missing: embedder");
        trace.bindings.emplace();
        auto ex = extract_entities(question, vocab, dialect, *deps.chat, deps.extractor_model.value_or(model),
                                   templates, deps.params);
        trace.prompts.push_back(ex.prompt);
        trace.raw_outputs.push_back(ex.raw_output);
        trace.bindings = ex.bindings;
        trace.warnings.insert(trace.warnings.end(), ex.warnings.begin(), ex.warnings.end());

        auto fragment = resolve_entity_values(ex.bindings, vocab);
        auto examples = retrieve_examples(question, require(deps.index, "index"), require(deps.rag_pool, "RAG pool"),
                                          deps.k, dialect, *deps.embedder);
        trace.retrieved_examples.emplace();
        for (const auto& e : examples) trace.retrieved_examples->push_back(e.entry_id);
        auto bundle = build_agentic_prompt(question, ex.bindings, fragment, examples, schema, dialect, templates,
                                           deps.pass_bindings);
        trace.prompts.push_back(bundle);
        trace.raw_outputs.push_back(run_chat(bundle, model, deps));
        break;
      }
    }
    trace.extracted_query = extract_query(trace.raw_outputs.back(), dialect);
  } catch (const Error& e) {
    trace.extracted_query.reset();
    trace.error = TraceError{e.kind(), e.what()};
  }
  return trace;
}

}  // namespace nl2api
