// Regenerates replay fixtures.
//
//   nl2api_fixtures embeddings --corpus data/corpus.jsonl --out data/embeddings.hash768.jsonl
//   nl2api_fixtures replay --config tests/fixtures/mini/config.json --script tests/fixtures/mini/script.json
//
// `replay` renders every prompt of the scripted runs with the real strategy
// code and pairs it with the hand-written reply, so the LLM cassette always
// matches the current templates. API payloads are copied from the script.

#include <deque>
#include <iostream>
#include <map>
#include <set>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "nl2api/config.hpp"
#include "nl2api/error.hpp"
#include "nl2api/llm_gateway.hpp"
#include "nl2api/runtime.hpp"
#include "nl2api/util.hpp"
#include "nl2api/vector_index.hpp"

using namespace nl2api;
using nlohmann::json;

namespace {

class ScriptedReplies final : public ChatBackend {
 public:
  std::deque<std::string> replies;
  std::vector<CassetteRecord> records;

  ChatResponse complete(const ChatRequest& request) override {
    request.validate();
    if (replies.empty()) throw Error(ErrorKind::InvalidArgument, "script has no reply left for this call");
    auto text = replies.front();
    replies.pop_front();
    records.push_back({cassette_hash(request), request.model, request.messages, request.temperature, text});
    return {text, request.model, 0.0, BackendKind::Scripted};
  }
  BackendKind kind() const override { return BackendKind::Scripted; }
};

int embeddings(const std::string& corpus_path, const std::string& out, std::size_t dimension) {
  auto corpus = load_corpus(corpus_path);
  HashingEmbeddingBackend hashing(dimension);
  FixtureEmbeddingBackend fixture(hashing.id(), dimension);
  for (const auto& e : corpus.entries) fixture.add(e.question, embed(e.question, hashing));
  fixture.save(out);
  std::cout << "wrote " << fixture.size() << " vectors to " << out << "\n";
  return 0;
}

int replay(const std::string& config_path, const std::string& script_path) {
  auto config = load_config(config_path);
  auto script = json::parse(read_file(script_path));

  // API cassette first: the runtime opens it in cassette mode.
  std::map<std::string, ApiCassetteRecord> api;
  for (const auto& item : script.at("api")) {
    ApiCassetteRecord r;
    r.dialect = parse_dialect(item.at("dialect").get<std::string>());
    r.key = api_cassette_key(item.at("query").get<std::string>(), r.dialect);
    r.status = item.at("status").get<int>();
    r.body_text = item.contains("body_text") ? item["body_text"].get<std::string>() : item.at("body").dump();
    r.recorded_at = "fixture";
    if (auto [it, fresh] = api.emplace(r.key, r); !fresh && it->second.body_text != r.body_text)
      throw Error(ErrorKind::DuplicateId, "two API payloads for " + r.key, r.key);
  }
  std::string api_text;
  for (const auto& [key, r] : api) api_text += to_jsonl(r) + "\n";
  write_file(config.api.cassette, api_text);

  auto chat = std::make_shared<ScriptedReplies>();
  RuntimeOverrides overrides;
  overrides.mode = RunMode::Cassette;
  overrides.chat = chat;
  Runtime rt(config, overrides);

  std::set<std::string> missing;
  std::map<std::string, CassetteRecord> llm;
  for (const auto& run : script.at("runs")) {
    auto strategy = parse_strategy(run.at("strategy").get<std::string>());
    auto model = run.at("model").get<std::string>();
    auto dialect = parse_dialect(run.at("dialect").get<std::string>());
    auto deps = rt.deps(strategy != Strategy::PromptEngineering);
    const auto& samples = run.at("samples");
    for (const auto& entry : rt.eval_set().entries) {
      if (!entry.query(dialect)) continue;
      auto it = samples.find(entry.id);
      if (it == samples.end()) throw Error(ErrorKind::NotFound, "script has no sample for " + entry.id, entry.id);
      chat->replies.clear();
      if (strategy == Strategy::Agentic) chat->replies.push_back(it->at("extractor").get<std::string>());
      chat->replies.push_back(it->at("reply").get<std::string>());

      auto trace = generate(entry.question, strategy, dialect, model, deps);
      if (!chat->replies.empty()) throw Error(ErrorKind::InvalidArgument, "unused scripted reply for " + entry.id);
      if (trace.error && trace.error->kind != ErrorKind::NoQueryFound)
        throw Error(trace.error->kind, entry.id + ": " + trace.error->message, entry.id);

      if (trace.extracted_query && !api.count(api_cassette_key(*trace.extracted_query, dialect)))
        missing.insert(api_cassette_key(*trace.extracted_query, dialect));
      if (!api.count(api_cassette_key(*entry.query(dialect), dialect)))
        missing.insert(api_cassette_key(*entry.query(dialect), dialect));
    }
  }
  for (auto& r : chat->records) {
    if (auto [it, fresh] = llm.emplace(r.key_hash, r); !fresh && it->second.response_text != r.response_text)
      throw Error(ErrorKind::DuplicateId, "one prompt scripted with two replies (" + r.key_hash + ")", r.key_hash);
  }
  std::string llm_text;
  for (const auto& [hash, r] : llm) llm_text += to_jsonl(r) + "\n";
  write_file(config.llm.cassette, llm_text);

  std::cout << "wrote " << llm.size() << " LLM records and " << api.size() << " API records\n";
  for (const auto& key : missing) std::cerr << "no API payload for: " << key << "\n";
  return missing.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regenerate replay fixtures", "nl2api_fixtures"};
  app.require_subcommand(1);

  std::string corpus;
  std::string out;
  std::size_t dimension = kDefaultEmbeddingDimension;
  auto* emb = app.add_subcommand("embeddings", "Hashing-embedder fixture for a corpus");
  emb->add_option("--corpus", corpus)->required();
  emb->add_option("--out", out)->required();
  emb->add_option("--dimension", dimension);

  std::string config;
  std::string script;
  auto* rep = app.add_subcommand("replay", "LLM and API cassettes from a reply script");
  rep->add_option("--config", config)->required();
  rep->add_option("--script", script)->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*emb) return embeddings(corpus, out, dimension);
    return replay(config, script);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
