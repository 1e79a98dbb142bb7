#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include <nlohmann/json.hpp>

#include "nl2api/cli.hpp"
#include "nl2api/vector_index.hpp"
#include "support.hpp"

using namespace nl2api;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string mini_config() { return (testing::mini_dir() / "config.json").string(); }

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

std::string ten_entries() {
  std::string text;
  for (int i = 0; i < 10; ++i)
    text += "{\"id\":\"t" + std::to_string(i) + "\",\"question\":\"deals in country " + std::to_string(i) +
            "\",\"rest_query\":\"/api/deals/?country_id=" + std::to_string(i) + "\"}\n";
  return text;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  CHECK(cli({"--help"}).code == kExitOk);
  auto missing = cli({"lint", "--corpus", "nope.jsonl", "--vocabulary", (testing::data_dir() / "vocabulary.json").string()});
  CHECK(missing.code == kExitUsage);
  CHECK(contains(missing.err, "corpus not found"));
  CHECK(cli({"--config", "/nonexistent.json", "lint"}).code == kExitUsage);
  CHECK(cli({"--mode", "sometimes", "lint"}).code == kExitUsage);
}

TEST_CASE("lint") {
  auto r = cli({"lint", "--corpus", (testing::data_dir() / "corpus.jsonl").string(), "--vocabulary",
                (testing::data_dir() / "vocabulary.json").string()});
  CHECK(r.code == kExitOk);
  CHECK(contains(r.out, "60 entries (58 REST, 58 GraphQL), 0 warning(s)"));
}

TEST_CASE("index") {
  testing::TempDir dir;
  auto corpus = dir.write("c.jsonl", ten_entries());
  auto r = cli({"index", "--corpus", corpus.string(), "--out", (dir / "i.bin").string(), "--backend", "hashing"});
  CHECK(r.code == kExitOk);
  auto idx = load_index(dir / "i.bin");
  CHECK(idx.size() == 10);
  CHECK(idx.dimension == 768);

  auto no_corpus = cli({"index", "--corpus", (dir / "none.jsonl").string(), "--out", (dir / "x.bin").string()});
  CHECK(no_corpus.code == kExitUsage);
  CHECK(contains(no_corpus.err, "corpus not found"));

  auto cfg = dir.write("live.json", R"({"embedding": {"backend": "http", "endpoint": "http://127.0.0.1:9/embed"},
                                       "run": {"mode": "live"}})");
  auto down = cli({"--config", cfg.string(), "index", "--corpus", corpus.string(), "--out", (dir / "y.bin").string()});
  CHECK(down.code == kExitBackend);
}

TEST_CASE("ask") {
  auto ok = cli({"--config", mini_config(), "ask", "Which deals in Madagascar have a signed contract?", "--strategy",
                 "agentic", "--dialect", "REST"});
  CHECK(ok.code == kExitOk);
  auto j = nlohmann::json::parse(ok.out);
  CHECK(j["query"] == "https://landmatrix.org/api/deals/?negotiation_status=CONTRACT_SIGNED&country_id=450");
  CHECK(j["valid"] == true);
  CHECK(j["result_ids"] == nlohmann::json{101, 102, 103, 104});
  CHECK(j["source"] == "cassette");

  auto none = cli({"--config", mini_config(), "ask", "Which deals by Chinese investors are in Laos?", "--strategy",
                   "prompt_engineering", "--dialect", "GRAPHQL"});
  CHECK(none.code == kExitNoQuery);
  CHECK(contains(none.err, "model produced no query"));

  auto miss = cli({"--config", mini_config(), "ask", "a question nobody scripted", "--strategy", "rag"});
  CHECK(miss.code == kExitFailure);
  CHECK(contains(miss.err, "CassetteMiss"));

  CHECK(cli({"--config", mini_config(), "ask", "q", "--strategy", "nope"}).code == kExitUsage);
}

TEST_CASE("live mode needs a token") {
  const char* saved = std::getenv("NL2API_LLM_TOKEN");
  std::string keep = saved ? saved : "";
  unsetenv("NL2API_LLM_TOKEN");
  auto r = cli({"--config", mini_config(), "--mode", "live", "ask", "deals in Ghana"});
  if (saved) setenv("NL2API_LLM_TOKEN", keep.c_str(), 1);
  CHECK(r.code == kExitBackend);
  CHECK(contains(r.err, "NL2API_LLM_TOKEN"));
}

TEST_CASE("eval: unknown strategy lists valid ids") {
  testing::TempDir dir;
  auto r = cli({"--config", mini_config(), "eval", "--strategies", "magic", "--out", dir.path().string()});
  CHECK(r.code == kExitUsage);
  CHECK(contains(r.err, "prompt_engineering"));
  CHECK(contains(r.err, "rag"));
  CHECK(contains(r.err, "agentic"));
}

TEST_CASE("eval: cassette misses are unscored and the run continues") {
  testing::TempDir dir;
  auto r = cli({"--config", mini_config(), "eval", "--strategies", "prompt_engineering", "--dialects", "GRAPHQL,REST",
                "--out", dir.path().string(), "--fresh"});
  CHECK(r.code == kExitOk);
  CHECK(contains(r.err, "unscored m01"));
  CHECK(contains(r.out, "samples: 24 (12 scored, 12 unscored"));
  auto csv = read_file(dir / "report.csv");
  CHECK(contains(csv, "prompt_engineering,Codestral-22B,GRAPHQL,12,8,0,66.67,"));
  CHECK(contains(csv, "prompt_engineering,Codestral-22B,REST,0,0,12,"));
}

TEST_CASE("eval: resume skips scored samples") {
  testing::TempDir dir;
  auto first = cli({"--config", mini_config(), "eval", "--strategies", "prompt_engineering", "--dialects", "GRAPHQL",
                    "--out", dir.path().string()});
  CHECK(first.code == kExitOk);
  auto before = read_file(dir / "outcomes.jsonl");
  auto second = cli({"--config", mini_config(), "eval", "--strategies", "prompt_engineering", "--dialects", "GRAPHQL",
                     "--out", dir.path().string()});
  CHECK(second.code == kExitOk);
  CHECK(contains(second.out, "0 evaluated now, 12 resumed"));
  CHECK(read_file(dir / "outcomes.jsonl") == before);

  auto report = cli({"report", (dir / "outcomes.jsonl").string(), "--format", "csv"});
  CHECK(report.code == kExitOk);
  CHECK(report.out == read_file(dir / "report.csv"));
}

TEST_CASE("eval: parallel jobs give the same outcomes") {
  testing::TempDir a, b;
  auto args = [](const testing::TempDir& d, const char* jobs) {
    return std::vector<std::string>{"--config", mini_config(), "eval", "--strategies", "agentic", "--dialects",
                                    "REST", "--out", d.path().string(), "--jobs", jobs, "--fresh"};
  };
  CHECK(cli(args(a, "1")).code == kExitOk);
  CHECK(cli(args(b, "4")).code == kExitOk);
  CHECK(read_file(a / "outcomes.jsonl") == read_file(b / "outcomes.jsonl"));
}

}
