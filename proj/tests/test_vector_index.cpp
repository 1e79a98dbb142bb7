#include <doctest.h>

#include <algorithm>
#include <random>

#include <nlohmann/json.hpp>

#include "nl2api/error.hpp"
#include "nl2api/vector_index.hpp"
#include "support.hpp"

using namespace nl2api;

namespace {

EmbeddingVector vec(std::vector<float> v) { return EmbeddingVector{std::move(v)}; }

Corpus questions(const std::vector<std::string>& qs) {
  Corpus c;
  for (std::size_t i = 0; i < qs.size(); ++i)
    c.entries.push_back({"e" + std::to_string(i), qs[i], "/api/deals/", std::nullopt, {}});
  return c;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_SUITE("vector_index") {

TEST_CASE("cosine") {
  CHECK(cosine(vec({1, 0}), vec({1, 0})) == doctest::Approx(1.0));
  CHECK(cosine(vec({1, 0}), vec({0, 2})) == doctest::Approx(0.0));
  CHECK(cosine(vec({1, 1}), vec({-1, -1})) == doctest::Approx(-1.0));
  CHECK(kind_of([] { cosine(vec({1, 0}), vec({1, 0, 0})); }) == ErrorKind::DimensionMismatch);
  CHECK(kind_of([] { cosine(vec({0, 0}), vec({1, 0})); }) == ErrorKind::ZeroVector);
}

TEST_CASE("checked vectors") {
  CHECK(EmbeddingVector::checked({1, 2, 3}, 3).dimension() == 3);
  CHECK(kind_of([] { EmbeddingVector::checked({1, 2}, 3); }) == ErrorKind::DimensionMismatch);
  CHECK(kind_of([] { EmbeddingVector::checked({1, NAN}, 2); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("hashing embedder") {
  HashingEmbeddingBackend h;
  CHECK(h.id() == "nl2api-hash-768");
  auto a = embed("Deals in Madagascar", h);
  CHECK(a.dimension() == 768);
  CHECK(a == embed("deals in madagascar", h));
  CHECK(cosine(a, a) == doctest::Approx(1.0));
  CHECK(cosine(a, embed("palm oil in Indonesia", h)) < 0.5);
  CHECK(kind_of([&] { embed("   ", h); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("fixture backend is bit exact") {
  testing::TempDir dir;
  FixtureEmbeddingBackend f("model-x", 4);
  f.add("q", vec({0.1f, -0.2f, 0.30000001f, 1e-7f}));
  f.save(dir / "f.jsonl");
  auto loaded = FixtureEmbeddingBackend::load(dir / "f.jsonl");
  CHECK(loaded.id() == "model-x");
  CHECK(loaded.dimension() == 4);
  CHECK(embed("q", loaded) == vec({0.1f, -0.2f, 0.30000001f, 1e-7f}));
  CHECK(kind_of([&] { embed("unknown", loaded); }) == ErrorKind::BackendUnavailable);
  CHECK(kind_of([&] { f.add("r", vec({1, 2})); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("http embedder") {
  testing::FakeHttp http([](const HttpRequest& r) {
    auto body = nlohmann::json::parse(r.body);
    nlohmann::json vectors = nlohmann::json::array();
    for (std::size_t i = 0; i < body["input"].size(); ++i) vectors.push_back(std::vector<float>(768, 0.5f));
    return HttpResponse{200, nlohmann::json{{"vectors", vectors}}.dump()};
  });
  HttpEmbeddingBackend backend(http, "http://embed.local/embed", "all-mpnet-base-v2");
  auto v = embed("deals", backend);
  CHECK(v.dimension() == 768);
  REQUIRE(http.requests.size() == 1);
  CHECK(http.requests[0].method == "POST");
  CHECK(nlohmann::json::parse(http.requests[0].body)["model"] == "all-mpnet-base-v2");

  testing::FakeHttp small([](const HttpRequest&) {
    return HttpResponse{200, nlohmann::json{{"data", {{{"embedding", std::vector<float>(384, 1.0f)}}}}}.dump()};
  });
  HttpEmbeddingBackend mismatched(small, "http://embed.local/embed", "m");
  CHECK(kind_of([&] { embed("deals", mismatched); }) == ErrorKind::DimensionMismatch);

  testing::FakeHttp down;
  HttpEmbeddingBackend unreachable(down, "http://embed.local/embed", "m");
  CHECK(kind_of([&] { embed("deals", unreachable); }) == ErrorKind::BackendUnavailable);

  testing::FakeHttp failing([](const HttpRequest&) { return HttpResponse{503, "busy"}; });
  HttpEmbeddingBackend erroring(failing, "http://embed.local/embed", "m");
  CHECK(kind_of([&] { embed("deals", erroring); }) == ErrorKind::BackendUnavailable);
}

TEST_CASE("recording embedder appends to fixture") {
  testing::TempDir dir;
  HashingEmbeddingBackend h(16);
  RecordingEmbeddingBackend rec(h, dir / "rec.jsonl");
  auto a = embed("alpha", rec);
  embed("beta", rec);
  embed("alpha", rec);
  auto replay = FixtureEmbeddingBackend::load(dir / "rec.jsonl");
  CHECK(replay.size() == 2);
  CHECK(embed("alpha", replay) == a);
}

TEST_CASE("build, save, load") {
  HashingEmbeddingBackend h;
  std::vector<std::string> qs;
  for (int i = 0; i < 10; ++i) qs.push_back("deals in country number " + std::to_string(i));
  auto idx = build_index(questions(qs), h);
  CHECK(idx.size() == 10);
  CHECK(idx.dimension == 768);
  CHECK(idx.backend_id == h.id());
  CHECK(idx.entries[3].entry_id == "e3");

  testing::TempDir dir;
  save_index(idx, dir / "i.bin");
  CHECK(load_index(dir / "i.bin") == idx);

  dir.write("bad.bin", "nl2api-index v1 x 4 2\na\n");
  CHECK_THROWS_AS(load_index(dir / "bad.bin"), Error);
  CHECK(kind_of([&] { build_index(Corpus{}, h); }) == ErrorKind::EmptyCorpus);
}

TEST_CASE("top_k ordering and ties") {
  VectorIndex idx{"t", 2, {{"b", vec({1, 0})}, {"a", vec({1, 0})}, {"c", vec({0, 1})}, {"d", vec({1, 1})}}};
  auto r = top_k(idx, vec({1, 0}), 10);
  REQUIRE(r.size() == 4);
  CHECK(r[0].entry_id == "a");
  CHECK(r[1].entry_id == "b");
  CHECK(r[2].entry_id == "d");
  CHECK(r[3].entry_id == "c");
  CHECK(top_k(idx, vec({1, 0}), 1).size() == 1);
  CHECK(kind_of([&] { top_k(idx, vec({1, 0}), 0); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([&] { top_k(idx, vec({1, 0, 0}), 1); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("shipped fixture gives self hits") {
  auto fixture = FixtureEmbeddingBackend::load(testing::data_dir() / "embeddings.hash768.jsonl");
  auto corpus = load_corpus(testing::data_dir() / "corpus.jsonl");
  auto idx = build_index(corpus, fixture);
  CHECK(idx.size() == 60);
  HashingEmbeddingBackend h;
  for (const auto& e : corpus.entries) {
    auto hits = top_k(idx, embed(e.question, h), 1);
    CHECK(hits[0].entry_id == e.id);
    CHECK(hits[0].similarity >= 0.999);
  }
}

}
