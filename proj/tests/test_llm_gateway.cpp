#include <doctest.h>

#include <nlohmann/json.hpp>

#include "nl2api/error.hpp"
#include "nl2api/llm_gateway.hpp"
#include "support.hpp"

using namespace nl2api;

namespace {

ChatRequest request(std::string user, std::string model = "Codestral-22B") {
  return {model, {{Role::System, "You write API requests."}, {Role::User, std::move(user)}}, 0.0, 1024};
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

HttpResponse completion(const std::string& text) {
  return {200, nlohmann::json{{"model", "m"}, {"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}}.dump()};
}

}  // namespace

TEST_SUITE("llm_gateway") {

TEST_CASE("request validation") {
  CHECK_NOTHROW(request("q").validate());
  auto r = request("q");
  r.model.clear();
  CHECK(kind_of([&] { r.validate(); }) == ErrorKind::InvalidArgument);
  r = request("q");
  r.messages.clear();
  CHECK(kind_of([&] { r.validate(); }) == ErrorKind::InvalidArgument);
  r = request("q");
  r.messages.front().role = Role::Assistant;
  CHECK(kind_of([&] { r.validate(); }) == ErrorKind::InvalidArgument);
  r = request("q");
  r.temperature = -0.1;
  CHECK(kind_of([&] { r.validate(); }) == ErrorKind::InvalidArgument);
  r = request("q");
  r.max_tokens = 0;
  CHECK(kind_of([&] { r.validate(); }) == ErrorKind::InvalidArgument);
  CHECK(parse_role("assistant") == Role::Assistant);
  CHECK(to_string(Role::System) == "system");
}

TEST_CASE("cassette keys cover model, messages and temperature only") {
  auto a = request("q");
  auto b = request("q");
  b.max_tokens = 10;
  CHECK(cassette_hash(a) == cassette_hash(b));
  CHECK(cassette_hash(a).size() == 16);
  b = request("q2");
  CHECK(cassette_hash(a) != cassette_hash(b));
  b = request("q", "other");
  CHECK(cassette_hash(a) != cassette_hash(b));
  b = request("q");
  b.temperature = 0.5;
  CHECK(cassette_hash(a) != cassette_hash(b));
  CHECK(cassette_key(a) == cassette_key(request("q")));
}

TEST_CASE("scripted backend replays verbatim") {
  ScriptedChatBackend s;
  s.add(request("h1"), "query { deals(limit: 5) { id } }");
  CHECK(s.complete(request("h1")).text == "query { deals(limit: 5) { id } }");
  CHECK(s.complete(request("h1")).text == s.complete(request("h1")).text);
  CHECK(s.kind() == BackendKind::Scripted);
  try {
    s.complete(request("h2"));
    FAIL("expected CassetteMiss");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::CassetteMiss);
    CHECK(e.subject() == cassette_hash(request("h2")));
  }
}

TEST_CASE("cassette file round trip") {
  testing::TempDir dir;
  auto r = request("deals in Ghana");
  CassetteRecord rec{cassette_hash(r), r.model, r.messages, r.temperature, "```\n/api/deals/?country_id=288\n```"};
  write_file(dir / "c.jsonl", to_jsonl(rec) + "\n\n");
  auto s = ScriptedChatBackend::load(dir / "c.jsonl");
  CHECK(s.size() == 1);
  CHECK(s.complete(r).text == rec.response_text);

  auto tampered = rec;
  tampered.key_hash = "0000000000000000";
  write_file(dir / "bad.jsonl", to_jsonl(tampered) + "\n");
  CHECK(kind_of([&] { ScriptedChatBackend::load(dir / "bad.jsonl"); }) == ErrorKind::MalformedRecord);
  write_file(dir / "junk.jsonl", "{not json\n");
  CHECK(kind_of([&] { ScriptedChatBackend::load(dir / "junk.jsonl"); }) == ErrorKind::MalformedRecord);
}

TEST_CASE("recording backend writes a replayable cassette") {
  testing::TempDir dir;
  testing::QueueChat inner;
  inner.replies = {"first", "second"};
  RecordingChatBackend rec(inner, dir / "rec.jsonl");
  CHECK(rec.complete(request("a")).text == "first");
  CHECK(rec.complete(request("b")).text == "second");
  auto replay = ScriptedChatBackend::load(dir / "rec.jsonl");
  CHECK(replay.complete(request("b")).text == "second");
  CHECK(replay.complete(request("a")).text == "first");
}

TEST_CASE("live backend") {
  testing::FakeHttp http([](const HttpRequest&) { return completion("```\n/api/deals/\n```"); });
  LiveChatBackend live(http, {"http://llm.local/v1/chat/completions", "secret", std::chrono::milliseconds(1000), 2});
  auto resp = live.complete(request("q"));
  CHECK(resp.text == "```\n/api/deals/\n```");
  CHECK(resp.backend == BackendKind::Live);
  REQUIRE(http.requests.size() == 1);
  auto body = nlohmann::json::parse(http.requests[0].body);
  CHECK(body["model"] == "Codestral-22B");
  CHECK(body["messages"][1]["content"] == "q");
  CHECK(body["temperature"] == 0.0);
  bool auth = false;
  for (const auto& [k, v] : http.requests[0].headers) auth |= k == "Authorization" && v == "Bearer secret";
  CHECK(auth);

  testing::FakeHttp denied([](const HttpRequest&) { return HttpResponse{401, "{}"}; });
  LiveChatBackend unauthorized(denied, {"http://llm.local/", "bad", std::chrono::milliseconds(1000), 1});
  CHECK(kind_of([&] { unauthorized.complete(request("q")); }) == ErrorKind::Unauthorized);
  CHECK(denied.calls() == 1);

  int n = 0;
  testing::FakeHttp flaky([&](const HttpRequest&) { return ++n == 1 ? HttpResponse{503, ""} : completion("ok"); });
  LiveChatBackend retrying(flaky, {"http://llm.local/", "t", std::chrono::milliseconds(1000), 1});
  CHECK(retrying.complete(request("q")).text == "ok");
  CHECK(n == 2);

  testing::FakeHttp slow([](const HttpRequest&) -> HttpResponse { throw Error(ErrorKind::Timeout, "deadline"); });
  LiveChatBackend timing_out(slow, {"http://llm.local/", "t", std::chrono::milliseconds(10), 1});
  CHECK(kind_of([&] { timing_out.complete(request("q")); }) == ErrorKind::Timeout);
  CHECK(slow.calls() == 2);

  testing::FakeHttp garbage([](const HttpRequest&) { return HttpResponse{200, "<html>"}; });
  LiveChatBackend bad_body(garbage, {"http://llm.local/", "t", std::chrono::milliseconds(10), 1});
  CHECK(kind_of([&] { bad_body.complete(request("q")); }) == ErrorKind::UpstreamError);

  CHECK(kind_of([&] { LiveChatBackend(http, {"http://llm.local/", "", std::chrono::milliseconds(10), 1}); }) ==
        ErrorKind::MissingCredential);
}

TEST_CASE("query extraction") {
  CHECK(extract_query("```graphql\nquery { deals { id } }\n```", Dialect::GraphQL) == "query { deals { id } }");
  CHECK(extract_query("Here is your request: https://landmatrix.org/api/deals/?area_min=1000 \xE2\x80\x94 enjoy!",
                      Dialect::Rest) == "https://landmatrix.org/api/deals/?area_min=1000");
  CHECK(kind_of([] { extract_query("I cannot answer this.", Dialect::Rest); }) == ErrorKind::NoQueryFound);
  CHECK(kind_of([] { extract_query("I cannot answer this.", Dialect::GraphQL); }) == ErrorKind::NoQueryFound);

  CHECK(extract_query("Try /api/deals/?country_id=450.", Dialect::Rest) == "/api/deals/?country_id=450");
  CHECK(extract_query("(see https://landmatrix.org/api/deals/?a=1)", Dialect::Rest) ==
        "https://landmatrix.org/api/deals/?a=1");
  // the fenced block wins over prose before it
  CHECK(extract_query("The docs live at https://landmatrix.org/docs\n```\nhttps://landmatrix.org/api/deals/?x=1\n```",
                      Dialect::Rest) == "https://landmatrix.org/api/deals/?x=1");
  CHECK(extract_query("query Deals { deals(filters: [{field: \"a\", value: \"}\"}]) { id } } trailing",
                      Dialect::GraphQL) == "query Deals { deals(filters: [{field: \"a\", value: \"}\"}]) { id } }");
  CHECK(extract_query("{ deals { id } }", Dialect::GraphQL) == "{ deals { id } }");
  // unterminated: everything from the opening brace
  CHECK(extract_query("query { deals { id }", Dialect::GraphQL) == "query { deals { id }");
}

}
