#include <doctest.h>

#include <algorithm>
#include <random>

#include "nl2api/corpus.hpp"
#include "nl2api/error.hpp"
#include "nl2api/query_model.hpp"
#include "support.hpp"

using namespace nl2api;

namespace {

const char* kCanceled =
    "https://landmatrix.org/api/deals/?area_min=1000&negotiation_status=CONTRACT_CANCELED&initiation_year_min=2016";

std::vector<std::string> canon(const Filter& f) {
  std::vector<std::string> out;
  for (const auto& v : f.values()) out.push_back(v.canonical);
  return out;
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

TEST_SUITE("query_model") {

TEST_CASE("numbers and booleans normalize") {
  CHECK(canonical_number("1000.0") == "1000");
  CHECK(canonical_number("007") == "7");
  CHECK(canonical_number("-0.50") == "-0.5");
  CHECK(canonical_number("1e3") == "1000");
  CHECK(canonical_number("2.5E-1") == "0.25");
  CHECK(canonical_number("12a").empty());
  CHECK(canonical_number("").empty());

  CHECK(normalize("1000.0").kind == ValueKind::Number);
  CHECK(normalize(" TRUE ").canonical == "true");
  CHECK(normalize("Madagascar").kind == ValueKind::Text);
  CHECK(normalize("Madagascar") == normalize("madagascar"));
  // identifiers compare exactly
  CHECK_FALSE(normalize_identifier("GE") == normalize_identifier("ge"));
  CHECK_FALSE(normalize_identifier("X") == normalize("X"));
}

TEST_CASE("dialect names") {
  CHECK(parse_dialect("rest") == Dialect::Rest);
  CHECK(parse_dialect("GraphQL") == Dialect::GraphQL);
  CHECK(parse_dialect("gql") == Dialect::GraphQL);
  CHECK(to_string(Dialect::GraphQL) == "GRAPHQL");
  CHECK(kind_of([] { parse_dialect("sql"); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("REST example with three filters") {
  auto q = parse_rest(kCanceled);
  CHECK(q.dialect == Dialect::Rest);
  CHECK(q.resource == "deals");
  REQUIRE(q.filters.size() == 3);
  CHECK(canon(*q.find("area_min")) == std::vector<std::string>{"1000"});
  CHECK(canon(*q.find("negotiation_status")) == std::vector<std::string>{"CONTRACT_CANCELED"});
  CHECK(canon(*q.find("initiation_year_min")) == std::vector<std::string>{"2016"});
  CHECK(q.selection.empty());
  CHECK(q.raw == kCanceled);
}

TEST_CASE("REST edge cases") {
  auto empty = parse_rest("/api/deals/");
  CHECK(empty.resource == "deals");
  CHECK(empty.filters.empty());

  auto repeated = parse_rest("/api/deals/?country_id=104&country_id=288");
  REQUIRE(repeated.filters.size() == 1);
  CHECK(canon(repeated.filters[0]) == std::vector<std::string>{"104", "288"});

  auto decoded = parse_rest("/api/deals/?crops=OIL%5FPALM&name=palm+oil");
  CHECK(canon(*decoded.find("crops")) == std::vector<std::string>{"OIL_PALM"});
  CHECK(canon(*decoded.find("name")) == std::vector<std::string>{"palm oil"});

  auto bare = parse_rest("?country_id=450");
  CHECK(bare.resource == "deals");
  CHECK(bare.filters.size() == 1);

  CHECK(kind_of([] { parse_rest(""); }) == ErrorKind::MalformedUrl);
  CHECK(kind_of([] { parse_rest("https://landmatrix.org/api/deals/?a=%zz"); }) == ErrorKind::MalformedUrl);
  CHECK(kind_of([] { parse_rest("ftp://landmatrix.org/api/deals/"); }) == ErrorKind::MalformedUrl);
  CHECK(kind_of([] { parse_rest("/api/deals/?area min=5"); }) == ErrorKind::MalformedUrl);

  try {
    parse_rest("/api/deals/?a=1&=2");
    FAIL("expected EmptyKey");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyKey);
    CHECK(e.position() == 16);
  }
}

TEST_CASE("REST serialization sorts keys") {
  auto q = parse_rest(kCanceled);
  CHECK(serialize(q) ==
        "/api/deals/?area_min=1000&initiation_year_min=2016&negotiation_status=CONTRACT_CANCELED");
  CHECK(serialize(parse_rest("https://landmatrix.org/api/deals/")) == "/api/deals/");
  CHECK(parse_rest(serialize(parse_rest("/api/deals/?name=palm+oil&x=a%26b"))) ==
        parse_rest("/api/deals/?name=palm+oil&x=a%26b"));
}

TEST_CASE("REST permutations are canonically equal") {
  auto a = parse_rest("/api/deals/?country_id=450&negotiation_status=CONTRACT_SIGNED&area_min=1000.0");
  auto b = parse_rest("https://landmatrix.org/api/deals/?area_min=1000&negotiation_status=CONTRACT_SIGNED&country_id=450");
  CHECK(a == b);
  CHECK(serialize(a) == serialize(b));
  CHECK_FALSE(a == parse_rest("/api/deals/?country_id=450"));
}

TEST_CASE("GraphQL basics") {
  auto q = parse_graphql("query { deals(limit: 10) { id } }");
  CHECK(q.dialect == Dialect::GraphQL);
  CHECK(q.resource == "deals");
  REQUIRE(q.filters.size() == 1);
  CHECK(q.filters[0].attribute() == "limit");
  CHECK(canon(q.filters[0]) == std::vector<std::string>{"10"});
  CHECK(q.selection == std::set<std::string>{"id"});

  auto shorthand = parse_graphql("{ deals(limit: 10) { id } }");
  CHECK(shorthand == q);

  auto nested = parse_graphql("query Q { deals { id country { name region { id } } } }");
  CHECK(nested.selection == std::set<std::string>{"id", "country.name", "country.region.id"});
}

TEST_CASE("GraphQL filter specs become dotted attributes") {
  auto q = parse_graphql(
      R"(query { deals(filters: [{field: "deal_size", operation: GE, value: 1000},
                               {field: "country_id", value: 450},
                               {field: "current_crops", operation: CONTAINS, value: ["SOYA_BEANS", "SUGAR_CANE"]},
                               {field: "transnational", operation: EQ, value: true, exclusion: true}]) { id } })");
  REQUIRE(q.find("deal_size.GE"));
  CHECK(canon(*q.find("deal_size.GE")) == std::vector<std::string>{"1000"});
  REQUIRE(q.find("country_id"));
  CHECK(canon(*q.find("current_crops.CONTAINS")) == std::vector<std::string>{"SOYA_BEANS", "SUGAR_CANE"});
  REQUIRE(q.find("transnational.exclude"));
  CHECK(q.find("transnational.exclude")->values()[0].kind == ValueKind::Boolean);

  auto obj = parse_graphql("query { deals(filter: {deal_size: {GE: 1000}, status: ACTIVE}) { id } }");
  REQUIRE(obj.find("filter.deal_size.GE"));
  CHECK(obj.find("filter.status")->values()[0].kind == ValueKind::Identifier);
}

TEST_CASE("GraphQL errors") {
  CHECK(kind_of([] { parse_graphql("query { deals { } }"); }) == ErrorKind::EmptySelection);
  CHECK(kind_of([] { parse_graphql("query A { deals { id } } query B { deals { id } }"); }) ==
        ErrorKind::MultipleOperations);
  CHECK(kind_of([] { parse_graphql("query { deals(limit: 10) { id }"); }) == ErrorKind::SyntaxError);
  CHECK(kind_of([] { parse_graphql("query { deals { ...F } }"); }) == ErrorKind::SyntaxError);
  CHECK(kind_of([] { parse_graphql("query ($n: Int) { deals(limit: $n) { id } }"); }) == ErrorKind::SyntaxError);
  CHECK(kind_of([] { parse_graphql(""); }) == ErrorKind::SyntaxError);
  CHECK(kind_of([] { parse_graphql("mutation { x { id } }"); }) == ErrorKind::SyntaxError);
}

TEST_CASE("GraphQL round trip and argument order") {
  auto text = "query { deals(limit: 10) { id } }";
  auto q = parse_graphql(text);
  CHECK(parse_graphql(serialize(q)) == q);

  auto a = parse_graphql(R"(query { deals(limit: 5, filters: [{field: "country_id", value: 450}, {field: "deal_size", operation: GE, value: 1000}]) { id deal_size } })");
  auto b = parse_graphql(R"(query { deals(filters: [{field: "deal_size", operation: GE, value: 1000.0}, {field: "country_id", value: 450}], limit: 5) { deal_size id } })");
  CHECK(a == b);
  CHECK(serialize(a) == serialize(b));

  auto s = parse_graphql(R"(query { deals(filters: [{field: "name", value: "a \"quoted\" \\ value"}]) { id } })");
  CHECK(parse_graphql(serialize(s)) == s);
}

TEST_CASE("shipped corpus round trips") {
  auto corpus = load_corpus(testing::data_dir() / "corpus.jsonl");
  std::size_t rest = 0, gql = 0;
  for (const auto& e : corpus.entries) {
    for (auto d : {Dialect::Rest, Dialect::GraphQL}) {
      if (!e.query(d)) continue;
      (d == Dialect::Rest ? rest : gql)++;
      auto q = parse_query(*e.query(d), d);
      auto again = parse_query(serialize(q), d);
      CHECK_MESSAGE(again == q, e.id);
      CHECK(serialize(again) == serialize(q));
    }
  }
  CHECK(rest >= 30);
  CHECK(gql >= 30);
}

TEST_CASE("filter set builder merges and sorts") {
  FilterSetBuilder b;
  b.add("z", normalize("1"));
  b.add("a", normalize("b"));
  b.add("z", normalize("1.0"));
  b.add("z", normalize("0"));
  auto filters = b.build();
  REQUIRE(filters.size() == 2);
  CHECK(filters[0].attribute() == "a");
  CHECK(canon(filters[1]) == std::vector<std::string>{"0", "1"});
  CHECK(kind_of([] { Filter("", {normalize("1")}); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([] { Filter("a", {}); }) == ErrorKind::InvalidArgument);
}

}
