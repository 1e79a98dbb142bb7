#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace nl2api {

enum class Dialect { Rest, GraphQL };

/// "REST" / "GRAPHQL".
std::string_view to_string(Dialect d);
/// Case-insensitive; accepts "rest", "graphql", "gql". Throws InvalidArgument.
Dialect parse_dialect(std::string_view text);

enum class ValueKind { Number, Text, Boolean, Identifier };

std::string_view to_string(ValueKind k);

/// A filter value after normalization.
///
/// Numbers canonicalize to their shortest decimal form ("1000.0" -> "1000",
/// "007" -> "7"), booleans to lower case, text to its trimmed raw form.
/// Identifiers are GraphQL enum literals (and `null`) and are kept verbatim.
///
/// Two values are equal when their kinds agree and their match keys agree;
/// the match key of a text value is its lower-cased canonical form, every
/// other kind compares exactly.
struct NormalizedValue {
  std::string raw;
  ValueKind kind = ValueKind::Text;
  std::string canonical;

  std::string match_key() const;

  friend bool operator==(const NormalizedValue& a, const NormalizedValue& b) {
    return a.kind == b.kind && a.match_key() == b.match_key();
  }
  friend bool operator<(const NormalizedValue& a, const NormalizedValue& b);
};

/// Lexical normalization of a value as it appears in a query string or a
/// GraphQL string/number/boolean literal.
NormalizedValue normalize(std::string_view raw);
/// A GraphQL enum literal (or `null`).
NormalizedValue normalize_identifier(std::string_view raw);

/// Canonical decimal text for a numeric literal, or empty when `text` is not
/// a number. Exponents are expanded exactly.
std::string canonical_number(std::string_view text);

class Filter {
 public:
  /// Throws InvalidArgument when the attribute is empty or no value is given.
  Filter(std::string attribute, std::vector<NormalizedValue> values);

  const std::string& attribute() const noexcept { return attribute_; }
  /// Sorted by canonical form, duplicates collapsed.
  const std::vector<NormalizedValue>& values() const noexcept { return values_; }

  bool same_values(const Filter& other) const;

  friend bool operator==(const Filter& a, const Filter& b) {
    return a.attribute_ == b.attribute_ && a.same_values(b);
  }

 private:
  std::string attribute_;
  std::vector<NormalizedValue> values_;
};

/// Dialect-neutral query. Filters are keyed by attribute and kept sorted.
struct CanonicalQuery {
  Dialect dialect = Dialect::Rest;
  std::string resource;
  std::vector<Filter> filters;
  std::set<std::string> selection;  // dotted leaf paths; always empty for REST
  std::string raw;

  const Filter* find(std::string_view attribute) const;

  /// Canonical equality: raw text is not compared.
  friend bool operator==(const CanonicalQuery& a, const CanonicalQuery& b) {
    return a.dialect == b.dialect && a.resource == b.resource && a.filters == b.filters &&
           a.selection == b.selection;
  }
};

/// Accumulates (attribute, value) pairs, merging repeated attributes.
class FilterSetBuilder {
 public:
  void add(const std::string& attribute, NormalizedValue value);
  std::vector<Filter> build() const;

 private:
  std::vector<std::pair<std::string, std::vector<NormalizedValue>>> entries_;
};

/// Throws MalformedUrl or EmptyKey.
CanonicalQuery parse_rest(std::string_view text);
/// Throws SyntaxError, MultipleOperations or EmptySelection.
CanonicalQuery parse_graphql(std::string_view text);
CanonicalQuery parse_query(std::string_view text, Dialect dialect);

/// Deterministic text: REST as "/api/<resource>/?k=v&..." with sorted keys,
/// GraphQL as a single-line `query { ... }` document.
std::string serialize(const CanonicalQuery& q);

inline const std::vector<Filter>& filter_set(const CanonicalQuery& q) { return q.filters; }

}  // namespace nl2api
