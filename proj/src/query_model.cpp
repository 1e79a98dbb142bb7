#include "nl2api/query_model.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "nl2api/error.hpp"
#include "nl2api/util.hpp"

namespace nl2api {

std::string_view to_string(Dialect d) { return d == Dialect::Rest ? "REST" : "GRAPHQL"; }

Dialect parse_dialect(std::string_view text) {
  auto t = to_lower(trim(text));
  if (t == "rest") return Dialect::Rest;
  if (t == "graphql" || t == "gql") return Dialect::GraphQL;
  throw Error(ErrorKind::InvalidArgument, "unknown dialect '" + std::string(text) + "'",
              std::string(text));
}

std::string_view to_string(ValueKind k) {
  switch (k) {
    case ValueKind::Number: return "number";
    case ValueKind::Text: return "text";
    case ValueKind::Boolean: return "boolean";
    case ValueKind::Identifier: return "identifier";
  }
  return "text";
}

// ---------------------------------------------------------------------------
// Values

std::string canonical_number(std::string_view text) {
  std::size_t i = 0;
  bool negative = false;
  if (i < text.size() && (text[i] == '+' || text[i] == '-')) {
    negative = text[i] == '-';
    ++i;
  }
  std::string int_digits;
  while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])))
    int_digits.push_back(text[i++]);
  std::string frac_digits;
  if (i < text.size() && text[i] == '.') {
    ++i;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])))
      frac_digits.push_back(text[i++]);
  }
  if (int_digits.empty() && frac_digits.empty()) return {};
  long exponent = 0;
  if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
    ++i;
    bool exp_negative = false;
    if (i < text.size() && (text[i] == '+' || text[i] == '-')) {
      exp_negative = text[i] == '-';
      ++i;
    }
    std::size_t start = i;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
      exponent = exponent * 10 + (text[i] - '0');
      if (exponent > 400) return {};
      ++i;
    }
    if (i == start) return {};
    if (exp_negative) exponent = -exponent;
  }
  if (i != text.size()) return {};

  std::string digits = int_digits + frac_digits;
  long point = static_cast<long>(int_digits.size()) + exponent;
  if (point < 0) {
    digits.insert(0, static_cast<std::size_t>(-point), '0');
    point = 0;
  }
  if (point > static_cast<long>(digits.size())) digits.append(point - digits.size(), '0');

  std::string whole = digits.substr(0, static_cast<std::size_t>(point));
  std::string frac = digits.substr(static_cast<std::size_t>(point));
  whole.erase(0, std::min(whole.find_first_not_of('0'), whole.size()));
  if (whole.empty()) whole = "0";
  while (!frac.empty() && frac.back() == '0') frac.pop_back();

  std::string out = whole;
  if (!frac.empty()) out += "." + frac;
  if (negative && out != "0") out.insert(0, "-");
  return out;
}

std::string NormalizedValue::match_key() const {
  return kind == ValueKind::Text ? to_lower(canonical) : canonical;
}

bool operator<(const NormalizedValue& a, const NormalizedValue& b) {
  if (a.kind != b.kind) return a.kind < b.kind;
  auto ka = a.match_key();
  auto kb = b.match_key();
  if (ka != kb) return ka < kb;
  return a.canonical < b.canonical;
}

NormalizedValue normalize(std::string_view raw) {
  NormalizedValue v;
  v.raw = std::string(raw);
  auto t = trim(raw);
  if (auto num = canonical_number(t); !num.empty()) {
    v.kind = ValueKind::Number;
    v.canonical = std::move(num);
    return v;
  }
  auto lower = to_lower(t);
  if (lower == "true" || lower == "false") {
    v.kind = ValueKind::Boolean;
    v.canonical = lower;
    return v;
  }
  v.kind = ValueKind::Text;
  v.canonical = t;
  return v;
}

NormalizedValue normalize_identifier(std::string_view raw) {
  NormalizedValue v;
  v.raw = std::string(raw);
  v.kind = ValueKind::Identifier;
  v.canonical = trim(raw);
  return v;
}

// ---------------------------------------------------------------------------
// Filters

Filter::Filter(std::string attribute, std::vector<NormalizedValue> values)
    : attribute_(std::move(attribute)), values_(std::move(values)) {
  if (attribute_.empty()) throw Error(ErrorKind::InvalidArgument, "filter attribute is empty");
  if (values_.empty())
    throw Error(ErrorKind::InvalidArgument, "filter '" + attribute_ + "' has no values",
                attribute_);
  std::sort(values_.begin(), values_.end());
  values_.erase(std::unique(values_.begin(), values_.end()), values_.end());
}

bool Filter::same_values(const Filter& other) const {
  return values_.size() == other.values_.size() &&
         std::equal(values_.begin(), values_.end(), other.values_.begin());
}

const Filter* CanonicalQuery::find(std::string_view attribute) const {
  auto it = std::lower_bound(filters.begin(), filters.end(), attribute,
                             [](const Filter& f, std::string_view a) { return f.attribute() < a; });
  if (it != filters.end() && it->attribute() == attribute) return &*it;
  return nullptr;
}

void FilterSetBuilder::add(const std::string& attribute, NormalizedValue value) {
  for (auto& [name, values] : entries_) {
    if (name == attribute) {
      values.push_back(std::move(value));
      return;
    }
  }
  entries_.push_back({attribute, {std::move(value)}});
}

std::vector<Filter> FilterSetBuilder::build() const {
  std::vector<Filter> out;
  out.reserve(entries_.size());
  for (const auto& [name, values] : entries_) out.emplace_back(name, values);
  std::sort(out.begin(), out.end(),
            [](const Filter& a, const Filter& b) { return a.attribute() < b.attribute(); });
  return out;
}

// ---------------------------------------------------------------------------
// REST

namespace {

std::string rest_resource(std::string_view encoded_path) {
  auto path = percent_decode(encoded_path, false);
  std::vector<std::string> segments;
  for (auto& seg : split(path, '/'))
    if (!seg.empty()) segments.push_back(seg);
  if (!segments.empty() && segments.front() == "api") segments.erase(segments.begin());
  return join(segments, "/");
}

}  // namespace

CanonicalQuery parse_rest(std::string_view text) {
  CanonicalQuery q;
  q.dialect = Dialect::Rest;
  q.raw = std::string(text);

  auto trimmed = trim(text);
  if (trimmed.empty()) throw Error(ErrorKind::MalformedUrl, "empty REST query");
  for (char c : trimmed) {
    if (std::isspace(static_cast<unsigned char>(c)))
      throw Error(ErrorKind::MalformedUrl, "whitespace inside URL", trimmed);
  }
  // Byte offset of the trimmed text within the original, for EmptyKey positions.
  const auto lead = text.find(trimmed.front());

  auto parts = split_url(trimmed);
  if (!parts.scheme.empty()) {
    if (parts.scheme != "http" && parts.scheme != "https")
      throw Error(ErrorKind::MalformedUrl, "unsupported scheme '" + parts.scheme + "'", trimmed);
    if (parts.authority.empty()) throw Error(ErrorKind::MalformedUrl, "URL has no host", trimmed);
  }

  bool bare_query = parts.scheme.empty() && parts.path.empty();
  q.resource = bare_query ? std::string("deals") : rest_resource(parts.path);
  if (q.resource.empty()) throw Error(ErrorKind::MalformedUrl, "URL names no resource", trimmed);

  FilterSetBuilder builder;
  if (parts.has_query) {
    const auto qmark = trimmed.find('?');
    const auto query_offset = lead + (qmark == std::string::npos ? 0 : qmark + 1);
    std::size_t pos = 0;
    for (const auto& pair : split(parts.query, '&')) {
      const auto here = pos;
      pos += pair.size() + 1;
      if (pair.empty()) continue;
      auto eq = pair.find('=');
      auto key = percent_decode(std::string_view(pair).substr(0, eq), true);
      if (key.empty())
        throw Error(ErrorKind::EmptyKey, "query parameter with empty key", pair,
                    static_cast<std::int64_t>(query_offset + here));
      std::string value;
      if (eq != std::string::npos) value = percent_decode(std::string_view(pair).substr(eq + 1), true);
      builder.add(key, normalize(value));
    }
  }
  q.filters = builder.build();
  return q;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

std::vector<const NormalizedValue*> by_canonical(const Filter& f) {
  std::vector<const NormalizedValue*> out;
  for (const auto& v : f.values()) out.push_back(&v);
  std::sort(out.begin(), out.end(), [](const NormalizedValue* a, const NormalizedValue* b) {
    return a->canonical < b->canonical;
  });
  return out;
}

std::string serialize_rest(const CanonicalQuery& q) {
  std::string out = "/api/";
  for (const auto& seg : split(q.resource, '/')) out += percent_encode(seg) + "/";
  std::vector<std::string> pairs;
  for (const auto& f : q.filters) {
    for (const auto* v : by_canonical(f))
      pairs.push_back(percent_encode(f.attribute()) + "=" + percent_encode(v->canonical));
  }
  if (!pairs.empty()) out += "?" + join(pairs, "&");
  return out;
}

bool is_graphql_name(std::string_view s) {
  if (s.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isalnum(c) || c == '_'; });
}

bool is_dotted_name(std::string_view s) {
  auto segs = split(s, '.');
  return std::all_of(segs.begin(), segs.end(), [](const std::string& x) { return is_graphql_name(x); });
}

std::string graphql_string(std::string_view s) {
  std::string out = "\"";
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      default:
        if (c < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out.push_back(static_cast<char>(c));
        }
    }
  }
  return out + "\"";
}

std::string graphql_value(const NormalizedValue& v) {
  switch (v.kind) {
    case ValueKind::Number:
    case ValueKind::Boolean:
    case ValueKind::Identifier: return v.canonical;
    case ValueKind::Text: return graphql_string(v.canonical);
  }
  return graphql_string(v.canonical);
}

std::string graphql_values(const Filter& f) {
  auto values = by_canonical(f);
  if (values.size() == 1) return graphql_value(*values.front());
  std::vector<std::string> items;
  for (const auto* v : values) items.push_back(graphql_value(*v));
  return "[" + join(items, ", ") + "]";
}

struct SelectionNode {
  std::map<std::string, SelectionNode> children;
  bool leaf = false;
};

std::string render_selection(const SelectionNode& node) {
  std::vector<std::string> parts;
  for (const auto& [name, child] : node.children) {
    if (child.leaf) parts.push_back(name);
    if (!child.children.empty()) parts.push_back(name + " { " + render_selection(child) + " }");
  }
  return join(parts, " ");
}

std::string serialize_graphql(const CanonicalQuery& q) {
  std::vector<std::string> args;
  std::vector<std::string> loose;
  for (const auto& f : q.filters) {
    if (is_dotted_name(f.attribute())) {
      auto segs = split(f.attribute(), '.');
      std::string arg = graphql_values(f);
      for (auto it = segs.rbegin(); it != segs.rend(); ++it) {
        arg = (it + 1 == segs.rend()) ? *it + ": " + arg : "{" + *it + ": " + arg + "}";
      }
      args.push_back(arg);
    } else {
      loose.push_back("{field: " + graphql_string(f.attribute()) + ", value: " + graphql_values(f) + "}");
    }
  }
  if (!loose.empty()) args.push_back("filters: [" + join(loose, ", ") + "]");

  std::string out = "query { " + q.resource;
  if (!args.empty()) out += "(" + join(args, ", ") + ")";
  if (!q.selection.empty()) {
    SelectionNode root;
    for (const auto& path : q.selection) {
      SelectionNode* node = &root;
      for (const auto& seg : split(path, '.')) node = &node->children[seg];
      node->leaf = true;
    }
    out += " { " + render_selection(root) + " }";
  }
  return out + " }";
}

}  // namespace

std::string serialize(const CanonicalQuery& q) {
  return q.dialect == Dialect::Rest ? serialize_rest(q) : serialize_graphql(q);
}

CanonicalQuery parse_query(std::string_view text, Dialect dialect) {
  return dialect == Dialect::Rest ? parse_rest(text) : parse_graphql(text);
}

}  // namespace nl2api
