// Minimal GraphQL reader: a single query operation made of fields,
// arguments and scalar/list/object values. Aliases are accepted and ignored;
// variables, directives and fragments are rejected.

#include <cctype>
#include <string>
#include <utility>
#include <vector>

#include "nl2api/error.hpp"
#include "nl2api/query_model.hpp"
#include "nl2api/util.hpp"

namespace nl2api {
namespace {

enum class TokenType { Punct, Spread, Name, Int, Float, String, End };

struct Token {
  TokenType type = TokenType::End;
  std::string text;
  std::size_t offset = 0;
};

[[noreturn]] void syntax_error(std::size_t offset, const std::string& message) {
  throw Error(ErrorKind::SyntaxError, "GraphQL syntax error at offset " + std::to_string(offset) + ": " + message,
              message, static_cast<std::int64_t>(offset));
}

void append_utf8(std::string& out, unsigned code) {
  if (code < 0x80) {
    out.push_back(static_cast<char>(code));
  } else if (code < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (code >> 6)));
    out.push_back(static_cast<char>(0x80 | (code & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xE0 | (code >> 12)));
    out.push_back(static_cast<char>(0x80 | ((code >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (code & 0x3F)));
  }
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {
    if (src_.substr(0, 3) == "\xEF\xBB\xBF") pos_ = 3;
  }

  Token next() {
    skip_ignored();
    Token tok;
    tok.offset = pos_;
    if (pos_ >= src_.size()) return tok;

    char c = src_[pos_];
    if (c == '.') {
      if (src_.substr(pos_, 3) == "...") {
        pos_ += 3;
        tok.type = TokenType::Spread;
        tok.text = "...";
        return tok;
      }
      syntax_error(pos_, "unexpected '.'");
    }
    if (std::string_view("!$()[]{}:=@|&").find(c) != std::string_view::npos) {
      ++pos_;
      tok.type = TokenType::Punct;
      tok.text = std::string(1, c);
      return tok;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        ++pos_;
      tok.type = TokenType::Name;
      tok.text = std::string(src_.substr(start, pos_ - start));
      return tok;
    }
    if (c == '-' || std::isdigit(static_cast<unsigned char>(c))) return number(tok);
    if (c == '"') return string(tok);
    syntax_error(pos_, std::string("unexpected character '") + c + "'");
  }

 private:
  void skip_ignored() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == ',') {
        ++pos_;
      } else if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  Token number(Token tok) {
    std::size_t start = pos_;
    bool is_float = false;
    if (src_[pos_] == '-') ++pos_;
    auto digits = [&] {
      std::size_t s = pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      if (s == pos_) syntax_error(pos_, "expected digit");
    };
    digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      is_float = true;
      ++pos_;
      digits();
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      is_float = true;
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      digits();
    }
    tok.type = is_float ? TokenType::Float : TokenType::Int;
    tok.text = std::string(src_.substr(start, pos_ - start));
    return tok;
  }

  Token string(Token tok) {
    tok.type = TokenType::String;
    if (src_.substr(pos_, 3) == "\"\"\"") {
      pos_ += 3;
      auto end = src_.find("\"\"\"", pos_);
      while (end != std::string_view::npos && end > 0 && src_[end - 1] == '\\')
        end = src_.find("\"\"\"", end + 1);
      if (end == std::string_view::npos) syntax_error(tok.offset, "unterminated block string");
      std::string body(src_.substr(pos_, end - pos_));
      for (std::size_t p; (p = body.find("\\\"\"\"")) != std::string::npos;) body.replace(p, 4, "\"\"\"");
      tok.text = trim(body);
      pos_ = end + 3;
      return tok;
    }
    ++pos_;
    std::string out;
    while (true) {
      if (pos_ >= src_.size() || src_[pos_] == '\n') syntax_error(tok.offset, "unterminated string");
      char c = src_[pos_++];
      if (c == '"') break;
      if (c != '\\') {
        out.push_back(c);
        continue;
      }
      if (pos_ >= src_.size()) syntax_error(tok.offset, "unterminated string");
      char e = src_[pos_++];
      switch (e) {
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        case '/': out.push_back('/'); break;
        case 'b': out.push_back('\b'); break;
        case 'f': out.push_back('\f'); break;
        case 'n': out.push_back('\n'); break;
        case 'r': out.push_back('\r'); break;
        case 't': out.push_back('\t'); break;
        case 'u': {
          if (pos_ + 4 > src_.size()) syntax_error(pos_, "truncated unicode escape");
          unsigned code = 0;
          for (int i = 0; i < 4; ++i) {
            char h = src_[pos_++];
            code <<= 4;
            if (h >= '0' && h <= '9') code |= static_cast<unsigned>(h - '0');
            else if (h >= 'a' && h <= 'f') code |= static_cast<unsigned>(h - 'a' + 10);
            else if (h >= 'A' && h <= 'F') code |= static_cast<unsigned>(h - 'A' + 10);
            else syntax_error(pos_ - 1, "invalid unicode escape");
          }
          append_utf8(out, code);
          break;
        }
        default: syntax_error(pos_ - 1, std::string("invalid escape '\\") + e + "'");
      }
    }
    tok.text = std::move(out);
    return tok;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

struct Value {
  enum class Type { Int, Float, String, Boolean, Null, Enum, List, Object } type = Type::Null;
  std::string scalar;
  std::vector<Value> items;
  std::vector<std::pair<std::string, Value>> members;

  bool is_scalar() const { return type != Type::List && type != Type::Object; }
  const Value* member(std::string_view name) const {
    for (const auto& [k, v] : members)
      if (k == name) return &v;
    return nullptr;
  }
};

struct Field {
  std::string name;
  std::vector<std::pair<std::string, Value>> arguments;
  std::vector<Field> selection;
};

class Parser {
 public:
  explicit Parser(std::string_view src) : lexer_(src) { advance(); }

  std::vector<Field> document() {
    if (tok_.type == TokenType::End) syntax_error(tok_.offset, "empty document");
    auto root = operation();
    if (tok_.type != TokenType::End) {
      if (is_punct("{") ||
          (tok_.type == TokenType::Name &&
           (tok_.text == "query" || tok_.text == "mutation" || tok_.text == "subscription")))
        throw Error(ErrorKind::MultipleOperations, "document contains more than one operation", {},
                    static_cast<std::int64_t>(tok_.offset));
      if (tok_.type == TokenType::Name && tok_.text == "fragment")
        syntax_error(tok_.offset, "fragments are not supported");
      syntax_error(tok_.offset, "unexpected token '" + tok_.text + "' after operation");
    }
    return root;
  }

 private:
  void advance() { tok_ = lexer_.next(); }
  bool is_punct(std::string_view p) const { return tok_.type == TokenType::Punct && tok_.text == p; }

  void expect_punct(std::string_view p) {
    if (!is_punct(p)) syntax_error(tok_.offset, "expected '" + std::string(p) + "'" + found());
    advance();
  }

  std::string expect_name() {
    if (tok_.type != TokenType::Name) syntax_error(tok_.offset, "expected a name" + found());
    auto name = tok_.text;
    advance();
    return name;
  }

  std::string found() const {
    if (tok_.type == TokenType::End) return ", found end of document";
    return ", found '" + tok_.text + "'";
  }

  void reject_unsupported() {
    if (is_punct("@")) syntax_error(tok_.offset, "directives are not supported");
    if (is_punct("$")) syntax_error(tok_.offset, "variables are not supported");
  }

  std::vector<Field> operation() {
    if (tok_.type == TokenType::Name) {
      if (tok_.text == "fragment") syntax_error(tok_.offset, "fragments are not supported");
      if (tok_.text == "mutation" || tok_.text == "subscription")
        syntax_error(tok_.offset, "only query operations are supported");
      if (tok_.text != "query") syntax_error(tok_.offset, "expected 'query' or '{'" + found());
      advance();
      if (tok_.type == TokenType::Name) advance();
      if (is_punct("(")) syntax_error(tok_.offset, "variables are not supported");
      reject_unsupported();
    }
    return selection_set();
  }

  std::vector<Field> selection_set() {
    auto open = tok_.offset;
    expect_punct("{");
    if (is_punct("}"))
      throw Error(ErrorKind::EmptySelection, "empty selection set at offset " + std::to_string(open), {},
                  static_cast<std::int64_t>(open));
    std::vector<Field> fields;
    while (!is_punct("}")) {
      if (tok_.type == TokenType::Spread) syntax_error(tok_.offset, "fragments are not supported");
      if (tok_.type == TokenType::End) syntax_error(tok_.offset, "unterminated selection set");
      fields.push_back(field());
    }
    advance();
    return fields;
  }

  Field field() {
    Field f;
    f.name = expect_name();
    if (is_punct(":")) {
      advance();
      f.name = expect_name();
    }
    if (is_punct("(")) {
      advance();
      if (is_punct(")")) syntax_error(tok_.offset, "empty argument list");
      while (!is_punct(")")) {
        auto name = expect_name();
        expect_punct(":");
        f.arguments.emplace_back(std::move(name), value());
      }
      advance();
    }
    reject_unsupported();
    if (is_punct("{")) f.selection = selection_set();
    return f;
  }

  Value value() {
    reject_unsupported();
    Value v;
    switch (tok_.type) {
      case TokenType::Int: v.type = Value::Type::Int; break;
      case TokenType::Float: v.type = Value::Type::Float; break;
      case TokenType::String: v.type = Value::Type::String; break;
      case TokenType::Name:
        if (tok_.text == "true" || tok_.text == "false") v.type = Value::Type::Boolean;
        else if (tok_.text == "null") v.type = Value::Type::Null;
        else v.type = Value::Type::Enum;
        break;
      case TokenType::Punct:
        if (tok_.text == "[") {
          advance();
          v.type = Value::Type::List;
          while (!is_punct("]")) {
            if (tok_.type == TokenType::End) syntax_error(tok_.offset, "unterminated list");
            v.items.push_back(value());
          }
          advance();
          return v;
        }
        if (tok_.text == "{") {
          advance();
          v.type = Value::Type::Object;
          while (!is_punct("}")) {
            auto name = expect_name();
            expect_punct(":");
            v.members.emplace_back(std::move(name), value());
          }
          advance();
          return v;
        }
        [[fallthrough]];
      default: syntax_error(tok_.offset, "expected a value" + found());
    }
    v.scalar = tok_.text;
    advance();
    return v;
  }

  Lexer lexer_;
  Token tok_;
};

NormalizedValue scalar_value(const Value& v) {
  switch (v.type) {
    case Value::Type::Enum: return normalize_identifier(v.scalar);
    case Value::Type::Null: return normalize_identifier("null");
    default: return normalize(v.scalar);
  }
}

bool is_filter_spec(const Value& v) {
  if (v.type != Value::Type::Object) return false;
  const auto* field = v.member("field");
  if (!field || (field->type != Value::Type::String && field->type != Value::Type::Enum)) return false;
  for (const auto& [k, _] : v.members)
    if (k != "field" && k != "operation" && k != "value" && k != "exclusion") return false;
  return true;
}

void flatten(FilterSetBuilder& out, const std::string& path, const Value& v);

// `{field: "x", operation: GE, value: 3}` list items (the deals-style filter
// argument) become attribute "x.GE"; EQ or a missing operation leaves "x".
void flatten_filter_spec(FilterSetBuilder& out, const Value& spec) {
  std::string attribute = spec.member("field")->scalar;
  if (const auto* op = spec.member("operation"); op && op->is_scalar() && op->scalar != "EQ")
    attribute += "." + op->scalar;
  if (const auto* ex = spec.member("exclusion"); ex && ex->type == Value::Type::Boolean && ex->scalar == "true")
    attribute += ".exclude";
  if (const auto* value = spec.member("value")) flatten(out, attribute, *value);
}

void flatten(FilterSetBuilder& out, const std::string& path, const Value& v) {
  switch (v.type) {
    case Value::Type::Object:
      for (const auto& [k, member] : v.members) flatten(out, path.empty() ? k : path + "." + k, member);
      return;
    case Value::Type::List:
      for (const auto& item : v.items) {
        if (is_filter_spec(item)) flatten_filter_spec(out, item);
        else flatten(out, path, item);
      }
      return;
    default: out.add(path, scalar_value(v));
  }
}

void collect_paths(const std::vector<Field>& fields, const std::string& prefix, std::set<std::string>& out) {
  for (const auto& f : fields) {
    auto path = prefix.empty() ? f.name : prefix + "." + f.name;
    if (f.selection.empty()) out.insert(path);
    else collect_paths(f.selection, path, out);
  }
}

}  // namespace

CanonicalQuery parse_graphql(std::string_view text) {
  Parser parser(text);
  auto roots = parser.document();
  const Field& root = roots.front();

  CanonicalQuery q;
  q.dialect = Dialect::GraphQL;
  q.raw = std::string(text);
  q.resource = root.name;
  FilterSetBuilder builder;
  for (const auto& [name, value] : root.arguments) flatten(builder, name, value);
  q.filters = builder.build();
  collect_paths(root.selection, "", q.selection);
  return q;
}

}  // namespace nl2api
