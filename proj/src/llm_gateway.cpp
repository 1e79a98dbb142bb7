#include "nl2api/llm_gateway.hpp"

#include <cctype>
#include <regex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "nl2api/error.hpp"
#include "nl2api/util.hpp"

namespace nl2api {

using nlohmann::json;

std::string_view to_string(Role r) {
  switch (r) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

Role parse_role(std::string_view text) {
  if (text == "system") return Role::System;
  if (text == "user") return Role::User;
  if (text == "assistant") return Role::Assistant;
  throw Error(ErrorKind::InvalidArgument, "unknown chat role '" + std::string(text) + "'");
}

std::string_view to_string(BackendKind k) { return k == BackendKind::Live ? "live" : "scripted"; }

void ChatRequest::validate() const {
  if (model.empty()) throw Error(ErrorKind::InvalidArgument, "chat request has no model");
  if (messages.empty()) throw Error(ErrorKind::InvalidArgument, "chat request has no messages");
  if (messages.front().role == Role::Assistant)
    throw Error(ErrorKind::InvalidArgument, "first chat message must be system or user");
  if (!(temperature >= 0.0)) throw Error(ErrorKind::InvalidArgument, "temperature must be >= 0");
  if (max_tokens <= 0) throw Error(ErrorKind::InvalidArgument, "max_tokens must be positive");
}

namespace {

json messages_json(const std::vector<ChatMessage>& messages) {
  json out = json::array();
  for (const auto& m : messages) out.push_back({{"content", m.content}, {"role", std::string(to_string(m.role))}});
  return out;
}

std::vector<ChatMessage> messages_from_json(const json& arr) {
  std::vector<ChatMessage> out;
  for (const auto& m : arr) out.push_back({parse_role(m.at("role").get<std::string>()), m.at("content").get<std::string>()});
  return out;
}

}  // namespace

std::string cassette_key(const ChatRequest& request) {
  // nlohmann::json objects keep keys sorted, so the dump is canonical.
  return json{{"messages", messages_json(request.messages)},
              {"model", request.model},
              {"temperature", request.temperature}}
      .dump();
}

std::string cassette_hash(const ChatRequest& request) { return hex64(fnv1a64(cassette_key(request))); }

std::string to_jsonl(const CassetteRecord& record) {
  nlohmann::ordered_json j;
  j["key_hash"] = record.key_hash;
  j["model"] = record.model;
  j["temperature"] = record.temperature;
  j["messages"] = messages_json(record.messages);
  j["response_text"] = record.response_text;
  return j.dump();
}

// ---------------------------------------------------------------------------
// Scripted backend

ScriptedChatBackend ScriptedChatBackend::load(const std::filesystem::path& path) {
  ScriptedChatBackend backend;
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    try {
      auto j = json::parse(line);
      CassetteRecord r;
      r.model = j.at("model").get<std::string>();
      r.messages = messages_from_json(j.at("messages"));
      r.temperature = j.value("temperature", 0.0);
      r.response_text = j.at("response_text").get<std::string>();
      r.key_hash = j.value("key_hash", std::string{});
      backend.add(std::move(r));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::MalformedRecord, path.string() + ":" + std::to_string(number) + ": " + e.what(), {},
                  static_cast<std::int64_t>(number));
    }
  }
  return backend;
}

void ScriptedChatBackend::add(CassetteRecord record) {
  ChatRequest req{record.model, record.messages, record.temperature, 1};
  auto hash = cassette_hash(req);
  if (!record.key_hash.empty() && record.key_hash != hash)
    throw Error(ErrorKind::MalformedRecord, "cassette record hash " + record.key_hash + " does not match its content",
                record.key_hash);
  record.key_hash = hash;
  records_.insert_or_assign(hash, std::move(record));
}

void ScriptedChatBackend::add(const ChatRequest& request, std::string response) {
  add(CassetteRecord{cassette_hash(request), request.model, request.messages, request.temperature, std::move(response)});
}

ChatResponse ScriptedChatBackend::complete(const ChatRequest& request) {
  request.validate();
  auto hash = cassette_hash(request);
  auto it = records_.find(hash);
  if (it == records_.end())
    throw Error(ErrorKind::CassetteMiss, "no cassette entry for prompt hash " + hash, hash);
  const auto& r = it->second;
  if (r.model != request.model || r.messages != request.messages || r.temperature != request.temperature)
    throw Error(ErrorKind::CassetteMiss, "cassette hash collision on " + hash, hash);
  return {r.response_text, r.model, 0.0, BackendKind::Scripted};
}

// ---------------------------------------------------------------------------
// Live backend

LiveChatBackend::LiveChatBackend(HttpClient& http, LiveChatOptions options)
    : http_(http), options_(std::move(options)), in_flight_(std::clamp(options_.max_in_flight, 1, 256)) {
  if (options_.endpoint.empty()) throw Error(ErrorKind::InvalidArgument, "llm.endpoint is not configured");
  if (options_.token.empty())
    throw Error(ErrorKind::MissingCredential, "NL2API_LLM_TOKEN is not set; the live LLM backend needs a credential");
}

ChatResponse LiveChatBackend::complete(const ChatRequest& request) {
  request.validate();
  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<256>& s;
    ~Release() { s.release(); }
  } release{in_flight_};

  try {
    return attempt(request);
  } catch (const Error& e) {
    bool transient = e.kind() == ErrorKind::Timeout || e.kind() == ErrorKind::Transport ||
                     (e.kind() == ErrorKind::UpstreamError && e.position() &&
                      (*e.position() == 429 || *e.position() >= 500));
    if (!transient) throw;
    std::this_thread::sleep_for(std::chrono::milliseconds(500));
    return attempt(request);
  }
}

ChatResponse LiveChatBackend::attempt(const ChatRequest& request) {
  HttpRequest http_req;
  http_req.method = "POST";
  http_req.url = options_.endpoint;
  http_req.timeout = options_.timeout;
  http_req.headers = {{"Content-Type", "application/json"}, {"Authorization", "Bearer " + options_.token}};
  http_req.body = json{{"model", request.model},
                       {"messages", messages_json(request.messages)},
                       {"temperature", request.temperature},
                       {"max_tokens", request.max_tokens},
                       {"stream", false}}
                      .dump();

  auto start = std::chrono::steady_clock::now();
  auto resp = http_.send(http_req);
  auto latency = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

  if (resp.status == 401 || resp.status == 403)
    throw Error(ErrorKind::Unauthorized, "LLM endpoint rejected the credential (HTTP " + std::to_string(resp.status) + ")",
                options_.endpoint, resp.status);
  if (resp.status < 200 || resp.status > 299)
    throw Error(ErrorKind::UpstreamError, "LLM endpoint returned HTTP " + std::to_string(resp.status),
                options_.endpoint, resp.status);
  try {
    auto body = json::parse(resp.body);
    const auto& message = body.at("choices").at(0).at("message");
    std::string text = message.at("content").is_null() ? std::string{} : message.at("content").get<std::string>();
    return {std::move(text), body.value("model", request.model), latency, BackendKind::Live};
  } catch (const json::exception& e) {
    throw Error(ErrorKind::UpstreamError, std::string("unexpected completion body: ") + e.what(), options_.endpoint,
                resp.status);
  }
}

// ---------------------------------------------------------------------------
// Recording backend

RecordingChatBackend::RecordingChatBackend(ChatBackend& inner, std::filesystem::path cassette_path)
    : inner_(inner), path_(std::move(cassette_path)) {}

ChatResponse RecordingChatBackend::complete(const ChatRequest& request) {
  auto resp = inner_.complete(request);
  CassetteRecord record{cassette_hash(request), request.model, request.messages, request.temperature, resp.text};
  std::lock_guard lock(mutex_);
  append_line(path_, to_jsonl(record));
  return resp;
}

// ---------------------------------------------------------------------------
// Query extraction

namespace {

std::string_view first_fenced_block(std::string_view raw, std::size_t& after) {
  auto open = raw.find("```");
  if (open == std::string_view::npos) return {};
  auto body_start = raw.find('\n', open + 3);
  if (body_start == std::string_view::npos) return {};
  ++body_start;
  auto close = raw.find("```", body_start);
  if (close == std::string_view::npos) close = raw.size();
  after = std::min(raw.size(), close + 3);
  return raw.substr(body_start, close - body_start);
}

std::optional<std::string> find_rest(std::string_view text) {
  static const std::regex kUrl(R"((https?://|/api/)[^\s"'<>`]*)", std::regex::icase);
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(text.begin(), text.end(), m, kUrl)) return std::nullopt;
  std::string url = m.str();
  while (!url.empty() && std::string_view(".,;:!)]}'\"").find(url.back()) != std::string_view::npos) url.pop_back();
  if (url.empty()) return std::nullopt;
  return url;
}

std::optional<std::string> find_graphql(std::string_view text) {
  static const std::regex kQuery(R"(\bquery\b\s*(?:[_A-Za-z][_0-9A-Za-z]*\s*)?[({])");
  std::match_results<std::string_view::const_iterator> m;
  std::size_t start = std::string_view::npos;
  if (std::regex_search(text.begin(), text.end(), m, kQuery))
    start = static_cast<std::size_t>(m.position(0));
  auto brace = text.find('{');
  if (brace != std::string_view::npos && brace < start) start = brace;
  if (start == std::string_view::npos) return std::nullopt;

  auto open = text.find('{', start);
  if (open == std::string_view::npos) return trim(text.substr(start));
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      if (c == '\\') ++i;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return trim(text.substr(start, i + 1 - start));
  }
  return trim(text.substr(start));
}

std::optional<std::string> find_query(std::string_view text, Dialect dialect) {
  return dialect == Dialect::Rest ? find_rest(text) : find_graphql(text);
}

}  // namespace

std::string extract_query(std::string_view raw, Dialect dialect) {
  std::string_view rest = raw;
  while (true) {
    std::size_t after = 0;
    auto block = first_fenced_block(rest, after);
    if (after == 0) break;
    if (auto q = find_query(block, dialect)) return *q;
    rest = rest.substr(after);
  }
  if (auto q = find_query(raw, dialect)) return *q;
  throw Error(ErrorKind::NoQueryFound, "model produced no " + std::string(to_string(dialect)) + " query");
}

}  // namespace nl2api
