#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "nl2api/http_client.hpp"
#include "nl2api/query_model.hpp"

namespace nl2api {

enum class Role { System, User, Assistant };

std::string_view to_string(Role r);
Role parse_role(std::string_view text);

struct ChatMessage {
  Role role = Role::User;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 1024;

  /// Throws InvalidArgument: empty model or messages, first message not
  /// system/user, negative temperature, non-positive max_tokens.
  void validate() const;
};

enum class BackendKind { Live, Scripted };

std::string_view to_string(BackendKind k);

struct ChatResponse {
  std::string text;
  std::string model;
  double latency_ms = 0.0;
  BackendKind backend = BackendKind::Scripted;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
  virtual BackendKind kind() const = 0;
};

inline ChatResponse complete(const ChatRequest& request, ChatBackend& backend) { return backend.complete(request); }

/// Canonical serialization of (model, messages, temperature): the full
/// cassette key. `cassette_hash` is its 64-bit FNV-1a digest in hex.
std::string cassette_key(const ChatRequest& request);
std::string cassette_hash(const ChatRequest& request);

struct CassetteRecord {
  std::string key_hash;
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  std::string response_text;
};

std::string to_jsonl(const CassetteRecord& record);

/// Replays completions from a line-delimited cassette
/// {key_hash, model, temperature, messages, response_text}. Unknown requests
/// raise CassetteMiss(subject = hash); a hash that matches a record with
/// different content is reported as a collision miss.
class ScriptedChatBackend final : public ChatBackend {
 public:
  ScriptedChatBackend() = default;
  static ScriptedChatBackend load(const std::filesystem::path& path);

  void add(CassetteRecord record);
  /// Convenience for tests and fixture tools: records `response` for `request`.
  void add(const ChatRequest& request, std::string response);
  std::size_t size() const noexcept { return records_.size(); }

  ChatResponse complete(const ChatRequest& request) override;
  BackendKind kind() const override { return BackendKind::Scripted; }

 private:
  std::map<std::string, CassetteRecord> records_;
};

struct LiveChatOptions {
  std::string endpoint;  // full chat-completions URL
  std::string token;
  std::chrono::milliseconds timeout{120000};
  int max_in_flight = 4;
};

/// OpenAI-compatible chat completions over HTTP. Retries once on a transient
/// failure (timeout, transport error, 429, 5xx). 401/403 map to Unauthorized,
/// other non-2xx statuses to UpstreamError(position = status).
class LiveChatBackend final : public ChatBackend {
 public:
  LiveChatBackend(HttpClient& http, LiveChatOptions options);

  ChatResponse complete(const ChatRequest& request) override;
  BackendKind kind() const override { return BackendKind::Live; }

 private:
  ChatResponse attempt(const ChatRequest& request);

  HttpClient& http_;
  LiveChatOptions options_;
  std::counting_semaphore<256> in_flight_;
};

/// Forwards to another backend and appends each completion to a cassette.
class RecordingChatBackend final : public ChatBackend {
 public:
  RecordingChatBackend(ChatBackend& inner, std::filesystem::path cassette_path);

  ChatResponse complete(const ChatRequest& request) override;
  BackendKind kind() const override { return inner_.kind(); }

 private:
  ChatBackend& inner_;
  std::filesystem::path path_;
  std::mutex mutex_;
};

/// Pulls the candidate query out of a raw completion. A fenced code block, if
/// present, narrows the search. REST: the first http(s):// URL or /api/ path.
/// GraphQL: the first brace-balanced block opened by `query` or `{`.
/// Throws NoQueryFound.
std::string extract_query(std::string_view raw, Dialect dialect);

}  // namespace nl2api
