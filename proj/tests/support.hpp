#pragma once

#include <atomic>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "nl2api/error.hpp"
#include "nl2api/http_client.hpp"
#include "nl2api/llm_gateway.hpp"
#include "nl2api/util.hpp"

namespace testing {

inline std::filesystem::path source_dir() { return NL2API_SOURCE_DIR; }
inline std::filesystem::path data_dir() { return source_dir() / "data"; }
inline std::filesystem::path mini_dir() { return source_dir() / "tests" / "fixtures" / "mini"; }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("nl2api-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  std::filesystem::path write(const std::string& name, const std::string& text) const {
    auto p = path_ / name;
    nl2api::write_file(p, text);
    return p;
  }

 private:
  std::filesystem::path path_;
};

// Records requests; replies come from a handler.
class FakeHttp : public nl2api::HttpClient {
 public:
  using Handler = std::function<nl2api::HttpResponse(const nl2api::HttpRequest&)>;
  explicit FakeHttp(Handler h = {}) : handler(std::move(h)) {}

  nl2api::HttpResponse send(const nl2api::HttpRequest& request) override {
    std::lock_guard lock(mutex);
    requests.push_back(request);
    if (!handler) throw nl2api::Error(nl2api::ErrorKind::Transport, "no route to host");
    return handler(request);
  }

  std::size_t calls() const {
    std::lock_guard lock(mutex);
    return requests.size();
  }

  Handler handler;
  mutable std::mutex mutex;
  std::vector<nl2api::HttpRequest> requests;
};

// Chat double: answers from a queue (or a function) and keeps every request.
class QueueChat : public nl2api::ChatBackend {
 public:
  std::deque<std::string> replies;
  std::function<std::string(const nl2api::ChatRequest&)> answer;
  std::vector<nl2api::ChatRequest> seen;
  std::optional<nl2api::ErrorKind> fail_with;

  nl2api::ChatResponse complete(const nl2api::ChatRequest& request) override {
    request.validate();
    seen.push_back(request);
    if (fail_with) throw nl2api::Error(*fail_with, "scripted failure");
    std::string text;
    if (answer) {
      text = answer(request);
    } else {
      if (replies.empty()) throw nl2api::Error(nl2api::ErrorKind::CassetteMiss, "queue empty");
      text = replies.front();
      replies.pop_front();
    }
    return {text, request.model, 0.0, nl2api::BackendKind::Scripted};
  }
  nl2api::BackendKind kind() const override { return nl2api::BackendKind::Scripted; }
};

}  // namespace testing
