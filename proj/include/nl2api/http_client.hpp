#pragma once

#include <chrono>
#include <string>
#include <utility>
#include <vector>

namespace nl2api {

struct HttpRequest {
  std::string method = "GET";
  std::string url;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
  std::chrono::milliseconds timeout{30000};
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Blocking HTTP transport. Implementations throw Error(Timeout) when the
/// deadline passes and Error(Transport) for any other connection failure;
/// every HTTP status, including 4xx/5xx, is returned normally.
class HttpClient {
 public:
  virtual ~HttpClient() = default;
  virtual HttpResponse send(const HttpRequest& request) = 0;
};

/// cpp-httplib backed transport (http and https).
class HttplibClient final : public HttpClient {
 public:
  HttpResponse send(const HttpRequest& request) override;
};

}  // namespace nl2api
