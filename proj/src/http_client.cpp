#include "nl2api/http_client.hpp"

#include <httplib.h>

#include "nl2api/error.hpp"
#include "nl2api/util.hpp"

namespace nl2api {

HttpResponse HttplibClient::send(const HttpRequest& request) {
  auto parts = split_url(request.url);
  if (parts.scheme != "http" && parts.scheme != "https")
    throw Error(ErrorKind::Transport, "unsupported URL: " + request.url, request.url);

  httplib::Client client(parts.scheme + "://" + parts.authority);
  auto seconds = std::chrono::duration_cast<std::chrono::seconds>(request.timeout);
  auto micros = std::chrono::duration_cast<std::chrono::microseconds>(request.timeout - seconds);
  client.set_connection_timeout(seconds.count(), micros.count());
  client.set_read_timeout(seconds.count(), micros.count());
  client.set_write_timeout(seconds.count(), micros.count());
  client.set_follow_location(true);

  httplib::Headers headers;
  std::string content_type = "application/json";
  for (const auto& [k, v] : request.headers) {
    if (to_lower(k) == "content-type") content_type = v;
    else headers.emplace(k, v);
  }

  std::string target = parts.path.empty() ? "/" : parts.path;
  if (parts.has_query) target += "?" + parts.query;

  httplib::Result result;
  if (request.method == "GET") {
    result = client.Get(target, headers);
  } else if (request.method == "POST") {
    result = client.Post(target, headers, request.body, content_type);
  } else {
    throw Error(ErrorKind::Transport, "unsupported method " + request.method);
  }

  if (!result) {
    auto err = result.error();
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
      throw Error(ErrorKind::Timeout, "request to " + request.url + " timed out (" + httplib::to_string(err) + ")",
                  request.url);
    throw Error(ErrorKind::Transport, "request to " + request.url + " failed: " + httplib::to_string(err),
                request.url);
  }
  return {result->status, result->body};
}

}  // namespace nl2api
