#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace nl2api {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// 64-bit FNV-1a. Stable across platforms; used for cassette keys and digests.
std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t value);

/// Throws Error(NotFound) when the file cannot be opened.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);
void append_line(const std::filesystem::path& path, std::string_view line);

/// Decodes %XX escapes; `plus_as_space` applies form-encoding rules.
/// Throws Error(MalformedUrl) on a truncated or non-hex escape.
std::string percent_decode(std::string_view s, bool plus_as_space);
/// Escapes everything outside the RFC 3986 unreserved set.
std::string percent_encode(std::string_view s);

struct UrlParts {
  std::string scheme;     // empty for relative references
  std::string authority;  // host[:port]
  std::string path;
  std::string query;
  bool has_query = false;
};

/// Splits an absolute URL, absolute path or bare query string. The fragment
/// is dropped. Does not decode.
UrlParts split_url(std::string_view text);

std::string utc_timestamp();

}  // namespace nl2api
