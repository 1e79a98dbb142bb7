#include "nl2api/util.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "nl2api/error.hpp"

namespace nl2api {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NotFound: return "NotFound";
    case ErrorKind::MalformedRecord: return "MalformedRecord";
    case ErrorKind::DuplicateId: return "DuplicateId";
    case ErrorKind::UnparseableQuery: return "UnparseableQuery";
    case ErrorKind::CorpusTooSmall: return "CorpusTooSmall";
    case ErrorKind::MalformedVocabulary: return "MalformedVocabulary";
    case ErrorKind::EnumeratedWithoutValues: return "EnumeratedWithoutValues";
    case ErrorKind::MalformedUrl: return "MalformedUrl";
    case ErrorKind::EmptyKey: return "EmptyKey";
    case ErrorKind::SyntaxError: return "SyntaxError";
    case ErrorKind::MultipleOperations: return "MultipleOperations";
    case ErrorKind::EmptySelection: return "EmptySelection";
    case ErrorKind::BackendUnavailable: return "BackendUnavailable";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::MalformedIndex: return "MalformedIndex";
    case ErrorKind::Timeout: return "Timeout";
    case ErrorKind::Unauthorized: return "Unauthorized";
    case ErrorKind::CassetteMiss: return "CassetteMiss";
    case ErrorKind::UpstreamError: return "UpstreamError";
    case ErrorKind::NoQueryFound: return "NoQueryFound";
    case ErrorKind::MissingCredential: return "MissingCredential";
    case ErrorKind::MissingExamples: return "MissingExamples";
    case ErrorKind::Transport: return "Transport";
    case ErrorKind::ShapeUnrecognized: return "ShapeUnrecognized";
    case ErrorKind::RateLimited: return "RateLimited";
    case ErrorKind::MalformedConfig: return "MalformedConfig";
  }
  return "Unknown";
}

std::string trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return std::string(s);
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  return to_lower(s.substr(0, prefix.size())) == to_lower(prefix);
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      break;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::NotFound, "cannot open " + path.string(), path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::NotFound, "cannot write " + path.string(), path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

void append_line(const std::filesystem::path& path, std::string_view line) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorKind::NotFound, "cannot append to " + path.string(), path.string());
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  out.put('\n');
  out.flush();
}

namespace {

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

std::string percent_decode(std::string_view s, bool plus_as_space) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c == '%') {
      if (i + 2 >= s.size()) {
        throw Error(ErrorKind::MalformedUrl, "truncated percent escape", std::string(s),
                    static_cast<std::int64_t>(i));
      }
      int hi = hex_value(s[i + 1]);
      int lo = hex_value(s[i + 2]);
      if (hi < 0 || lo < 0) {
        throw Error(ErrorKind::MalformedUrl, "invalid percent escape", std::string(s),
                    static_cast<std::int64_t>(i));
      }
      out.push_back(static_cast<char>(hi * 16 + lo));
      i += 2;
    } else if (c == '+' && plus_as_space) {
      out.push_back(' ');
    } else {
      out.push_back(c);
    }
  }
  return out;
}

std::string percent_encode(std::string_view s) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '.' || c == '_' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xF]);
    }
  }
  return out;
}

UrlParts split_url(std::string_view text) {
  UrlParts parts;
  if (auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);

  auto take_query = [&](std::string_view rest) {
    if (auto q = rest.find('?'); q != std::string_view::npos) {
      parts.query = std::string(rest.substr(q + 1));
      parts.has_query = true;
      rest = rest.substr(0, q);
    }
    return rest;
  };

  if (auto sep = text.find("://"); sep != std::string_view::npos) {
    parts.scheme = to_lower(text.substr(0, sep));
    auto rest = text.substr(sep + 3);
    auto path_start = rest.find_first_of("/?");
    if (path_start == std::string_view::npos) {
      parts.authority = std::string(rest);
      return parts;
    }
    parts.authority = std::string(rest.substr(0, path_start));
    rest = take_query(rest.substr(path_start));
    parts.path = std::string(rest);
    return parts;
  }
  if (!text.empty() && text.front() == '?') {
    parts.query = std::string(text.substr(1));
    parts.has_query = true;
    return parts;
  }
  auto eq = text.find('=');
  auto slash = text.find('/');
  if (!text.empty() && text.front() != '/' && eq != std::string_view::npos &&
      (slash == std::string_view::npos || slash > eq)) {
    parts.query = std::string(text);
    parts.has_query = true;
    return parts;
  }
  parts.path = std::string(take_query(text));
  return parts;
}

std::string utc_timestamp() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace nl2api
