#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "nl2api/http_client.hpp"
#include "nl2api/query_model.hpp"

namespace nl2api {

using DealId = std::int64_t;

enum class RunMode { Live, Cassette, Record };

std::string_view to_string(RunMode m);
RunMode parse_run_mode(std::string_view text);

enum class ResultSource { Live, Cassette };

std::string_view to_string(ResultSource s);

struct ExecutionResult {
  int status = 0;  // HTTP status; 0 when no call was made
  std::optional<nlohmann::json> payload;
  bool valid = false;
  std::set<DealId> result_ids;
  ResultSource source = ResultSource::Live;
  std::vector<std::string> warnings;
};

/// REST: 2xx and a JSON body. GraphQL: additionally no top-level "errors".
bool is_valid(int status, std::string_view body, Dialect dialect);

/// Deal ids of the result collection: a top-level array, a "results" array or
/// a single deal object for REST; data.<root_field> for GraphQL (the first
/// member of "data" when no root field is given). Only each element's own
/// integer "id" counts. Throws ShapeUnrecognized.
std::set<DealId> extract_result_ids(const nlohmann::json& payload, Dialect dialect, std::string_view root_field = {});

/// Token bucket shared by every live call of a process. `acquire` blocks
/// until a token is available; after `shutdown` it throws RateLimited.
class TokenBucket {
 public:
  explicit TokenBucket(double rate_per_second, double burst = 1.0);

  void acquire();
  void shutdown();

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  double rate_;
  double burst_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
  bool stopped_ = false;
};

struct ApiCassetteRecord {
  std::string key;
  Dialect dialect = Dialect::Rest;
  int status = 0;
  std::string body_text;
  std::string recorded_at;
};

/// Line-delimited {key, dialect, status, body_text, recorded_at}. The last
/// record for a key wins. Appends are serialized.
class ApiCassette {
 public:
  ApiCassette() = default;
  static std::shared_ptr<ApiCassette> open(const std::filesystem::path& path);

  std::optional<ApiCassetteRecord> lookup(const std::string& key) const;
  void put(ApiCassetteRecord record);
  /// Adds the record and appends it to the backing file, if any.
  void append(ApiCassetteRecord record);
  std::size_t size() const;

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::map<std::string, ApiCassetteRecord> records_;
};

std::string to_jsonl(const ApiCassetteRecord& record);

/// "<DIALECT> <canonical serialization>" when the query parses locally,
/// otherwise "<DIALECT> <trimmed raw text>".
std::string api_cassette_key(std::string_view query_text, Dialect dialect);

struct ExecutorConfig {
  std::string rest_base = "https://landmatrix.org/api/";
  std::string graphql_url = "https://landmatrix.org/graphql/";
  std::chrono::milliseconds timeout{30000};
};

class ApiExecutor {
 public:
  /// `http` may be null in cassette mode; `cassette` is required in cassette
  /// and record mode.
  ApiExecutor(ExecutorConfig config, RunMode mode, HttpClient* http, std::shared_ptr<ApiCassette> cassette,
              std::shared_ptr<TokenBucket> limiter);

  /// Empty text is invalid without a call. Cassette mode never touches the
  /// network and raises CassetteMiss; live calls raise Transport/Timeout.
  ExecutionResult execute(std::string_view query_text, Dialect dialect) const;

  /// Maps a REST query (absolute URL, /api/ path or bare query string) onto
  /// the configured base.
  std::string resolve_rest_url(std::string_view query_text) const;

  RunMode mode() const noexcept { return mode_; }
  const ExecutorConfig& config() const noexcept { return config_; }

 private:
  HttpResponse call(std::string_view query_text, Dialect dialect) const;

  ExecutorConfig config_;
  RunMode mode_;
  HttpClient* http_;
  std::shared_ptr<ApiCassette> cassette_;
  std::shared_ptr<TokenBucket> limiter_;
};

}  // namespace nl2api
