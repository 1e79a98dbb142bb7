#include "nl2api/api_executor.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "nl2api/error.hpp"
#include "nl2api/util.hpp"

namespace nl2api {

using nlohmann::json;

std::string_view to_string(RunMode m) {
  switch (m) {
    case RunMode::Live: return "live";
    case RunMode::Cassette: return "cassette";
    case RunMode::Record: return "record";
  }
  return "cassette";
}

RunMode parse_run_mode(std::string_view text) {
  auto t = to_lower(trim(text));
  if (t == "live") return RunMode::Live;
  if (t == "cassette") return RunMode::Cassette;
  if (t == "record") return RunMode::Record;
  throw Error(ErrorKind::InvalidArgument, "unknown mode '" + std::string(text) + "' (valid: live, cassette, record)",
              std::string(text));
}

std::string_view to_string(ResultSource s) { return s == ResultSource::Live ? "live" : "cassette"; }

bool is_valid(int status, std::string_view body, Dialect dialect) {
  if (status < 200 || status > 299) return false;
  json parsed = json::parse(body.begin(), body.end(), nullptr, false);
  if (parsed.is_discarded()) return false;
  if (dialect == Dialect::GraphQL && parsed.is_object() && parsed.contains("errors")) return false;
  return true;
}

namespace {

std::optional<DealId> as_deal_id(const json& v) {
  if (v.is_number_integer()) return v.get<DealId>();
  if (v.is_number_unsigned()) return static_cast<DealId>(v.get<std::uint64_t>());
  if (v.is_string()) {
    const auto& s = v.get_ref<const std::string&>();
    if (!s.empty() && s.size() < 19 && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); }))
      return std::stoll(s);
  }
  return std::nullopt;
}

void collect_ids(const json& collection, std::set<DealId>& out) {
  auto take = [&](const json& item) {
    if (!item.is_object()) return;
    if (auto it = item.find("id"); it != item.end())
      if (auto id = as_deal_id(*it)) out.insert(*id);
  };
  if (collection.is_array()) {
    for (const auto& item : collection) take(item);
  } else {
    take(collection);
  }
}

[[noreturn]] void unrecognized(const json& payload) {
  auto text = payload.dump();
  throw Error(ErrorKind::ShapeUnrecognized, "unrecognised payload shape (digest " + hex64(fnv1a64(text)) + ")",
              hex64(fnv1a64(text)));
}

}  // namespace

std::set<DealId> extract_result_ids(const json& payload, Dialect dialect, std::string_view root_field) {
  std::set<DealId> ids;
  if (dialect == Dialect::Rest) {
    if (payload.is_array()) {
      collect_ids(payload, ids);
    } else if (payload.is_object() && payload.contains("results") && payload["results"].is_array()) {
      collect_ids(payload["results"], ids);
    } else if (payload.is_object() && payload.contains("id")) {
      collect_ids(payload, ids);
    } else {
      unrecognized(payload);
    }
    return ids;
  }

  if (!payload.is_object() || !payload.contains("data") || !payload["data"].is_object()) unrecognized(payload);
  const auto& data = payload["data"];
  const json* collection = nullptr;
  if (!root_field.empty()) {
    if (auto it = data.find(std::string(root_field)); it != data.end()) collection = &*it;
  }
  if (!collection && !data.empty()) collection = &data.begin().value();
  if (!collection) unrecognized(payload);
  if (collection->is_null()) return ids;
  if (!collection->is_array() && !collection->is_object()) unrecognized(payload);
  collect_ids(*collection, ids);
  return ids;
}

// ---------------------------------------------------------------------------
// Rate limiting

TokenBucket::TokenBucket(double rate_per_second, double burst)
    : rate_(rate_per_second), burst_(std::max(1.0, burst)), tokens_(std::max(1.0, burst)),
      last_(std::chrono::steady_clock::now()) {
  if (!(rate_ > 0.0)) throw Error(ErrorKind::InvalidArgument, "rate limit must be positive");
}

void TokenBucket::acquire() {
  std::unique_lock lock(mutex_);
  while (true) {
    if (stopped_) throw Error(ErrorKind::RateLimited, "rate limiter shut down while waiting");
    auto now = std::chrono::steady_clock::now();
    tokens_ = std::min(burst_, tokens_ + std::chrono::duration<double>(now - last_).count() * rate_);
    last_ = now;
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return;
    }
    auto wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
    cv_.wait_for(lock, wait);
  }
}

void TokenBucket::shutdown() {
  {
    std::lock_guard lock(mutex_);
    stopped_ = true;
  }
  cv_.notify_all();
}

// ---------------------------------------------------------------------------
// Cassette

std::string to_jsonl(const ApiCassetteRecord& record) {
  nlohmann::ordered_json j;
  j["key"] = record.key;
  j["dialect"] = std::string(to_string(record.dialect));
  j["status"] = record.status;
  j["body_text"] = record.body_text;
  j["recorded_at"] = record.recorded_at;
  return j.dump();
}

std::shared_ptr<ApiCassette> ApiCassette::open(const std::filesystem::path& path) {
  auto cassette = std::make_shared<ApiCassette>();
  cassette->path_ = path;
  if (!std::filesystem::exists(path)) return cassette;
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    try {
      auto j = json::parse(line);
      cassette->put({j.at("key").get<std::string>(), parse_dialect(j.at("dialect").get<std::string>()),
                     j.at("status").get<int>(), j.at("body_text").get<std::string>(),
                     j.value("recorded_at", std::string{})});
    } catch (const json::exception& e) {
      throw Error(ErrorKind::MalformedRecord, path.string() + ":" + std::to_string(number) + ": " + e.what(), {},
                  static_cast<std::int64_t>(number));
    }
  }
  return cassette;
}

std::optional<ApiCassetteRecord> ApiCassette::lookup(const std::string& key) const {
  std::lock_guard lock(mutex_);
  auto it = records_.find(key);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

void ApiCassette::put(ApiCassetteRecord record) {
  std::lock_guard lock(mutex_);
  auto key = record.key;
  records_.insert_or_assign(std::move(key), std::move(record));
}

void ApiCassette::append(ApiCassetteRecord record) {
  std::lock_guard lock(mutex_);
  if (!path_.empty()) append_line(path_, to_jsonl(record));
  auto key = record.key;
  records_.insert_or_assign(std::move(key), std::move(record));
}

std::size_t ApiCassette::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

std::string api_cassette_key(std::string_view query_text, Dialect dialect) {
  std::string prefix = std::string(to_string(dialect)) + " ";
  try {
    return prefix + serialize(parse_query(query_text, dialect));
  } catch (const Error&) {
    return prefix + trim(query_text);
  }
}

// ---------------------------------------------------------------------------
// Executor

ApiExecutor::ApiExecutor(ExecutorConfig config, RunMode mode, HttpClient* http, std::shared_ptr<ApiCassette> cassette,
                         std::shared_ptr<TokenBucket> limiter)
    : config_(std::move(config)), mode_(mode), http_(http), cassette_(std::move(cassette)), limiter_(std::move(limiter)) {
  if (mode_ != RunMode::Cassette && !http_)
    throw Error(ErrorKind::InvalidArgument, "live and record modes need an HTTP client");
  if (mode_ != RunMode::Live && !cassette_)
    throw Error(ErrorKind::InvalidArgument, "cassette and record modes need an API cassette");
  if (!config_.rest_base.empty() && config_.rest_base.back() != '/') config_.rest_base += '/';
}

std::string ApiExecutor::resolve_rest_url(std::string_view query_text) const {
  auto text = trim(query_text);
  auto parts = split_url(text);
  auto base = split_url(config_.rest_base);
  std::string origin = base.scheme + "://" + base.authority;
  std::string base_path = base.path.empty() ? "/" : base.path;

  std::string url;
  if (!parts.scheme.empty() || (!parts.path.empty() && parts.path.front() == '/')) {
    if (parts.path.rfind("/api/", 0) == 0) url = origin + base_path + parts.path.substr(5);
    else url = origin + (parts.path.empty() ? "/" : parts.path);
  } else if (parts.path.empty()) {
    url = config_.rest_base + "deals/";
  } else {
    url = config_.rest_base + parts.path;
  }
  if (parts.has_query) url += "?" + parts.query;
  return url;
}

HttpResponse ApiExecutor::call(std::string_view query_text, Dialect dialect) const {
  HttpRequest req;
  req.timeout = config_.timeout;
  req.headers.emplace_back("Accept", "application/json");
  if (dialect == Dialect::Rest) {
    req.method = "GET";
    req.url = resolve_rest_url(query_text);
  } else {
    req.method = "POST";
    req.url = config_.graphql_url;
    req.headers.emplace_back("Content-Type", "application/json");
    req.body = json{{"query", std::string(query_text)}}.dump();
  }
  if (limiter_) limiter_->acquire();
  return http_->send(req);
}

ExecutionResult ApiExecutor::execute(std::string_view query_text, Dialect dialect) const {
  ExecutionResult result;
  result.source = mode_ == RunMode::Cassette ? ResultSource::Cassette : ResultSource::Live;
  if (trim(query_text).empty()) {
    result.warnings.push_back("empty query; not submitted");
    return result;
  }

  auto key = api_cassette_key(query_text, dialect);
  HttpResponse resp;
  if (mode_ == RunMode::Cassette) {
    auto record = cassette_->lookup(key);
    if (!record) throw Error(ErrorKind::CassetteMiss, "no API cassette entry for " + key, key);
    resp = {record->status, record->body_text};
  } else {
    resp = call(query_text, dialect);
    if (mode_ == RunMode::Record) cassette_->append({key, dialect, resp.status, resp.body, utc_timestamp()});
  }

  result.status = resp.status;
  json parsed = json::parse(resp.body, nullptr, false);
  if (!parsed.is_discarded()) result.payload = std::move(parsed);
  result.valid = is_valid(resp.status, resp.body, dialect);
  if (!result.valid) return result;

  std::string root;
  if (dialect == Dialect::GraphQL) {
    try {
      root = parse_graphql(query_text).resource;
    } catch (const Error&) {
    }
  }
  try {
    result.result_ids = extract_result_ids(*result.payload, dialect, root);
  } catch (const Error& e) {
    result.warnings.push_back(e.what());
  }
  return result;
}

}  // namespace nl2api
