#include "nl2api/vector_index.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "nl2api/error.hpp"
#include "nl2api/util.hpp"

namespace nl2api {

using nlohmann::json;

EmbeddingVector EmbeddingVector::checked(std::vector<float> values, std::size_t dimension) {
  if (values.size() != dimension)
    throw Error(ErrorKind::DimensionMismatch,
                "expected " + std::to_string(dimension) + " dimensions, got " + std::to_string(values.size()), {},
                static_cast<std::int64_t>(values.size()));
  for (float v : values)
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "embedding contains a non-finite value");
  return EmbeddingVector{std::move(values)};
}

EmbeddingVector embed(std::string_view text, EmbeddingBackend& backend) {
  if (trim(text).empty()) throw Error(ErrorKind::InvalidArgument, "cannot embed empty text");
  std::string owned(text);
  auto vectors = backend.embed_batch(std::span<const std::string>(&owned, 1));
  if (vectors.size() != 1) throw Error(ErrorKind::BackendUnavailable, "embedding backend returned no vector");
  return EmbeddingVector::checked(std::move(vectors.front().values), backend.dimension());
}

// ---------------------------------------------------------------------------
// Fixture backend

FixtureEmbeddingBackend::FixtureEmbeddingBackend(std::string backend_id, std::size_t dimension)
    : backend_id_(std::move(backend_id)), dimension_(dimension) {}

FixtureEmbeddingBackend FixtureEmbeddingBackend::load(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t number = 0;
  std::optional<FixtureEmbeddingBackend> backend;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::MalformedRecord, path.string() + ":" + std::to_string(number) + ": " + e.what(), {},
                  static_cast<std::int64_t>(number));
    }
    if (!backend) {
      backend.emplace(record.at("backend_id").get<std::string>(), record.at("dimension").get<std::size_t>());
      continue;
    }
    auto values = record.at("vector").get<std::vector<float>>();
    backend->add(record.at("text").get<std::string>(), EmbeddingVector::checked(std::move(values), backend->dimension_));
  }
  if (!backend) throw Error(ErrorKind::MalformedRecord, path.string() + ": missing fixture header");
  return std::move(*backend);
}

void FixtureEmbeddingBackend::add(std::string text, EmbeddingVector vector) {
  if (vector.dimension() != dimension_)
    throw Error(ErrorKind::DimensionMismatch, "fixture vector has " + std::to_string(vector.dimension()) +
                                                  " dimensions, expected " + std::to_string(dimension_));
  vectors_.insert_or_assign(std::move(text), std::move(vector));
}

void FixtureEmbeddingBackend::save(const std::filesystem::path& path) const {
  std::string out = json{{"backend_id", backend_id_}, {"dimension", dimension_}}.dump() + "\n";
  for (const auto& [text, vec] : vectors_) out += json{{"text", text}, {"vector", vec.values}}.dump() + "\n";
  write_file(path, out);
}

std::vector<EmbeddingVector> FixtureEmbeddingBackend::embed_batch(std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    auto it = vectors_.find(t);
    if (it == vectors_.end())
      throw Error(ErrorKind::BackendUnavailable, "no recorded embedding for text: " + t, t);
    out.push_back(it->second);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hashing backend

namespace {

std::vector<std::string> word_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace

std::vector<EmbeddingVector> HashingEmbeddingBackend::embed_batch(std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    std::vector<double> acc(dimension_, 0.0);
    auto bump = [&](const std::string& feature, double weight) {
      auto h = fnv1a64(feature);
      acc[h % dimension_] += (h >> 63) ? -weight : weight;
    };
    bump("bias", 0.01);
    auto words = word_tokens(text);
    for (std::size_t i = 0; i < words.size(); ++i) {
      bump("w:" + words[i], 1.0);
      if (i + 1 < words.size()) bump("b:" + words[i] + " " + words[i + 1], 0.5);
      auto padded = "#" + words[i] + "#";
      for (std::size_t j = 0; j + 3 <= padded.size(); ++j) bump("c:" + padded.substr(j, 3), 0.25);
    }
    double norm = 0.0;
    for (double v : acc) norm += v * v;
    norm = std::sqrt(norm);
    EmbeddingVector vec;
    vec.values.reserve(dimension_);
    for (double v : acc) vec.values.push_back(static_cast<float>(v / norm));
    out.push_back(std::move(vec));
  }
  return out;
}

// ---------------------------------------------------------------------------
// HTTP backend

HttpEmbeddingBackend::HttpEmbeddingBackend(HttpClient& http, std::string endpoint, std::string model,
                                           std::size_t dimension, std::chrono::milliseconds timeout)
    : http_(http), endpoint_(std::move(endpoint)), model_(std::move(model)), dimension_(dimension), timeout_(timeout) {}

std::vector<EmbeddingVector> HttpEmbeddingBackend::embed_batch(std::span<const std::string> texts) {
  if (endpoint_.empty()) throw Error(ErrorKind::BackendUnavailable, "no embedding endpoint configured");
  HttpRequest req;
  req.method = "POST";
  req.url = endpoint_;
  req.timeout = timeout_;
  req.headers.emplace_back("Content-Type", "application/json");
  req.body = json{{"model", model_}, {"input", std::vector<std::string>(texts.begin(), texts.end())}}.dump();

  HttpResponse resp;
  try {
    resp = http_.send(req);
  } catch (const Error& e) {
    throw Error(ErrorKind::BackendUnavailable, std::string("embedding endpoint unreachable: ") + e.what(), endpoint_);
  }
  if (resp.status < 200 || resp.status > 299)
    throw Error(ErrorKind::BackendUnavailable, "embedding endpoint returned HTTP " + std::to_string(resp.status),
                endpoint_, resp.status);

  json body;
  try {
    body = json::parse(resp.body);
  } catch (const json::parse_error&) {
    throw Error(ErrorKind::BackendUnavailable, "embedding endpoint returned a non-JSON body", endpoint_);
  }
  std::vector<std::vector<float>> raw;
  if (body.contains("vectors")) {
    raw = body["vectors"].get<std::vector<std::vector<float>>>();
  } else if (body.contains("data")) {
    for (const auto& item : body["data"]) raw.push_back(item.at("embedding").get<std::vector<float>>());
  } else {
    throw Error(ErrorKind::BackendUnavailable, "embedding response has neither 'vectors' nor 'data'", endpoint_);
  }
  if (raw.size() != texts.size())
    throw Error(ErrorKind::BackendUnavailable, "embedding endpoint returned " + std::to_string(raw.size()) +
                                                   " vectors for " + std::to_string(texts.size()) + " texts");
  std::vector<EmbeddingVector> out;
  out.reserve(raw.size());
  for (auto& v : raw) out.push_back(EmbeddingVector::checked(std::move(v), dimension_));
  return out;
}

// ---------------------------------------------------------------------------
// Recording backend

RecordingEmbeddingBackend::RecordingEmbeddingBackend(EmbeddingBackend& inner, std::filesystem::path fixture_path)
    : inner_(inner), path_(std::move(fixture_path)), recorded_(inner.id(), inner.dimension()) {
  if (std::filesystem::exists(path_)) recorded_ = FixtureEmbeddingBackend::load(path_);
}

std::vector<EmbeddingVector> RecordingEmbeddingBackend::embed_batch(std::span<const std::string> texts) {
  auto vectors = inner_.embed_batch(texts);
  std::lock_guard lock(mutex_);
  for (std::size_t i = 0; i < texts.size() && i < vectors.size(); ++i) recorded_.add(texts[i], vectors[i]);
  recorded_.save(path_);
  return vectors;
}

// ---------------------------------------------------------------------------
// Similarity and index

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension())
    throw Error(ErrorKind::DimensionMismatch, "cosine of vectors with " + std::to_string(a.dimension()) + " and " +
                                                  std::to_string(b.dimension()) + " dimensions");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    double x = a.values[i], y = b.values[i];
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0.0 || nb == 0.0) throw Error(ErrorKind::ZeroVector, "cosine of a zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

VectorIndex build_index(const Corpus& corpus, EmbeddingBackend& backend) {
  if (corpus.empty()) throw Error(ErrorKind::EmptyCorpus, "cannot index an empty corpus");
  std::vector<std::string> questions;
  questions.reserve(corpus.size());
  for (const auto& e : corpus.entries) questions.push_back(e.question);

  auto vectors = backend.embed_batch(questions);
  if (vectors.size() != questions.size())
    throw Error(ErrorKind::BackendUnavailable, "embedding backend returned a short batch");

  VectorIndex index;
  index.backend_id = backend.id();
  index.dimension = backend.dimension();
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    auto vec = EmbeddingVector::checked(std::move(vectors[i].values), index.dimension);
    if (std::all_of(vec.values.begin(), vec.values.end(), [](float v) { return v == 0.0f; }))
      throw Error(ErrorKind::ZeroVector, "zero embedding for entry '" + corpus.entries[i].id + "'",
                  corpus.entries[i].id);
    index.entries.push_back({corpus.entries[i].id, std::move(vec)});
  }
  return index;
}

namespace {

constexpr std::string_view kIndexMagic = "nl2api-index";

void put_le32(std::string& out, float f) {
  auto bits = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

float get_le32(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

}  // namespace

void save_index(const VectorIndex& index, const std::filesystem::path& path) {
  if (index.backend_id.empty() || index.backend_id.find_first_of(" \t\n") != std::string::npos)
    throw Error(ErrorKind::InvalidArgument, "backend id must be a single non-empty token");
  std::string out = std::string(kIndexMagic) + " v1 " + index.backend_id + " " + std::to_string(index.dimension) + " " +
                    std::to_string(index.entries.size()) + "\n";
  for (const auto& e : index.entries) {
    if (e.entry_id.find('\n') != std::string::npos)
      throw Error(ErrorKind::InvalidArgument, "entry id contains a newline", e.entry_id);
    out += e.entry_id + "\n";
  }
  out.reserve(out.size() + index.entries.size() * index.dimension * 4);
  for (const auto& e : index.entries)
    for (float v : e.vector.values) put_le32(out, v);
  write_file(path, out);
}

VectorIndex load_index(const std::filesystem::path& path) {
  auto data = read_file(path);
  auto bad = [&](const std::string& why) {
    return Error(ErrorKind::MalformedIndex, path.string() + ": " + why, path.string());
  };
  std::size_t pos = data.find('\n');
  if (pos == std::string::npos) throw bad("missing header line");
  std::istringstream header(data.substr(0, pos));
  std::string magic, version;
  VectorIndex index;
  std::size_t count = 0;
  if (!(header >> magic >> version >> index.backend_id >> index.dimension >> count) || magic != kIndexMagic ||
      version != "v1")
    throw bad("unrecognised header");
  ++pos;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < count; ++i) {
    auto end = data.find('\n', pos);
    if (end == std::string::npos) throw bad("truncated id list");
    ids.push_back(data.substr(pos, end - pos));
    pos = end + 1;
  }
  if (data.size() - pos != count * index.dimension * 4) throw bad("vector block has the wrong size");
  const auto* p = reinterpret_cast<const unsigned char*>(data.data() + pos);
  for (std::size_t i = 0; i < count; ++i) {
    EmbeddingVector vec;
    vec.values.resize(index.dimension);
    for (std::size_t j = 0; j < index.dimension; ++j, p += 4) vec.values[j] = get_le32(p);
    index.entries.push_back({std::move(ids[i]), std::move(vec)});
  }
  return index;
}

std::vector<ScoredEntry> top_k(const VectorIndex& index, const EmbeddingVector& query, std::size_t k) {
  if (k == 0) throw Error(ErrorKind::InvalidArgument, "k must be at least 1");
  if (query.dimension() != index.dimension)
    throw Error(ErrorKind::DimensionMismatch, "query has " + std::to_string(query.dimension()) +
                                                  " dimensions, index has " + std::to_string(index.dimension));
  std::vector<ScoredEntry> scored;
  scored.reserve(index.entries.size());
  for (const auto& e : index.entries) scored.push_back({e.entry_id, cosine(query, e.vector)});
  auto better = [](const ScoredEntry& a, const ScoredEntry& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.entry_id < b.entry_id;
  };
  auto n = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), better);
  scored.resize(n);
  return scored;
}

}  // namespace nl2api
