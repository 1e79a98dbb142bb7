#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nl2api/corpus.hpp"
#include "nl2api/http_client.hpp"

namespace nl2api {

inline constexpr std::size_t kDefaultEmbeddingDimension = 768;
inline constexpr std::string_view kDefaultEmbeddingModel = "all-mpnet-base-v2";

struct EmbeddingVector {
  std::vector<float> values;

  std::size_t dimension() const noexcept { return values.size(); }

  /// Throws DimensionMismatch when the length differs from `dimension` and
  /// InvalidArgument on a non-finite entry.
  static EmbeddingVector checked(std::vector<float> values, std::size_t dimension);

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::string id() const = 0;
  virtual std::size_t dimension() const = 0;
  /// One vector per text, in input order.
  virtual std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) = 0;
};

/// Checks the precondition (non-empty text) and the backend's declared
/// dimension. Throws InvalidArgument, BackendUnavailable, DimensionMismatch.
EmbeddingVector embed(std::string_view text, EmbeddingBackend& backend);

/// Replays vectors recorded in a JSONL fixture. The first line is a header
/// {"backend_id": ..., "dimension": ...}; each further line is
/// {"text": ..., "vector": [...]}. Unknown texts raise BackendUnavailable.
class FixtureEmbeddingBackend final : public EmbeddingBackend {
 public:
  FixtureEmbeddingBackend(std::string backend_id, std::size_t dimension);
  static FixtureEmbeddingBackend load(const std::filesystem::path& path);

  void add(std::string text, EmbeddingVector vector);
  void save(const std::filesystem::path& path) const;
  std::size_t size() const noexcept { return vectors_.size(); }

  std::string id() const override { return backend_id_; }
  std::size_t dimension() const override { return dimension_; }
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override;

 private:
  std::string backend_id_;
  std::size_t dimension_;
  std::map<std::string, EmbeddingVector, std::less<>> vectors_;
};

/// Offline embedder: signed feature hashing of lower-cased word unigrams and
/// bigrams, L2-normalised. Deterministic and dependency free; used to build
/// fixtures and for runs without an embedding endpoint.
class HashingEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit HashingEmbeddingBackend(std::size_t dimension = kDefaultEmbeddingDimension) : dimension_(dimension) {}

  std::string id() const override { return "nl2api-hash-" + std::to_string(dimension_); }
  std::size_t dimension() const override { return dimension_; }
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override;

 private:
  std::size_t dimension_;
};

/// HTTP embedding endpoint: POST {"model": ..., "input": [texts]} answered by
/// {"vectors": [[...], ...]} (an OpenAI-style {"data": [{"embedding": ...}]}
/// body is accepted too). Transport failures raise BackendUnavailable.
class HttpEmbeddingBackend final : public EmbeddingBackend {
 public:
  HttpEmbeddingBackend(HttpClient& http, std::string endpoint, std::string model,
                       std::size_t dimension = kDefaultEmbeddingDimension,
                       std::chrono::milliseconds timeout = std::chrono::milliseconds(30000));

  std::string id() const override { return model_; }
  std::size_t dimension() const override { return dimension_; }
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override;

 private:
  HttpClient& http_;
  std::string endpoint_;
  std::string model_;
  std::size_t dimension_;
  std::chrono::milliseconds timeout_;
};

/// Wraps a backend and appends every new (text, vector) pair to a fixture file.
class RecordingEmbeddingBackend final : public EmbeddingBackend {
 public:
  RecordingEmbeddingBackend(EmbeddingBackend& inner, std::filesystem::path fixture_path);

  std::string id() const override { return inner_.id(); }
  std::size_t dimension() const override { return inner_.dimension(); }
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override;

 private:
  EmbeddingBackend& inner_;
  std::filesystem::path path_;
  std::mutex mutex_;
  FixtureEmbeddingBackend recorded_;
};

/// dot(a, b) / (|a| |b|), accumulated in double precision.
/// Throws DimensionMismatch or ZeroVector.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

struct IndexEntry {
  std::string entry_id;
  EmbeddingVector vector;

  friend bool operator==(const IndexEntry&, const IndexEntry&) = default;
};

struct VectorIndex {
  std::string backend_id;
  std::size_t dimension = kDefaultEmbeddingDimension;
  std::vector<IndexEntry> entries;

  std::size_t size() const noexcept { return entries.size(); }
  friend bool operator==(const VectorIndex&, const VectorIndex&) = default;
};

/// One vector per corpus entry, in corpus order. Throws EmptyCorpus,
/// BackendUnavailable, DimensionMismatch, ZeroVector.
VectorIndex build_index(const Corpus& corpus, EmbeddingBackend& backend);

/// File layout: the text line `nl2api-index v1 <backend_id> <dimension> <count>`,
/// then `count` lines holding the entry ids, then count*dimension
/// little-endian IEEE-754 float32 values.
void save_index(const VectorIndex& index, const std::filesystem::path& path);
VectorIndex load_index(const std::filesystem::path& path);

struct ScoredEntry {
  std::string entry_id;
  double similarity = 0.0;

  friend bool operator==(const ScoredEntry&, const ScoredEntry&) = default;
};

/// Exact scan. min(k, |index|) results ordered by similarity descending, ties
/// by entry id ascending. Throws InvalidArgument for k == 0, DimensionMismatch.
std::vector<ScoredEntry> top_k(const VectorIndex& index, const EmbeddingVector& query, std::size_t k);

}  // namespace nl2api
