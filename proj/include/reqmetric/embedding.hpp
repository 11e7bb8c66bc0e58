#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "reqmetric/error.hpp"
#include "reqmetric/preprocess.hpp"

namespace reqmetric {

/// A dense text embedding tagged with the backend that produced it.
///
/// The zero vector is the degenerate embedding: it is what a backend returns
/// when nothing in the text could be represented. Ranking gives degenerate
/// embeddings a cosine similarity of 0 against everything.
struct Embedding {
  std::vector<double> values;
  std::string backend;

  std::size_t dim() const noexcept { return values.size(); }
  bool is_degenerate() const noexcept;

  bool operator==(const Embedding&) const = default;
};

double l2_norm(std::span<const double> values);

// Unit-length copy; the zero vector maps to itself (still degenerate).
Embedding l2_normalize(const Embedding& e);

// Throws DimensionMismatch unless every embedding has the given dim.
void check_uniform_dim(std::span<const Embedding> batch, std::size_t dim);

// ---------------------------------------------------------------------------
// Word vectors (averaged-word-vector baseline)

class WordVectorTable {
 public:
  explicit WordVectorTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return tokens_.size(); }
  bool empty() const noexcept { return tokens_.empty(); }

  // Throws InputError on duplicate token or wrong length.
  void add(std::string token, std::span<const double> vector);

  // Empty span when the token is out of vocabulary.
  std::span<const double> find(std::string_view token) const;

  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

 private:
  std::size_t dim_;
  std::vector<std::string> tokens_;
  std::vector<double> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Textual ".vec" format: header "<count> <dim>", then "token v1 .. vdim" per
// line. Reads at most `limit` rows when given.
WordVectorTable parse_word_vectors(std::string_view text, std::optional<std::size_t> limit = {});
WordVectorTable load_word_vectors(const std::filesystem::path& path,
                                  std::optional<std::size_t> limit = {});

// Mean of the vectors of the in-vocabulary tokens of clean(text).
// Out-of-vocabulary tokens are skipped; with no hits the result is the zero
// vector.
Embedding embed_average(std::string_view text, const WordVectorTable& table,
                        const StopwordSet& stopwords, std::string backend_name = "wordvec");

// ---------------------------------------------------------------------------
// Backends

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;

  virtual std::string name() const = 0;

  // One embedding per input text, in input order, all of one dim.
  virtual std::vector<Embedding> embed(const std::vector<std::string>& texts) const = 0;
};

class WordVectorBackend : public EmbeddingBackend {
 public:
  WordVectorBackend(std::shared_ptr<const WordVectorTable> table, StopwordSet stopwords,
                    bool normalize, std::string name = "wordvec");

  std::string name() const override { return name_; }
  std::vector<Embedding> embed(const std::vector<std::string>& texts) const override;

 private:
  std::shared_ptr<const WordVectorTable> table_;
  StopwordSet stopwords_;
  bool normalize_;
  std::string name_;
};

/// Deterministic pseudo-embedding for tests and demos: every token of
/// tokenize(text) expands to a fixed pseudo-random vector in [-1, 1)^dim
/// derived from FNV-1a of the token and the seed (SplitMix64 stream), and
/// the text embedding is the sum of its token vectors.
class HashBackend : public EmbeddingBackend {
 public:
  explicit HashBackend(std::size_t dim = 64, std::uint64_t seed = 0);

  std::string name() const override;
  std::size_t dim() const noexcept { return dim_; }

  Embedding embed_one(std::string_view text) const;
  std::vector<Embedding> embed(const std::vector<std::string>& texts) const override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Precomputed embedding store (JSON Lines)

// Lowercase hex SHA-256 of the UTF-8 bytes of `text`.
std::string sha256_hex(std::string_view text);

struct StoreKey {
  std::string hash;     // sha256_hex(text)
  std::string backend;

  auto operator<=>(const StoreKey&) const = default;
};

inline StoreKey store_key(std::string_view text, std::string backend) {
  return {sha256_hex(text), std::move(backend)};
}

class EmbeddingStore {
 public:
  // Throws InputError on duplicate key and ConsistencyError when the
  // embedding's dim disagrees with earlier records of the same backend.
  void insert(StoreKey key, Embedding embedding);

  const Embedding* find(const StoreKey& key) const;
  bool contains(const StoreKey& key) const { return find(key) != nullptr; }
  std::size_t size() const noexcept { return order_.size(); }

  // Backend names present, sorted.
  std::vector<std::string> backends() const;

  // Insertion order.
  const std::vector<StoreKey>& keys() const noexcept { return order_; }

  bool operator==(const EmbeddingStore& other) const;

 private:
  std::map<StoreKey, Embedding> entries_;
  std::map<std::string, std::size_t> backend_dim_;
  std::vector<StoreKey> order_;
};

void store_save(const EmbeddingStore& store, const std::filesystem::path& path);
// Appends the given records to an existing (or new) store file.
void store_append(std::span<const std::pair<StoreKey, Embedding>> records,
                  const std::filesystem::path& path);
EmbeddingStore store_load(const std::filesystem::path& path);
EmbeddingStore parse_store(std::string_view jsonl);
std::string format_store(const EmbeddingStore& store);

/// Raised by StoreBackend when texts have no stored embedding.
class MissingEmbeddings : public InputError {
 public:
  MissingEmbeddings(std::vector<std::size_t> indices, std::vector<std::string> keys);

  // Positions in the embedded batch.
  const std::vector<std::size_t>& indices() const noexcept { return indices_; }
  const std::vector<std::string>& keys() const noexcept { return keys_; }

 private:
  std::vector<std::size_t> indices_;
  std::vector<std::string> keys_;
};

class StoreBackend : public EmbeddingBackend {
 public:
  StoreBackend(std::shared_ptr<const EmbeddingStore> store, std::string backend_name);

  std::string name() const override { return backend_name_; }
  std::vector<Embedding> embed(const std::vector<std::string>& texts) const override;

 private:
  std::shared_ptr<const EmbeddingStore> store_;
  std::string backend_name_;
};

// ---------------------------------------------------------------------------
// Remote embedding service client

inline constexpr std::size_t kMaxRemoteBatch = 256;

struct RemoteOptions {
  bool normalize = false;
  std::size_t max_in_flight = 4;
  int max_attempts = 3;  // per chunk, for retryable failures
  int retry_delay_ms = 200;
  int timeout_seconds = 120;
  std::size_t chunk_size = kMaxRemoteBatch;
};

// POST <endpoint>/embed with {"texts":[...],"normalize":bool}. Batches larger
// than the chunk size are split and reassembled in input order. Throws
// BackendError (retryable for connection failures) after the retry budget.
std::vector<Embedding> embed_remote(const std::vector<std::string>& texts,
                                    const std::string& endpoint, const std::string& model,
                                    const RemoteOptions& options = {});

class RemoteBackend : public EmbeddingBackend {
 public:
  RemoteBackend(std::string endpoint, std::string model, RemoteOptions options = {});

  std::string name() const override { return model_; }
  std::vector<Embedding> embed(const std::vector<std::string>& texts) const override;

 private:
  std::string endpoint_;
  std::string model_;
  RemoteOptions options_;
  mutable std::mutex mu_;
  mutable std::optional<std::size_t> dim_;  // fixed after the first response
};

}  // namespace reqmetric
