#include "reqmetric/embedding.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "io.hpp"
#include "reqmetric/corpus.hpp"

namespace reqmetric {

bool Embedding::is_degenerate() const noexcept {
  return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
}

double l2_norm(std::span<const double> values) {
  double sum = 0.0;
  for (double v : values) sum += v * v;
  return std::sqrt(sum);
}

Embedding l2_normalize(const Embedding& e) {
  Embedding out = e;
  const double norm = l2_norm(e.values);
  if (norm > 0.0) {
    for (double& v : out.values) v /= norm;
  }
  return out;
}

void check_uniform_dim(std::span<const Embedding> batch, std::size_t dim) {
  for (const auto& e : batch) {
    if (e.dim() != dim) throw DimensionMismatch(dim, e.dim());
  }
}

// ---------------------------------------------------------------------------
// Word vectors

void WordVectorTable::add(std::string token, std::span<const double> vector) {
  if (vector.size() != dim_) {
    throw InputError("word vector \"" + token + "\": expected " + std::to_string(dim_) +
                     " values, got " + std::to_string(vector.size()));
  }
  auto [it, inserted] = index_.emplace(token, tokens_.size());
  if (!inserted) throw InputError("word vectors: duplicate token \"" + token + "\"");
  tokens_.push_back(std::move(token));
  data_.insert(data_.end(), vector.begin(), vector.end());
}

std::span<const double> WordVectorTable::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return {};
  return {data_.data() + it->second * dim_, dim_};
}

namespace {

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

WordVectorTable parse_word_vectors(std::string_view text, std::optional<std::size_t> limit) {
  const auto lines = detail::split_lines(text);
  if (lines.empty()) throw InputError("word vectors: empty file");
  const auto header = split_spaces(lines[0]);
  std::size_t count = 0;
  std::size_t dim = 0;
  if (header.size() != 2 || !parse_number(header[0], count) || !parse_number(header[1], dim) ||
      dim == 0) {
    throw InputError("word vectors: malformed header \"" + std::string(lines[0]) +
                     "\" (expected \"<count> <dim>\")");
  }
  const std::size_t wanted = limit ? std::min(*limit, count) : count;

  WordVectorTable table(dim);
  std::vector<double> row(dim);
  std::size_t line_no = 1;
  for (; line_no < lines.size() && table.size() < wanted; ++line_no) {
    const auto fields = split_spaces(lines[line_no]);
    if (fields.empty()) continue;
    const std::string token(fields[0]);
    if (fields.size() - 1 != dim) {
      throw InputError("word vectors line " + std::to_string(line_no + 1) + ": token \"" +
                       token + "\" has " + std::to_string(fields.size() - 1) +
                       " values, expected " + std::to_string(dim));
    }
    for (std::size_t d = 0; d < dim; ++d) {
      double v = 0.0;
      if (!parse_number(fields[d + 1], v) || !std::isfinite(v)) {
        throw InputError("word vectors line " + std::to_string(line_no + 1) + ": token \"" +
                         token + "\" has invalid value \"" + std::string(fields[d + 1]) + "\"");
      }
      row[d] = v;
    }
    table.add(token, row);
  }
  if (table.size() < wanted) {
    throw InputError("word vectors: header declares " + std::to_string(count) +
                     " rows, file has " + std::to_string(table.size()));
  }
  return table;
}

WordVectorTable load_word_vectors(const std::filesystem::path& path,
                                  std::optional<std::size_t> limit) {
  try {
    return parse_word_vectors(detail::read_file(path), limit);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

Embedding embed_average(std::string_view text, const WordVectorTable& table,
                        const StopwordSet& stopwords, std::string backend_name) {
  Embedding out{std::vector<double>(table.dim(), 0.0), std::move(backend_name)};
  // Sorted so the floating-point sum does not depend on token order.
  TokenList tokens = clean(text, stopwords);
  std::sort(tokens.begin(), tokens.end());
  std::size_t hits = 0;
  for (const auto& token : tokens) {
    auto vec = table.find(token);
    if (vec.empty()) continue;
    for (std::size_t d = 0; d < vec.size(); ++d) out.values[d] += vec[d];
    ++hits;
  }
  if (hits > 0) {
    for (double& v : out.values) v /= static_cast<double>(hits);
  }
  return out;
}

WordVectorBackend::WordVectorBackend(std::shared_ptr<const WordVectorTable> table,
                                     StopwordSet stopwords, bool normalize, std::string name)
    : table_(std::move(table)),
      stopwords_(std::move(stopwords)),
      normalize_(normalize),
      name_(std::move(name)) {
  if (!table_ || table_->empty()) throw InputError("word-vector backend: empty vocabulary");
}

std::vector<Embedding> WordVectorBackend::embed(const std::vector<std::string>& texts) const {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    Embedding e = embed_average(text, *table_, stopwords_, name_);
    out.push_back(normalize_ ? l2_normalize(e) : std::move(e));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hash pseudo-embeddings

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  state += kGolden;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

HashBackend::HashBackend(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim == 0) throw InputError("hash backend: dim must be positive");
}

std::string HashBackend::name() const {
  return "hash-d" + std::to_string(dim_) + "-s" + std::to_string(seed_);
}

Embedding HashBackend::embed_one(std::string_view text) const {
  Embedding out{std::vector<double>(dim_, 0.0), name()};
  for (const auto& token : tokenize(text)) {
    std::uint64_t state = fnv1a64(token) ^ (seed_ * kGolden);
    for (std::size_t d = 0; d < dim_; ++d) {
      const double unit = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
      out.values[d] += unit * 2.0 - 1.0;
    }
  }
  return out;
}

std::vector<Embedding> HashBackend::embed(const std::vector<std::string>& texts) const {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

// ---------------------------------------------------------------------------
// Store

std::string sha256_hex(std::string_view text) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

void EmbeddingStore::insert(StoreKey key, Embedding embedding) {
  if (entries_.contains(key)) {
    throw InputError("embedding store: duplicate key " + key.hash + " for backend \"" +
                     key.backend + "\"");
  }
  auto [it, fresh] = backend_dim_.emplace(key.backend, embedding.dim());
  if (!fresh && it->second != embedding.dim()) {
    throw ConsistencyError("embedding store: backend \"" + key.backend + "\" mixes dim " +
                           std::to_string(it->second) + " and " +
                           std::to_string(embedding.dim()));
  }
  embedding.backend = key.backend;
  order_.push_back(key);
  entries_.emplace(std::move(key), std::move(embedding));
}

const Embedding* EmbeddingStore::find(const StoreKey& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<std::string> EmbeddingStore::backends() const {
  std::vector<std::string> out;
  for (const auto& [name, dim] : backend_dim_) out.push_back(name);
  return out;
}

bool EmbeddingStore::operator==(const EmbeddingStore& other) const {
  return entries_ == other.entries_ && order_ == other.order_;
}

namespace {

std::string format_record(const StoreKey& key, const Embedding& e) {
  Json j = {{"key", key.hash}, {"backend", key.backend}, {"dim", e.dim()}, {"values", e.values}};
  return detail::dump_json(j) + "\n";
}

bool is_hex64(const std::string& s) {
  return s.size() == 64 && std::all_of(s.begin(), s.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

}  // namespace

std::string format_store(const EmbeddingStore& store) {
  std::string out;
  for (const auto& key : store.keys()) out += format_record(key, *store.find(key));
  return out;
}

void store_save(const EmbeddingStore& store, const std::filesystem::path& path) {
  detail::write_file(path, format_store(store));
}

void store_append(std::span<const std::pair<StoreKey, Embedding>> records,
                  const std::filesystem::path& path) {
  std::string out;
  for (const auto& [key, e] : records) out += format_record(key, e);
  detail::append_file(path, out);
}

EmbeddingStore parse_store(std::string_view jsonl) {
  EmbeddingStore store;
  const auto lines = detail::split_lines(jsonl);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const std::string where = "embedding store line " + std::to_string(i + 1);
    try {
      const Json j = Json::parse(lines[i]);
      const auto hash = j.at("key").get<std::string>();
      if (!is_hex64(hash)) throw InputError(where + ": key is not a SHA-256 hex digest");
      const auto backend = j.at("backend").get<std::string>();
      const auto dim = j.at("dim").get<std::size_t>();
      auto values = j.at("values").get<std::vector<double>>();
      if (values.size() != dim) {
        throw InputError(where + ": declares dim " + std::to_string(dim) + " but has " +
                         std::to_string(values.size()) + " values");
      }
      if (!std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); })) {
        throw InputError(where + ": non-finite value");
      }
      store.insert({hash, backend}, Embedding{std::move(values), backend});
    } catch (const Json::exception& e) {
      throw InputError(where + ": corrupt record: " + e.what());
    } catch (const ConsistencyError& e) {
      throw ConsistencyError(where + ": " + e.what());
    } catch (const InputError& e) {
      if (std::string_view(e.what()).starts_with("embedding store line")) throw;
      throw InputError(where + ": " + e.what());
    }
  }
  return store;
}

EmbeddingStore store_load(const std::filesystem::path& path) {
  return parse_store(detail::read_file(path));
}

MissingEmbeddings::MissingEmbeddings(std::vector<std::size_t> indices,
                                     std::vector<std::string> keys)
    : InputError([&] {
        std::string msg = "no stored embedding for " + std::to_string(keys.size()) + " text(s):";
        for (const auto& k : keys) msg += " " + k;
        return msg;
      }()),
      indices_(std::move(indices)),
      keys_(std::move(keys)) {}

StoreBackend::StoreBackend(std::shared_ptr<const EmbeddingStore> store, std::string backend_name)
    : store_(std::move(store)), backend_name_(std::move(backend_name)) {}

std::vector<Embedding> StoreBackend::embed(const std::vector<std::string>& texts) const {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  std::vector<std::size_t> missing;
  std::vector<std::string> missing_keys;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    StoreKey key = store_key(texts[i], backend_name_);
    if (const Embedding* e = store_->find(key)) {
      out.push_back(*e);
    } else {
      missing.push_back(i);
      missing_keys.push_back(std::move(key.hash));
    }
  }
  if (!missing.empty()) throw MissingEmbeddings(std::move(missing), std::move(missing_keys));
  if (!out.empty()) check_uniform_dim(out, out.front().dim());
  return out;
}

}  // namespace reqmetric
