#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "reqmetric/corpus.hpp"
#include "reqmetric/embedding.hpp"

namespace reqmetric {

enum class RankMethod { kCosine, kEuclideanKnn };

// "cosine" / "euclidean-knn"
std::string_view to_string(RankMethod method);
RankMethod parse_rank_method(std::string_view text);  // also accepts "knn"

struct RankEntry {
  std::string metric_id;
  double score = 0.0;  // cosine similarity, or Euclidean distance for kNN

  bool operator==(const RankEntry&) const = default;
};

/// The metrics proposed for one requirement, best first. Equal scores are
/// ordered by ascending metric id.
struct RankedList {
  std::string requirement_id;
  std::vector<RankEntry> entries;
  RankMethod method = RankMethod::kCosine;
  std::string backend;

  bool operator==(const RankedList&) const = default;
};

struct LabeledEmbedding {
  std::string id;
  Embedding embedding;
};

// a.b / (|a||b|), clamped to [-1, 1]; 0 when either side is the zero vector.
double cosine_similarity(const Embedding& a, const Embedding& b);
double cosine_similarity(std::span<const double> a, std::span<const double> b);

double euclidean_distance(std::span<const double> a, std::span<const double> b);

RankedList rank_by_cosine(const std::string& requirement_id, const Embedding& requirement,
                          std::span<const LabeledEmbedding> metrics);

/// Exact k-nearest-neighbour index over metric embeddings.
///
/// Built once by recursive median split on the dimension with the largest
/// spread; leaves hold small buckets. Queries backtrack into every subtree
/// whose splitting plane is not farther than the current k-th best
/// distance, so results equal an exhaustive scan, including the ascending
/// id order among equal distances.
class KdTree {
 public:
  static constexpr std::size_t kLeafSize = 8;

  // Throws InputError on empty input, DimensionMismatch on mixed dims.
  explicit KdTree(std::span<const LabeledEmbedding> points);

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  std::string backend() const { return backend_; }

  // Up to k entries (capped at size()), ascending distance then id.
  std::vector<RankEntry> knn(std::span<const double> query, std::size_t k) const;

  // Structural self-check used by tests: every point appears exactly once
  // and each point lies on the correct side of every ancestor split.
  bool check_invariants() const;

 private:
  struct Node {
    // Leaf when split_dim == kLeaf; then [begin, end) indexes order_.
    static constexpr std::size_t kLeaf = static_cast<std::size_t>(-1);
    std::size_t split_dim = kLeaf;
    double split_value = 0.0;
    std::size_t left = 0;
    std::size_t right = 0;
    std::size_t begin = 0;
    std::size_t end = 0;
  };

  std::size_t build(std::size_t begin, std::size_t end);
  std::span<const double> point(std::size_t i) const {
    return {coords_.data() + i * dim_, dim_};
  }

  std::size_t dim_ = 0;
  std::string backend_;
  std::vector<std::string> ids_;
  std::vector<double> coords_;       // row-major, one row per point
  std::vector<std::size_t> order_;   // point indices grouped by leaf
  std::vector<Node> nodes_;          // nodes_[0] is the root
};

KdTree build_kdtree(std::span<const LabeledEmbedding> metrics);

RankedList knn_query(const KdTree& tree, const std::string& requirement_id,
                     const Embedding& query, std::size_t k);

struct RankOptions {
  RankMethod method = RankMethod::kCosine;
  std::size_t k = 10;         // kNN list length; cosine lists are complete
  std::size_t parallel = 1;   // worker threads for per-requirement ranking
};

// Embeds every description with `backend` and ranks all metrics for each
// requirement. Output is in corpus order regardless of `parallel`.
std::vector<RankedList> rank_all(const Corpus& corpus, const EmbeddingBackend& backend,
                                 const RankOptions& options = {});

// Same, from embeddings computed elsewhere.
std::vector<RankedList> rank_embeddings(std::span<const LabeledEmbedding> requirements,
                                        std::span<const LabeledEmbedding> metrics,
                                        const RankOptions& options = {});

// JSON Lines, one ranked list per line.
Json ranked_list_to_json(const RankedList& list);
RankedList ranked_list_from_json(const Json& j);
std::string format_rankings(std::span<const RankedList> lists);
std::vector<RankedList> parse_rankings(std::string_view jsonl);
void save_rankings(std::span<const RankedList> lists, const std::filesystem::path& path);
std::vector<RankedList> load_rankings(const std::filesystem::path& path);

}  // namespace reqmetric
