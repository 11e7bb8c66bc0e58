#include "reqmetric/ranking.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <queue>
#include <thread>
#include <unordered_set>

#include "io.hpp"

namespace reqmetric {

std::string_view to_string(RankMethod method) {
  switch (method) {
    case RankMethod::kCosine:
      return "cosine";
    case RankMethod::kEuclideanKnn:
      return "euclidean-knn";
  }
  return "?";
}

RankMethod parse_rank_method(std::string_view text) {
  if (text == "cosine") return RankMethod::kCosine;
  if (text == "euclidean-knn" || text == "knn") return RankMethod::kEuclideanKnn;
  throw InputError("unknown ranking method \"" + std::string(text) + "\"");
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatch(a.size(), b.size());
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

double cosine_similarity(const Embedding& a, const Embedding& b) {
  return cosine_similarity(a.values, b.values);
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatch(a.size(), b.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

namespace {

void check_unique_ids(std::span<const LabeledEmbedding> items) {
  std::unordered_set<std::string_view> seen;
  for (const auto& item : items) {
    if (!seen.insert(item.id).second) throw InputError("duplicate metric id \"" + item.id + "\"");
  }
}

}  // namespace

RankedList rank_by_cosine(const std::string& requirement_id, const Embedding& requirement,
                          std::span<const LabeledEmbedding> metrics) {
  if (metrics.empty()) throw InputError("rank_by_cosine: no metrics");
  check_unique_ids(metrics);
  RankedList out{requirement_id, {}, RankMethod::kCosine, requirement.backend};
  out.entries.reserve(metrics.size());
  for (const auto& m : metrics) {
    out.entries.push_back({m.id, cosine_similarity(requirement, m.embedding)});
  }
  std::sort(out.entries.begin(), out.entries.end(), [](const RankEntry& x, const RankEntry& y) {
    if (x.score != y.score) return x.score > y.score;
    return x.metric_id < y.metric_id;
  });
  return out;
}

// ---------------------------------------------------------------------------
// K-d tree

KdTree::KdTree(std::span<const LabeledEmbedding> points) {
  if (points.empty()) throw InputError("k-d tree: no points");
  check_unique_ids(points);
  dim_ = points.front().embedding.dim();
  if (dim_ == 0) throw InputError("k-d tree: zero-dimensional points");
  backend_ = points.front().embedding.backend;
  ids_.reserve(points.size());
  coords_.reserve(points.size() * dim_);
  for (const auto& p : points) {
    if (p.embedding.dim() != dim_) throw DimensionMismatch(dim_, p.embedding.dim());
    ids_.push_back(p.id);
    coords_.insert(coords_.end(), p.embedding.values.begin(), p.embedding.values.end());
  }
  order_.resize(ids_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  nodes_.reserve(2 * ids_.size() / kLeafSize + 1);
  build(0, order_.size());
}

std::size_t KdTree::build(std::size_t begin, std::size_t end) {
  const std::size_t self = nodes_.size();
  nodes_.push_back(Node{});
  nodes_[self].begin = begin;
  nodes_[self].end = end;
  if (end - begin <= kLeafSize) return self;

  std::size_t best_dim = 0;
  double best_spread = 0.0;
  for (std::size_t d = 0; d < dim_; ++d) {
    double lo = point(order_[begin])[d];
    double hi = lo;
    for (std::size_t i = begin + 1; i < end; ++i) {
      const double v = point(order_[i])[d];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo > best_spread) {
      best_spread = hi - lo;
      best_dim = d;
    }
  }
  // All points coincide: keep them in one bucket.
  if (best_spread == 0.0) return self;

  const std::size_t mid = begin + (end - begin) / 2;
  auto by_coord = [&](std::size_t a, std::size_t b) {
    const double va = point(a)[best_dim];
    const double vb = point(b)[best_dim];
    return va != vb ? va < vb : a < b;
  };
  std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                   order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end), by_coord);

  const double split = point(order_[mid])[best_dim];
  const std::size_t left = build(begin, mid);
  const std::size_t right = build(mid, end);
  Node& node = nodes_[self];
  node.split_dim = best_dim;
  node.split_value = split;
  node.left = left;
  node.right = right;
  return self;
}

bool KdTree::check_invariants() const {
  std::vector<int> seen(ids_.size(), 0);
  // (node, lower bounds, upper bounds) per dim, checked by explicit stack.
  struct Frame {
    std::size_t node;
    std::vector<std::pair<std::size_t, std::pair<double, bool>>> constraints;  // dim, value, is_upper
  };
  std::vector<Frame> stack{{0, {}}};
  while (!stack.empty()) {
    Frame f = std::move(stack.back());
    stack.pop_back();
    const Node& n = nodes_[f.node];
    if (n.split_dim == Node::kLeaf) {
      for (std::size_t i = n.begin; i < n.end; ++i) {
        const auto p = point(order_[i]);
        ++seen[order_[i]];
        for (const auto& [d, c] : f.constraints) {
          if (c.second ? p[d] > c.first : p[d] < c.first) return false;
        }
      }
      continue;
    }
    Frame l{n.left, f.constraints};
    l.constraints.push_back({n.split_dim, {n.split_value, true}});
    Frame r{n.right, f.constraints};
    r.constraints.push_back({n.split_dim, {n.split_value, false}});
    stack.push_back(std::move(l));
    stack.push_back(std::move(r));
  }
  return std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; });
}

std::vector<RankEntry> KdTree::knn(std::span<const double> query, std::size_t k) const {
  if (query.size() != dim_) throw DimensionMismatch(dim_, query.size());
  if (k == 0) throw InputError("knn: k must be at least 1");
  k = std::min(k, ids_.size());

  struct Candidate {
    double dist;
    std::size_t index;
  };
  // Max-heap on (dist, id): top is the current k-th best.
  auto worse = [&](const Candidate& a, const Candidate& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    return ids_[a.index] < ids_[b.index];
  };
  std::priority_queue<Candidate, std::vector<Candidate>, decltype(worse)> heap(worse);

  auto offer = [&](std::size_t index) {
    const Candidate c{euclidean_distance(query, point(index)), index};
    if (heap.size() < k) {
      heap.push(c);
    } else if (worse(c, heap.top())) {
      heap.pop();
      heap.push(c);
    }
  };

  // `bound` never exceeds the true distance to any point in the subtree, so a
  // subtree is skipped only when every point in it is strictly farther than
  // the current k-th best. Equal distances are still visited for the id rule.
  auto search = [&](auto&& self, std::size_t node_index, double bound) -> void {
    if (heap.size() == k && bound > heap.top().dist) return;
    const Node& node = nodes_[node_index];
    if (node.split_dim == Node::kLeaf) {
      for (std::size_t i = node.begin; i < node.end; ++i) offer(order_[i]);
      return;
    }
    const double diff = query[node.split_dim] - node.split_value;
    const std::size_t near = diff <= 0.0 ? node.left : node.right;
    const std::size_t far = diff <= 0.0 ? node.right : node.left;
    self(self, near, bound);
    self(self, far, std::max(bound, std::sqrt(diff * diff)));
  };
  search(search, 0, 0.0);

  std::vector<RankEntry> out(heap.size());
  for (std::size_t i = out.size(); i-- > 0;) {
    out[i] = {ids_[heap.top().index], heap.top().dist};
    heap.pop();
  }
  return out;
}

KdTree build_kdtree(std::span<const LabeledEmbedding> metrics) { return KdTree(metrics); }

RankedList knn_query(const KdTree& tree, const std::string& requirement_id,
                     const Embedding& query, std::size_t k) {
  return {requirement_id, tree.knn(query.values, k), RankMethod::kEuclideanKnn,
          query.backend.empty() ? tree.backend() : query.backend};
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(mu);
            if (!error) error = std::current_exception();
            next.store(n);
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

[[noreturn]] void rethrow_with_context(const Error& e, const std::string& context) {
  const std::string msg = context + ": " + e.what();
  switch (e.kind()) {
    case ErrorKind::kInput:
      throw InputError(msg);
    case ErrorKind::kBackend:
      throw BackendError(msg);
    case ErrorKind::kConsistency:
      throw ConsistencyError(msg);
  }
  throw InputError(msg);
}

template <typename Record>
std::vector<LabeledEmbedding> embed_records(const std::vector<Record>& records,
                                            const EmbeddingBackend& backend,
                                            const char* what) {
  std::vector<std::string> texts;
  texts.reserve(records.size());
  for (const auto& r : records) texts.push_back(r.description);
  std::vector<Embedding> embeddings;
  try {
    embeddings = backend.embed(texts);
  } catch (const MissingEmbeddings& e) {
    std::string msg = std::string("missing ") + what + " embeddings for backend \"" +
                      backend.name() + "\":";
    for (std::size_t i = 0; i < e.indices().size(); ++i) {
      msg += " " + records[e.indices()[i]].id + " (key " + e.keys()[i] + ")";
    }
    throw InputError(msg);
  } catch (const Error& e) {
    rethrow_with_context(e, std::string("embedding ") + what);
  }
  if (embeddings.size() != records.size()) {
    throw BackendError(std::string("backend returned ") + std::to_string(embeddings.size()) +
                       " embeddings for " + std::to_string(records.size()) + " " + what);
  }
  std::vector<LabeledEmbedding> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    out.push_back({records[i].id, std::move(embeddings[i])});
  }
  return out;
}

}  // namespace

std::vector<RankedList> rank_embeddings(std::span<const LabeledEmbedding> requirements,
                                        std::span<const LabeledEmbedding> metrics,
                                        const RankOptions& options) {
  if (metrics.empty()) throw InputError("ranking: no metrics");
  if (options.k == 0) throw InputError("ranking: k must be at least 1");
  const std::size_t dim = metrics.front().embedding.dim();
  for (const auto& m : metrics) {
    if (m.embedding.dim() != dim) {
      throw DimensionMismatch(dim, m.embedding.dim());
    }
  }
  for (const auto& r : requirements) {
    if (r.embedding.dim() != dim) {
      throw ConsistencyError("requirement " + r.id + ": " +
                             DimensionMismatch(dim, r.embedding.dim()).what());
    }
  }

  std::vector<RankedList> out(requirements.size());
  if (options.method == RankMethod::kCosine) {
    check_unique_ids(metrics);
    parallel_for(requirements.size(), options.parallel, [&](std::size_t i) {
      out[i] = rank_by_cosine(requirements[i].id, requirements[i].embedding, metrics);
    });
  } else {
    const KdTree tree(metrics);
    parallel_for(requirements.size(), options.parallel, [&](std::size_t i) {
      out[i] = knn_query(tree, requirements[i].id, requirements[i].embedding, options.k);
    });
  }
  return out;
}

std::vector<RankedList> rank_all(const Corpus& corpus, const EmbeddingBackend& backend,
                                 const RankOptions& options) {
  const auto metrics = embed_records(corpus.metrics, backend, "metric");
  const auto requirements = embed_records(corpus.requirements, backend, "requirement");
  auto lists = rank_embeddings(requirements, metrics, options);
  for (auto& list : lists) list.backend = backend.name();
  return lists;
}

// ---------------------------------------------------------------------------
// JSON Lines

Json ranked_list_to_json(const RankedList& list) {
  Json ranking = Json::array();
  for (const auto& e : list.entries) ranking.push_back({{"metric", e.metric_id}, {"score", e.score}});
  return {{"requirement", list.requirement_id},
          {"method", std::string(to_string(list.method))},
          {"backend", list.backend},
          {"ranking", std::move(ranking)}};
}

RankedList ranked_list_from_json(const Json& j) {
  RankedList list;
  list.requirement_id = j.at("requirement").get<std::string>();
  list.method = parse_rank_method(j.at("method").get<std::string>());
  list.backend = j.at("backend").get<std::string>();
  for (const auto& e : j.at("ranking")) {
    list.entries.push_back({e.at("metric").get<std::string>(), e.at("score").get<double>()});
  }
  return list;
}

std::string format_rankings(std::span<const RankedList> lists) {
  std::string out;
  for (const auto& l : lists) out += detail::dump_json(ranked_list_to_json(l)) + "\n";
  return out;
}

std::vector<RankedList> parse_rankings(std::string_view jsonl) {
  std::vector<RankedList> out;
  const auto lines = detail::split_lines(jsonl);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    try {
      out.push_back(ranked_list_from_json(Json::parse(lines[i])));
    } catch (const Json::exception& e) {
      throw InputError("rankings line " + std::to_string(i + 1) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError("rankings line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

void save_rankings(std::span<const RankedList> lists, const std::filesystem::path& path) {
  detail::write_file(path, format_rankings(lists));
}

std::vector<RankedList> load_rankings(const std::filesystem::path& path) {
  try {
    return parse_rankings(detail::read_file(path));
  } catch (const InputError& e) {
    if (std::string_view(e.what()).starts_with("cannot open")) throw;
    throw InputError(path.string() + ": " + e.what());
  }
}

}  // namespace reqmetric
