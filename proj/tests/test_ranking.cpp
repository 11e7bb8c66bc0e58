#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "reqmetric/ranking.hpp"
#include "test_util.hpp"

using namespace reqmetric;

namespace {

std::vector<LabeledEmbedding> labeled(const std::vector<std::string>& ids,
                                      const std::vector<std::vector<double>>& pts) {
  std::vector<LabeledEmbedding> out;
  for (std::size_t i = 0; i < ids.size(); ++i) out.push_back({ids[i], {pts[i], "test"}});
  return out;
}

std::vector<std::string> ids_of(const std::vector<RankEntry>& entries) {
  std::vector<std::string> out;
  for (const auto& e : entries) out.push_back(e.metric_id);
  return out;
}

std::vector<std::string> ids_of(const std::vector<oracle::Scored>& entries) {
  std::vector<std::string> out;
  for (const auto& e : entries) out.push_back(e.id);
  return out;
}

}  // namespace

TEST_CASE("cosine similarity") {
  const Embedding v{{0.3, -1.7, 2.2}, "t"};
  CHECK(cosine_similarity(v, v) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine_similarity(Embedding{{1, 0}, "t"}, Embedding{{0, 1}, "t"}) == 0.0);
  // 1/sqrt(2) by hand
  CHECK(cosine_similarity(Embedding{{1, 1}, "t"}, Embedding{{1, 0}, "t"}) ==
        doctest::Approx(0.7071067811865475).epsilon(1e-15));
  CHECK(cosine_similarity(Embedding{{0, 0}, "t"}, Embedding{{1, 0}, "t"}) == 0.0);
  CHECK(cosine_similarity(Embedding{{-2, 0}, "t"}, Embedding{{1, 0}, "t"}) == -1.0);
  CHECK_THROWS_AS(cosine_similarity(Embedding{{1, 0}, "t"}, Embedding{{1, 0, 0}, "t"}),
                  DimensionMismatch);
}

TEST_CASE("rank_by_cosine examples") {
  const auto metrics = labeled({"a", "b"}, {{1, 0}, {0, 1}});
  const auto list = rank_by_cosine("r", {{1, 0}, "t"}, metrics);
  REQUIRE(list.entries.size() == 2);
  CHECK(list.entries[0] == RankEntry{"a", 1.0});
  CHECK(list.entries[1] == RankEntry{"b", 0.0});
  CHECK(list.method == RankMethod::kCosine);

  const auto tied = rank_by_cosine("r", {{1, 2}, "t"}, labeled({"z", "m", "a"}, {{3, 1}, {3, 1}, {3, 1}}));
  CHECK(ids_of(tied.entries) == std::vector<std::string>{"a", "m", "z"});

  // degenerate requirement: all scores 0, id order
  const auto zero = rank_by_cosine("r", {{0, 0}, "t"}, labeled({"c", "a", "b"}, {{1, 0}, {0, 1}, {1, 1}}));
  CHECK(ids_of(zero.entries) == std::vector<std::string>{"a", "b", "c"});
  for (const auto& e : zero.entries) CHECK(e.score == 0.0);

  CHECK_THROWS_AS(rank_by_cosine("r", {{1, 0}, "t"}, {}), InputError);
  CHECK_THROWS_AS(rank_by_cosine("r", {{1, 0}, "t"}, labeled({"a"}, {{1, 0, 0}})),
                  DimensionMismatch);
}

TEST_CASE("rank_by_cosine matches an exhaustive sort") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const auto ids = oracle::shuffled_ids(10, rng);
    const auto pts = oracle::random_points(10, 6, rng);
    const auto q = oracle::random_points(1, 6, rng)[0];
    const auto got = rank_by_cosine("r", {q, "t"}, labeled(ids, pts));
    const auto want = oracle::cosine_sort(ids, pts, q);
    REQUIRE(got.entries.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
      CHECK(got.entries[i].metric_id == want[i].id);
      CHECK(got.entries[i].score == want[i].score);
    }
  }
}

TEST_CASE("k-d tree construction") {
  SUBCASE("single point") {
    const KdTree tree(labeled({"only"}, {{1, 2, 3}}));
    CHECK(tree.size() == 1);
    CHECK(tree.check_invariants());
    const auto hit = tree.knn(std::vector<double>{-9, 9, 0}, 5);
    REQUIRE(hit.size() == 1);
    CHECK(hit[0].metric_id == "only");
  }
  SUBCASE("163 metrics of dim 300") {
    std::mt19937_64 rng(163);
    const auto ids = oracle::shuffled_ids(163, rng);
    const auto pts = oracle::random_points(163, 300, rng);
    const KdTree tree(labeled(ids, pts));
    CHECK(tree.size() == 163);
    CHECK(tree.dim() == 300);
    CHECK(tree.check_invariants());
  }
  SUBCASE("all points identical") {
    const std::vector<std::vector<double>> same(40, std::vector<double>{1, 1});
    std::mt19937_64 rng(1);
    const KdTree tree(labeled(oracle::shuffled_ids(40, rng), same));
    CHECK(tree.check_invariants());
    const auto hits = tree.knn(std::vector<double>{1, 1}, 3);
    CHECK(ids_of(hits) == std::vector<std::string>{"m000", "m001", "m002"});
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(KdTree(std::vector<LabeledEmbedding>{}), InputError);
    CHECK_THROWS_AS(KdTree(labeled({"a", "b"}, {{1, 2}, {1, 2, 3}})), DimensionMismatch);
    CHECK_THROWS_AS(KdTree(labeled({"a", "a"}, {{1, 2}, {3, 4}})), InputError);
    const KdTree tree(labeled({"a"}, {{1, 2}}));
    CHECK_THROWS_AS(tree.knn(std::vector<double>{1, 2, 3}, 1), DimensionMismatch);
    CHECK_THROWS_AS(tree.knn(std::vector<double>{1, 2}, 0), InputError);
  }
}

TEST_CASE("knn examples") {
  const auto metrics = labeled({"p", "q", "r"}, {{0, 0}, {3, 4}, {1, 0}});
  const KdTree tree(metrics);
  const auto exact = knn_query(tree, "req", {{3, 4}, "t"}, 1);
  REQUIRE(exact.entries.size() == 1);
  CHECK(exact.entries[0] == RankEntry{"q", 0.0});
  CHECK(exact.method == RankMethod::kEuclideanKnn);

  const auto all = knn_query(tree, "req", {{0, 0}, "t"}, 10);
  CHECK(ids_of(all.entries) == std::vector<std::string>{"p", "r", "q"});
  CHECK(all.entries[2].score == 5.0);
}

TEST_CASE("knn agrees with a linear scan on 200 random points") {
  std::mt19937_64 rng(200);
  const auto ids = oracle::shuffled_ids(200, rng);
  const auto pts = oracle::random_points(200, 5, rng);
  const KdTree tree(labeled(ids, pts));
  REQUIRE(tree.check_invariants());
  for (int query = 0; query < 100; ++query) {
    const auto q = oracle::random_points(1, 5, rng)[0];
    const auto got = tree.knn(q, 10);
    const auto want = oracle::linear_knn(ids, pts, q, 10);
    CHECK(ids_of(got) == ids_of(want));
  }
}

TEST_CASE("knn exactness with lattice ties") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 120;
    const auto ids = oracle::shuffled_ids(n, rng);
    const auto pts = oracle::random_points(n, 2, rng);
    const KdTree tree(labeled(ids, pts));
    for (int query = 0; query < 20; ++query) {
      const auto q = oracle::random_points(1, 2, rng)[0];
      const std::size_t k = 1 + rng() % 12;
      const auto got = tree.knn(q, k);
      const auto want = oracle::linear_knn(ids, pts, q, k);
      REQUIRE(got.size() == want.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].metric_id == want[i].id);
        CHECK(got[i].score == want[i].score);
      }
    }
  }
}

TEST_CASE("rank_embeddings is deterministic across thread counts") {
  std::mt19937_64 rng(5);
  const auto mids = oracle::shuffled_ids(60, rng);
  const auto mpts = oracle::random_points(60, 12, rng);
  std::vector<LabeledEmbedding> reqs;
  for (int i = 0; i < 40; ++i) reqs.push_back({"r" + std::to_string(i), {oracle::random_points(1, 12, rng)[0], "t"}});
  const auto metrics = labeled(mids, mpts);
  for (auto method : {RankMethod::kCosine, RankMethod::kEuclideanKnn}) {
    const auto one = rank_embeddings(reqs, metrics, {method, 10, 1});
    const auto many = rank_embeddings(reqs, metrics, {method, 10, 8});
    CHECK(format_rankings(one) == format_rankings(many));
    CHECK(one.size() == reqs.size());
    CHECK(one[0].entries.size() == (method == RankMethod::kCosine ? 60u : 10u));
  }
}

TEST_CASE("rank_all on tiny and fixture corpora") {
  const HashBackend hash(16, 0);
  Corpus tiny;
  tiny.requirements.push_back({"R", "log access", "Technical", std::nullopt, Json::object()});
  tiny.metrics.push_back({"M", "access logs", std::nullopt, std::nullopt, Json::object()});
  tiny.ground_truth = GroundTruth(std::vector<Mapping>{{"R", {"M"}}});
  for (auto method : {RankMethod::kCosine, RankMethod::kEuclideanKnn}) {
    const auto lists = rank_all(tiny, hash, {method, 10, 1});
    REQUIRE(lists.size() == 1);
    REQUIRE(lists[0].entries.size() == 1);
    CHECK(lists[0].entries[0].metric_id == "M");
    CHECK(lists[0].backend == "hash-d16-s0");
  }

  const Corpus fixture = load_corpus(testutil::fixture_corpus());
  const auto cosine = rank_all(fixture, hash, {RankMethod::kCosine, 10, 4});
  const auto knn = rank_all(fixture, hash, {RankMethod::kEuclideanKnn, 5, 4});
  REQUIRE(cosine.size() == 8);
  CHECK(cosine[0].requirement_id == "OPS-05.3");
  for (const auto& l : cosine) CHECK(l.entries.size() == 20);
  for (const auto& l : knn) CHECK(l.entries.size() == 5);
}

TEST_CASE("rank_all reports missing stored embeddings by requirement id") {
  const Corpus fixture = load_corpus(testutil::fixture_corpus());
  const HashBackend hash(8, 0);
  auto store = std::make_shared<EmbeddingStore>();
  for (const auto& m : fixture.metrics) store->insert(store_key(m.description, hash.name()), hash.embed_one(m.description));
  for (const auto& r : fixture.requirements) {
    if (r.id != "HR-03.1") store->insert(store_key(r.description, hash.name()), hash.embed_one(r.description));
  }
  const StoreBackend backend(store, hash.name());
  try {
    rank_all(fixture, backend);
    FAIL("expected InputError");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("HR-03.1") != std::string::npos);
    CHECK(std::string(e.what()).find("OPS-05.3") == std::string::npos);
  }
}

TEST_CASE("rankings JSONL round trip") {
  const std::vector<RankedList> lists = {
      {"R1", {{"a", 0.5}, {"b", -0.25}}, RankMethod::kCosine, "m"},
      {"R2", {{"c", 0.0}}, RankMethod::kEuclideanKnn, "m"},
  };
  const std::string text = format_rankings(lists);
  CHECK(text.substr(0, text.find('\n')) ==
        R"({"requirement":"R1","method":"cosine","backend":"m","ranking":[{"metric":"a","score":0.5},{"metric":"b","score":-0.25}]})");
  CHECK(parse_rankings(text) == lists);
  CHECK_THROWS_AS(parse_rankings("{\"requirement\":1}\n"), InputError);
  CHECK_THROWS_AS(parse_rankings(R"({"requirement":"R","method":"bogus","backend":"m","ranking":[]})"),
                  InputError);
}
