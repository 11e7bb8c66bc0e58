// Exercises the embedding-service wire protocol against an in-process mock.

#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "reqmetric/corpus.hpp"
#include "reqmetric/embedding.hpp"
#include "test_util.hpp"

using namespace reqmetric;

namespace {

// Serves POST /embed and GET /health using the hash backend as its "model".
class MockService {
 public:
  using Hook = std::function<bool(const Json& request, httplib::Response& res)>;

  explicit MockService(std::string model = "mock-model", std::size_t dim = 16)
      : model_(std::move(model)), backend_(dim, 1) {
    server_.Post("/embed", [this](const httplib::Request& req, httplib::Response& res) {
      const int now = ++in_flight_;
      int prev = max_in_flight_.load();
      while (now > prev && !max_in_flight_.compare_exchange_weak(prev, now)) {
      }
      ++requests_;
      handle(req, res);
      if (delay_ms_ > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms_));
      --in_flight_;
    });
    server_.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
      Json j = {{"status", "ok"}, {"model", model_}, {"dim", backend_.dim()}};
      res.set_content(j.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~MockService() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int requests() const { return requests_.load(); }
  int max_in_flight() const { return max_in_flight_.load(); }
  void set_hook(Hook hook) { hook_ = std::move(hook); }
  void set_delay_ms(int ms) { delay_ms_ = ms; }
  const HashBackend& backend() const { return backend_; }

 private:
  void handle(const httplib::Request& req, httplib::Response& res) {
    const Json body = Json::parse(req.body);
    if (hook_ && hook_(body, res)) return;
    const auto texts = body.at("texts").get<std::vector<std::string>>();
    if (texts.empty() || texts.size() > 256) {
      res.status = 400;
      res.set_content(R"({"error":"batch size"})", "application/json");
      return;
    }
    const bool normalize = body.value("normalize", false);
    Json rows = Json::array();
    for (const auto& t : texts) {
      Embedding e = backend_.embed_one(t);
      if (normalize) e = l2_normalize(e);
      rows.push_back(e.values);
    }
    Json reply = {{"model", model_}, {"dim", backend_.dim()}, {"embeddings", rows}};
    res.set_content(reply.dump(), "application/json");
  }

  std::string model_;
  HashBackend backend_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  Hook hook_;
  std::atomic<int> requests_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
  int delay_ms_ = 0;
};

RemoteOptions fast_options() {
  RemoteOptions o;
  o.retry_delay_ms = 10;
  o.timeout_seconds = 5;
  return o;
}

}  // namespace

TEST_CASE("normalized single text has unit norm") {
  MockService svc;
  RemoteOptions o = fast_options();
  o.normalize = true;
  const auto out = embed_remote({"hello"}, svc.url(), "mock-model", o);
  REQUIRE(out.size() == 1);
  CHECK(out[0].dim() == 16);
  CHECK(std::abs(l2_norm(out[0].values) - 1.0) <= 1e-6);
  CHECK(out[0].backend == "mock-model");
}

TEST_CASE("empty batch is rejected before any request") {
  MockService svc;
  CHECK_THROWS_AS(embed_remote({}, svc.url(), "mock-model", fast_options()), InputError);
  CHECK(svc.requests() == 0);
}

TEST_CASE("repeated text gives identical vectors") {
  MockService svc;
  const auto a = embed_remote({"same text", "same text"}, svc.url(), "mock-model");
  const auto b = embed_remote({"same text"}, svc.url(), "mock-model");
  for (std::size_t i = 0; i < a[0].dim(); ++i) {
    CHECK(std::abs(a[0].values[i] - a[1].values[i]) <= 1e-6);
    CHECK(std::abs(a[0].values[i] - b[0].values[i]) <= 1e-6);
  }
}

TEST_CASE("large batches are chunked and reassembled in order") {
  MockService svc;
  svc.set_delay_ms(30);
  std::vector<std::string> texts;
  for (int i = 0; i < 1100; ++i) texts.push_back("sentinel " + std::to_string(i));
  const auto out = embed_remote(texts, svc.url(), "mock-model", fast_options());
  REQUIRE(out.size() == texts.size());
  CHECK(svc.requests() == 5);  // ceil(1100 / 256)
  CHECK(svc.max_in_flight() <= 4);
  CHECK(svc.max_in_flight() >= 2);
  for (std::size_t i = 0; i < texts.size(); i += 97) {
    CHECK(out[i].values == svc.backend().embed_one(texts[i]).values);
  }
}

TEST_CASE("in-flight requests respect the configured bound") {
  MockService svc;
  svc.set_delay_ms(20);
  RemoteOptions o = fast_options();
  o.max_in_flight = 1;
  o.chunk_size = 10;
  std::vector<std::string> texts(50, "x");
  embed_remote(texts, svc.url(), "mock-model", o);
  CHECK(svc.requests() == 5);
  CHECK(svc.max_in_flight() == 1);
}

TEST_CASE("connection failure is a retryable backend error") {
  const int port = testutil::unused_port();
  RemoteOptions o = fast_options();
  o.max_attempts = 2;
  try {
    embed_remote({"x"}, "http://127.0.0.1:" + std::to_string(port), "m", o);
    FAIL("expected BackendError");
  } catch (const BackendError& e) {
    CHECK(e.retryable());
    CHECK(e.exit_code() == 3);
  }
}

TEST_CASE("503 is retried, other errors pass through") {
  MockService svc;
  std::atomic<int> calls{0};
  svc.set_hook([&](const Json&, httplib::Response& res) {
    if (calls++ == 0) {
      res.status = 503;
      res.set_content("loading", "text/plain");
      return true;
    }
    return false;
  });
  CHECK(embed_remote({"x"}, svc.url(), "mock-model", fast_options()).size() == 1);
  CHECK(calls.load() == 2);

  svc.set_hook([](const Json&, httplib::Response& res) {
    res.status = 500;
    res.set_content("model exploded", "text/plain");
    return true;
  });
  try {
    embed_remote({"x"}, svc.url(), "mock-model", fast_options());
    FAIL("expected BackendError");
  } catch (const BackendError& e) {
    CHECK_FALSE(e.retryable());
    CHECK(std::string(e.what()).find("500") != std::string::npos);
    CHECK(std::string(e.what()).find("model exploded") != std::string::npos);
  }
}

TEST_CASE("protocol violations are reported") {
  MockService svc;
  SUBCASE("row dim disagrees with declared dim") {
    svc.set_hook([](const Json&, httplib::Response& res) {
      res.set_content(R"({"model":"mock-model","dim":3,"embeddings":[[1,2,3],[1,2]]})",
                      "application/json");
      return true;
    });
    CHECK_THROWS_AS(embed_remote({"a", "b"}, svc.url(), "mock-model"), BackendError);
  }
  SUBCASE("wrong number of rows") {
    svc.set_hook([](const Json&, httplib::Response& res) {
      res.set_content(R"({"model":"mock-model","dim":1,"embeddings":[[1]]})", "application/json");
      return true;
    });
    CHECK_THROWS_AS(embed_remote({"a", "b"}, svc.url(), "mock-model"), BackendError);
  }
  SUBCASE("not json") {
    svc.set_hook([](const Json&, httplib::Response& res) {
      res.set_content("<html>", "text/html");
      return true;
    });
    CHECK_THROWS_AS(embed_remote({"a"}, svc.url(), "mock-model"), BackendError);
  }
  SUBCASE("different model") {
    CHECK_THROWS_AS(embed_remote({"a"}, svc.url(), "other-model"), BackendError);
  }
  SUBCASE("dim changes between chunks") {
    std::atomic<int> n{0};
    svc.set_hook([&](const Json& req, httplib::Response& res) {
      const std::size_t dim = n++ == 0 ? 2 : 3;
      Json rows = Json::array();
      for (std::size_t i = 0; i < req.at("texts").size(); ++i) rows.push_back(std::vector<double>(dim, 1.0));
      res.set_content(Json{{"model", "mock-model"}, {"dim", dim}, {"embeddings", rows}}.dump(),
                      "application/json");
      return true;
    });
    RemoteOptions o = fast_options();
    o.chunk_size = 1;
    o.max_in_flight = 1;
    CHECK_THROWS_AS(embed_remote({"a", "b"}, svc.url(), "mock-model", o), BackendError);
  }
}

TEST_CASE("model name may be given without organisation prefix") {
  MockService svc("sentence-transformers/all-MiniLM-L12-v2");
  CHECK(embed_remote({"a"}, svc.url(), "all-MiniLM-L12-v2").size() == 1);
}

TEST_CASE("remote backend keeps one dim for its lifetime") {
  MockService svc;
  const RemoteBackend backend(svc.url(), "mock-model", fast_options());
  CHECK(backend.name() == "mock-model");
  CHECK(backend.embed({"a", "b"}).size() == 2);
  svc.set_hook([](const Json&, httplib::Response& res) {
    res.set_content(R"({"model":"mock-model","dim":2,"embeddings":[[1,2]]})", "application/json");
    return true;
  });
  CHECK_THROWS_AS(backend.embed({"c"}), BackendError);
}
