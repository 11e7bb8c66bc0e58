#include <atomic>
#include <chrono>
#include <exception>
#include <thread>

#include "httplib.h"
#include "reqmetric/corpus.hpp"
#include "reqmetric/embedding.hpp"

namespace reqmetric {

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path prefix without trailing '/'
};

Endpoint parse_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  const std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto slash = url.find('/', host_start);
  Endpoint ep;
  ep.origin = slash == std::string::npos ? url : url.substr(0, slash);
  if (scheme_end == std::string::npos) ep.origin = "http://" + ep.origin;
  ep.prefix = slash == std::string::npos ? "" : url.substr(slash);
  while (!ep.prefix.empty() && ep.prefix.back() == '/') ep.prefix.pop_back();
  if (ep.origin.size() <= 7) throw InputError("invalid endpoint \"" + url + "\"");
  return ep;
}

bool same_model(const std::string& requested, const std::string& reported) {
  if (requested.empty() || requested == reported) return true;
  auto ends_with = [](const std::string& s, const std::string& tail) {
    return s.size() > tail.size() && s.ends_with(tail) && s[s.size() - tail.size() - 1] == '/';
  };
  return ends_with(reported, requested) || ends_with(requested, reported);
}

std::vector<Embedding> post_chunk(const Endpoint& ep, std::span<const std::string> texts,
                                  const std::string& model, const RemoteOptions& options) {
  httplib::Client client(ep.origin);
  client.set_connection_timeout(options.timeout_seconds, 0);
  client.set_read_timeout(options.timeout_seconds, 0);
  client.set_write_timeout(options.timeout_seconds, 0);

  Json body = {{"texts", Json::array()}, {"normalize", options.normalize}};
  for (const auto& t : texts) body["texts"].push_back(t);

  auto res = client.Post(ep.prefix + "/embed", body.dump(), "application/json");
  if (!res) {
    throw BackendError("embedding service " + ep.origin + " unreachable: " +
                           httplib::to_string(res.error()),
                       /*retryable=*/true);
  }
  if (res->status != 200) {
    throw BackendError("embedding service returned HTTP " + std::to_string(res->status) + ": " +
                           res->body,
                       /*retryable=*/res->status == 503);
  }

  Json reply;
  try {
    reply = Json::parse(res->body);
  } catch (const Json::parse_error& e) {
    throw BackendError(std::string("protocol violation: response is not JSON: ") + e.what());
  }
  try {
    const auto reported = reply.at("model").get<std::string>();
    if (!same_model(model, reported)) {
      throw BackendError("protocol violation: requested model \"" + model +
                         "\" but service runs \"" + reported + "\"");
    }
    const auto dim = reply.at("dim").get<std::size_t>();
    const Json& rows = reply.at("embeddings");
    if (!rows.is_array() || rows.size() != texts.size()) {
      throw BackendError("protocol violation: expected " + std::to_string(texts.size()) +
                         " embeddings, got " +
                         std::to_string(rows.is_array() ? rows.size() : 0));
    }
    std::vector<Embedding> out;
    out.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      Embedding e{rows[i].get<std::vector<double>>(), model.empty() ? reported : model};
      if (e.dim() != dim) {
        throw BackendError("protocol violation: row " + std::to_string(i) + " has dim " +
                           std::to_string(e.dim()) + ", response declares " +
                           std::to_string(dim));
      }
      if (!std::all_of(e.values.begin(), e.values.end(),
                       [](double v) { return std::isfinite(v); })) {
        throw BackendError("protocol violation: non-finite value in row " + std::to_string(i));
      }
      out.push_back(options.normalize ? l2_normalize(e) : std::move(e));
    }
    return out;
  } catch (const Json::exception& e) {
    throw BackendError(std::string("protocol violation: ") + e.what());
  }
}

std::vector<Embedding> post_with_retry(const Endpoint& ep, std::span<const std::string> texts,
                                       const std::string& model, const RemoteOptions& options) {
  for (int attempt = 1;; ++attempt) {
    try {
      return post_chunk(ep, texts, model, options);
    } catch (const BackendError& e) {
      if (!e.retryable() || attempt >= options.max_attempts) throw;
      std::this_thread::sleep_for(std::chrono::milliseconds(options.retry_delay_ms * attempt));
    }
  }
}

}  // namespace

std::vector<Embedding> embed_remote(const std::vector<std::string>& texts,
                                    const std::string& endpoint, const std::string& model,
                                    const RemoteOptions& options) {
  if (texts.empty()) throw InputError("embed_remote: empty batch");
  const std::size_t chunk = std::clamp<std::size_t>(options.chunk_size, 1, kMaxRemoteBatch);
  const Endpoint ep = parse_endpoint(endpoint);

  const std::size_t num_chunks = (texts.size() + chunk - 1) / chunk;
  std::vector<std::vector<Embedding>> parts(num_chunks);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mu;

  auto worker = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= num_chunks || failed.load()) return;
      const std::size_t begin = c * chunk;
      const std::size_t len = std::min(chunk, texts.size() - begin);
      try {
        parts[c] = post_with_retry(ep, std::span(texts).subspan(begin, len), model, options);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(options.max_in_flight, 1, num_chunks);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);

  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (auto& part : parts) {
    for (auto& e : part) out.push_back(std::move(e));
  }
  if (out.front().dim() == 0) throw BackendError("protocol violation: zero-dimensional rows");
  try {
    check_uniform_dim(out, out.front().dim());
  } catch (const DimensionMismatch& e) {
    throw BackendError(std::string("protocol violation across batches: ") + e.what());
  }
  return out;
}

RemoteBackend::RemoteBackend(std::string endpoint, std::string model, RemoteOptions options)
    : endpoint_(std::move(endpoint)), model_(std::move(model)), options_(options) {}

std::vector<Embedding> RemoteBackend::embed(const std::vector<std::string>& texts) const {
  if (texts.empty()) return {};
  auto out = embed_remote(texts, endpoint_, model_, options_);
  std::lock_guard lock(mu_);
  if (!dim_) dim_ = out.front().dim();
  try {
    check_uniform_dim(out, *dim_);
  } catch (const DimensionMismatch& e) {
    throw BackendError(std::string("embedding service changed dimension: ") + e.what());
  }
  return out;
}

}  // namespace reqmetric
