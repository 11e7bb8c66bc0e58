#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace reqmetric::cli {

enum class BackendKind { kWordVec, kStore, kRemote, kHash };

struct RunConfig {
  std::filesystem::path corpus;
  BackendKind backend = BackendKind::kHash;
  std::filesystem::path vectors;
  std::optional<std::size_t> vectors_limit;
  std::filesystem::path store;
  std::string endpoint;
  std::string model;
  std::string method = "cosine";
  std::size_t k = 10;
  std::filesystem::path stopwords;
  bool normalize_baseline = false;
  bool normalize = false;  // ask the remote service for unit vectors
  std::filesystem::path out = ".";
  std::size_t parallel = 1;
  std::uint64_t seed = 0;
  std::size_t hash_dim = 64;

  std::filesystem::path rankings;       // rank output / evaluate input
  std::filesystem::path report;         // evaluate output
  std::vector<std::filesystem::path> reports;  // compare inputs
  std::string baseline;
  std::string baseline_method;
};

// Entry point shared by the executable and the tests. Returns the process
// exit code: 0 ok, 2 input error, 3 backend/network error, 4 consistency error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace reqmetric::cli
