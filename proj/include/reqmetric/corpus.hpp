#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace reqmetric {

using Json = nlohmann::ordered_json;

/// A natural-language security requirement. `id` is the scheme identifier
/// (e.g. "OPS-05.3") and is opaque to the engine.
struct Requirement {
  std::string id;
  std::string description;
  std::string req_type;
  std::optional<std::string> category;
  Json extra = Json::object();  // unknown record fields, kept for re-export

  bool operator==(const Requirement&) const = default;
};

/// A quantifiable metric that can be associated with requirements.
struct Metric {
  std::string id;
  std::string description;
  std::optional<std::string> category;
  std::optional<std::string> target_resource_type;
  Json extra = Json::object();

  bool operator==(const Metric&) const = default;
};

/// One row of the expert mapping: a requirement and its correct metrics, in
/// the order they were listed.
struct Mapping {
  std::string requirement;
  std::vector<std::string> metrics;

  bool operator==(const Mapping&) const = default;
};

/// Requirement id -> set of correct metric ids.
class GroundTruth {
 public:
  GroundTruth() = default;
  explicit GroundTruth(std::vector<Mapping> mappings);

  const std::vector<Mapping>& mappings() const noexcept { return mappings_; }
  std::size_t size() const noexcept { return mappings_.size(); }

  // nullptr when the requirement has no mapping.
  const std::set<std::string>* relevant(std::string_view requirement_id) const;

  bool operator==(const GroundTruth& other) const { return mappings_ == other.mappings_; }

 private:
  std::vector<Mapping> mappings_;
  std::map<std::string, std::set<std::string>, std::less<>> index_;
};

struct Corpus {
  std::vector<Requirement> requirements;
  std::vector<Metric> metrics;
  GroundTruth ground_truth;
  Json extra = Json::object();  // unknown top-level fields

  const Requirement* find_requirement(std::string_view id) const;
  const Metric* find_metric(std::string_view id) const;

  bool operator==(const Corpus&) const = default;
};

// Parsing and validation. Every failure throws InputError whose message
// names the offending record (e.g. `mappings[2].metrics[1]`).
Corpus parse_corpus(std::string_view json_text);
Corpus corpus_from_json(const Json& doc);
Corpus load_corpus(const std::filesystem::path& path);

// Checks the corpus invariants; used by the loaders and available for
// corpora built in code.
void validate_corpus(const Corpus& corpus);

Json corpus_to_json(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

struct WordStats {
  std::map<std::size_t, std::size_t> histogram;  // word count -> frequency
  std::size_t n = 0;
  std::size_t total_words = 0;
  double mean = 0.0;

  bool operator==(const WordStats&) const = default;
};

// Word count of a raw description: number of tokens separated by Unicode
// whitespace. No cleaning is applied.
std::size_t word_count(std::string_view text);

WordStats word_stats(const std::vector<std::string_view>& texts);

/// First: requirements, second: metrics.
std::pair<WordStats, WordStats> word_count_stats(const Corpus& corpus);

Json word_stats_to_json(const WordStats& stats);

}  // namespace reqmetric
