#include "reqmetric/corpus.hpp"

#include <algorithm>
#include <unordered_set>

#include "io.hpp"
#include "reqmetric/error.hpp"
#include "reqmetric/preprocess.hpp"

namespace reqmetric {

GroundTruth::GroundTruth(std::vector<Mapping> mappings) : mappings_(std::move(mappings)) {
  for (const auto& m : mappings_) {
    auto& set = index_[m.requirement];
    set.insert(m.metrics.begin(), m.metrics.end());
  }
}

const std::set<std::string>* GroundTruth::relevant(std::string_view requirement_id) const {
  auto it = index_.find(requirement_id);
  return it == index_.end() ? nullptr : &it->second;
}

const Requirement* Corpus::find_requirement(std::string_view id) const {
  auto it = std::find_if(requirements.begin(), requirements.end(),
                         [&](const Requirement& r) { return r.id == id; });
  return it == requirements.end() ? nullptr : &*it;
}

const Metric* Corpus::find_metric(std::string_view id) const {
  auto it = std::find_if(metrics.begin(), metrics.end(),
                         [&](const Metric& m) { return m.id == id; });
  return it == metrics.end() ? nullptr : &*it;
}

namespace {

std::string at(std::string_view collection, std::size_t index) {
  return std::string(collection) + "[" + std::to_string(index) + "]";
}

bool blank(std::string_view text) { return split_whitespace(text).empty(); }

const Json& require_array(const Json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end()) throw InputError(std::string("corpus: missing \"") + key + "\" array");
  if (!it->is_array()) throw InputError(std::string("corpus: \"") + key + "\" must be an array");
  return *it;
}

std::string require_string(const Json& record, const char* key, const std::string& where) {
  auto it = record.find(key);
  if (it == record.end()) throw InputError(where + ": missing \"" + key + "\"");
  if (!it->is_string()) throw InputError(where + ": \"" + key + "\" must be a string");
  return it->get<std::string>();
}

std::optional<std::string> optional_string(const Json& record, const char* key,
                                           const std::string& where) {
  auto it = record.find(key);
  if (it == record.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw InputError(where + ": \"" + key + "\" must be a string");
  return it->get<std::string>();
}

Json extras(const Json& record, std::initializer_list<const char*> known) {
  Json out = Json::object();
  for (const auto& [key, value] : record.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      out[key] = value;
    }
  }
  return out;
}

}  // namespace

void validate_corpus(const Corpus& corpus) {
  std::unordered_set<std::string> req_ids;
  for (std::size_t i = 0; i < corpus.requirements.size(); ++i) {
    const auto& r = corpus.requirements[i];
    const auto where = at("requirements", i);
    if (r.id.empty()) throw InputError(where + ": empty id");
    if (!req_ids.insert(r.id).second) {
      throw InputError(where + ": duplicate requirement id \"" + r.id + "\"");
    }
    if (blank(r.description)) {
      throw InputError(where + " (\"" + r.id + "\"): empty description");
    }
  }
  std::unordered_set<std::string> metric_ids;
  for (std::size_t i = 0; i < corpus.metrics.size(); ++i) {
    const auto& m = corpus.metrics[i];
    const auto where = at("metrics", i);
    if (m.id.empty()) throw InputError(where + ": empty id");
    if (!metric_ids.insert(m.id).second) {
      throw InputError(where + ": duplicate metric id \"" + m.id + "\"");
    }
    if (blank(m.description)) {
      throw InputError(where + " (\"" + m.id + "\"): empty description");
    }
  }
  std::unordered_set<std::string> mapped;
  const auto& mappings = corpus.ground_truth.mappings();
  for (std::size_t i = 0; i < mappings.size(); ++i) {
    const auto& m = mappings[i];
    const auto where = at("mappings", i);
    if (!req_ids.contains(m.requirement)) {
      throw InputError(where + ": dangling reference to requirement \"" + m.requirement + "\"");
    }
    if (!mapped.insert(m.requirement).second) {
      throw InputError(where + ": duplicate mapping for requirement \"" + m.requirement + "\"");
    }
    if (m.metrics.empty()) {
      throw InputError(where + " (\"" + m.requirement + "\"): empty metric set");
    }
    std::unordered_set<std::string> seen;
    for (std::size_t j = 0; j < m.metrics.size(); ++j) {
      const auto& id = m.metrics[j];
      const auto mwhere = where + ".metrics[" + std::to_string(j) + "]";
      if (!metric_ids.contains(id)) {
        throw InputError(mwhere + ": dangling reference to metric \"" + id + "\"");
      }
      if (!seen.insert(id).second) {
        throw InputError(mwhere + ": duplicate metric \"" + id + "\"");
      }
    }
  }
}

Corpus corpus_from_json(const Json& doc) {
  if (!doc.is_object()) throw InputError("corpus: top level must be an object");
  Corpus corpus;
  corpus.extra = extras(doc, {"requirements", "metrics", "mappings"});

  const Json& reqs = require_array(doc, "requirements");
  for (std::size_t i = 0; i < reqs.size(); ++i) {
    const auto where = at("requirements", i);
    const Json& rec = reqs[i];
    if (!rec.is_object()) throw InputError(where + ": record must be an object");
    Requirement r;
    r.id = require_string(rec, "id", where);
    r.description = require_string(rec, "description", where);
    r.req_type = optional_string(rec, "type", where).value_or("");
    r.category = optional_string(rec, "category", where);
    r.extra = extras(rec, {"id", "description", "type", "category"});
    corpus.requirements.push_back(std::move(r));
  }

  const Json& metrics = require_array(doc, "metrics");
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    const auto where = at("metrics", i);
    const Json& rec = metrics[i];
    if (!rec.is_object()) throw InputError(where + ": record must be an object");
    Metric m;
    m.id = require_string(rec, "id", where);
    m.description = require_string(rec, "description", where);
    m.category = optional_string(rec, "category", where);
    m.target_resource_type = optional_string(rec, "targetResourceType", where);
    m.extra = extras(rec, {"id", "description", "category", "targetResourceType"});
    corpus.metrics.push_back(std::move(m));
  }

  const Json& maps = require_array(doc, "mappings");
  std::vector<Mapping> mappings;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const auto where = at("mappings", i);
    const Json& rec = maps[i];
    if (!rec.is_object()) throw InputError(where + ": record must be an object");
    Mapping m;
    m.requirement = require_string(rec, "requirement", where);
    auto it = rec.find("metrics");
    if (it == rec.end() || !it->is_array()) {
      throw InputError(where + ": \"metrics\" must be an array of strings");
    }
    for (std::size_t j = 0; j < it->size(); ++j) {
      if (!(*it)[j].is_string()) {
        throw InputError(where + ".metrics[" + std::to_string(j) + "]: must be a string");
      }
      m.metrics.push_back((*it)[j].get<std::string>());
    }
    mappings.push_back(std::move(m));
  }
  corpus.ground_truth = GroundTruth(std::move(mappings));

  validate_corpus(corpus);
  return corpus;
}

Corpus parse_corpus(std::string_view json_text) {
  Json doc;
  try {
    doc = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    throw InputError(std::string("corpus: parse error at byte ") + std::to_string(e.byte) +
                     ": " + e.what());
  }
  return corpus_from_json(doc);
}

Corpus load_corpus(const std::filesystem::path& path) {
  const std::string text = detail::read_file(path);
  try {
    return parse_corpus(text);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

Json corpus_to_json(const Corpus& corpus) {
  Json doc = Json::object();
  Json reqs = Json::array();
  for (const auto& r : corpus.requirements) {
    Json rec = {{"id", r.id}, {"description", r.description}, {"type", r.req_type}};
    if (r.category) rec["category"] = *r.category;
    for (const auto& [k, v] : r.extra.items()) rec[k] = v;
    reqs.push_back(std::move(rec));
  }
  Json metrics = Json::array();
  for (const auto& m : corpus.metrics) {
    Json rec = {{"id", m.id}, {"description", m.description}};
    if (m.category) rec["category"] = *m.category;
    if (m.target_resource_type) rec["targetResourceType"] = *m.target_resource_type;
    for (const auto& [k, v] : m.extra.items()) rec[k] = v;
    metrics.push_back(std::move(rec));
  }
  Json maps = Json::array();
  for (const auto& m : corpus.ground_truth.mappings()) {
    maps.push_back({{"requirement", m.requirement}, {"metrics", m.metrics}});
  }
  doc["requirements"] = std::move(reqs);
  doc["metrics"] = std::move(metrics);
  doc["mappings"] = std::move(maps);
  for (const auto& [k, v] : corpus.extra.items()) doc[k] = v;
  return doc;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  detail::write_file(path, detail::dump_json(corpus_to_json(corpus), 2) + "\n");
}

std::size_t word_count(std::string_view text) { return split_whitespace(text).size(); }

WordStats word_stats(const std::vector<std::string_view>& texts) {
  WordStats stats;
  for (auto text : texts) {
    const std::size_t c = word_count(text);
    ++stats.histogram[c];
    stats.total_words += c;
    ++stats.n;
  }
  stats.mean = stats.n == 0 ? 0.0
                            : static_cast<double>(stats.total_words) /
                                  static_cast<double>(stats.n);
  return stats;
}

std::pair<WordStats, WordStats> word_count_stats(const Corpus& corpus) {
  std::vector<std::string_view> reqs;
  for (const auto& r : corpus.requirements) reqs.push_back(r.description);
  std::vector<std::string_view> metrics;
  for (const auto& m : corpus.metrics) metrics.push_back(m.description);
  return {word_stats(reqs), word_stats(metrics)};
}

Json word_stats_to_json(const WordStats& stats) {
  Json hist = Json::object();
  for (const auto& [count, freq] : stats.histogram) hist[std::to_string(count)] = freq;
  return {{"n", stats.n},
          {"total_words", stats.total_words},
          {"mean", stats.mean},
          {"histogram", std::move(hist)}};
}

}  // namespace reqmetric
