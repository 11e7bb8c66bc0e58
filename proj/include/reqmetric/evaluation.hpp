#pragma once

#include <cstddef>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "reqmetric/corpus.hpp"
#include "reqmetric/ranking.hpp"

namespace reqmetric {

inline constexpr std::size_t kDefaultCutoff = 10;

// Binary relevance: 1 for a correct metric, 0 otherwise.
double gain(const std::string& metric_id, const std::set<std::string>& relevant);

// g1 + sum_{i>=2} g_i / log2(i), over the first `k` gains. Gains beyond the
// supplied list count as zero.
double dcg_at_k(std::span<const double> gains, std::size_t k);

// DCG of a list whose first min(num_relevant, k) entries are relevant.
double idcg_at_k(std::size_t num_relevant, std::size_t k);

// DCG/IDCG in [0, 1]. Zero when no relevant metric is in the top k.
// Precondition: `relevant` is nonempty.
double ndcg_at_k(const RankedList& ranking, const std::set<std::string>& relevant,
                 std::size_t k);

struct EvalReport {
  std::string method;
  std::string backend;
  std::size_t k = kDefaultCutoff;
  std::vector<std::pair<std::string, double>> per_requirement;  // ranking order
  double mean_nonzero = 0.0;  // over requirements with a score > 0
  double mean_all = 0.0;      // over all requirements, zeros included
  std::size_t nonzero_count = 0;
  bool nonzero_mean_defined = false;  // false when no score is > 0

  bool operator==(const EvalReport&) const = default;
};

// Fills the aggregate fields from per_requirement.
void aggregate(EvalReport& report);

// Throws ConsistencyError for a requirement missing from the truth, a
// duplicated requirement, or rankings mixing methods or backends.
EvalReport evaluate(std::span<const RankedList> rankings, const GroundTruth& truth,
                    std::size_t k = kDefaultCutoff);

Json eval_report_to_json(const EvalReport& report);
EvalReport eval_report_from_json(const Json& j);
void save_eval_report(const EvalReport& report, const std::filesystem::path& path);
EvalReport load_eval_report(const std::filesystem::path& path);

}  // namespace reqmetric
