#include "reqmetric/evaluation.hpp"

#include <cmath>
#include <unordered_set>

#include "io.hpp"

namespace reqmetric {

namespace {

double log2_of(std::size_t i) {
  static const double kLn2 = std::log(2.0);
  return std::log(static_cast<double>(i)) / kLn2;
}

// Weight of 1-based position i: 1 for the first, 1/log2(i) afterwards.
double discount(std::size_t position) {
  return position == 1 ? 1.0 : 1.0 / log2_of(position);
}

}  // namespace

double gain(const std::string& metric_id, const std::set<std::string>& relevant) {
  return relevant.contains(metric_id) ? 1.0 : 0.0;
}

double dcg_at_k(std::span<const double> gains, std::size_t k) {
  const std::size_t n = std::min(k, gains.size());
  double dcg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (gains[i] != 0.0) dcg += gains[i] * discount(i + 1);
  }
  return dcg;
}

double idcg_at_k(std::size_t num_relevant, std::size_t k) {
  const std::size_t n = std::min(num_relevant, k);
  double idcg = 0.0;
  for (std::size_t i = 0; i < n; ++i) idcg += discount(i + 1);
  return idcg;
}

double ndcg_at_k(const RankedList& ranking, const std::set<std::string>& relevant,
                 std::size_t k) {
  const double ideal = idcg_at_k(relevant.size(), k);
  if (ideal == 0.0) return 0.0;
  std::vector<double> gains;
  const std::size_t n = std::min(k, ranking.entries.size());
  gains.reserve(n);
  for (std::size_t i = 0; i < n; ++i) gains.push_back(gain(ranking.entries[i].metric_id, relevant));
  return std::min(1.0, dcg_at_k(gains, k) / ideal);
}

void aggregate(EvalReport& report) {
  double sum_all = 0.0;
  double sum_nonzero = 0.0;
  std::size_t nonzero = 0;
  for (const auto& [id, score] : report.per_requirement) {
    sum_all += score;
    if (score > 0.0) {
      sum_nonzero += score;
      ++nonzero;
    }
  }
  const std::size_t n = report.per_requirement.size();
  report.nonzero_count = nonzero;
  report.nonzero_mean_defined = nonzero > 0;
  report.mean_nonzero = nonzero > 0 ? sum_nonzero / static_cast<double>(nonzero) : 0.0;
  report.mean_all = n > 0 ? sum_all / static_cast<double>(n) : 0.0;
}

EvalReport evaluate(std::span<const RankedList> rankings, const GroundTruth& truth,
                    std::size_t k) {
  if (k == 0) throw InputError("evaluate: k must be at least 1");
  EvalReport report;
  report.k = k;
  if (!rankings.empty()) {
    report.method = std::string(to_string(rankings.front().method));
    report.backend = rankings.front().backend;
  }
  std::unordered_set<std::string> seen;
  for (const auto& list : rankings) {
    if (std::string(to_string(list.method)) != report.method || list.backend != report.backend) {
      throw ConsistencyError("rankings mix method/backend: \"" + report.method + "\"/\"" +
                             report.backend + "\" and \"" + std::string(to_string(list.method)) +
                             "\"/\"" + list.backend + "\"");
    }
    if (!seen.insert(list.requirement_id).second) {
      throw ConsistencyError("duplicate ranking for requirement \"" + list.requirement_id + "\"");
    }
    const auto* relevant = truth.relevant(list.requirement_id);
    if (relevant == nullptr) {
      throw ConsistencyError("requirement \"" + list.requirement_id +
                             "\" has no ground-truth mapping");
    }
    report.per_requirement.emplace_back(list.requirement_id, ndcg_at_k(list, *relevant, k));
  }
  aggregate(report);
  return report;
}

Json eval_report_to_json(const EvalReport& report) {
  Json per = Json::object();
  for (const auto& [id, score] : report.per_requirement) per[id] = score;
  return {{"method", report.method},
          {"backend", report.backend},
          {"k", report.k},
          {"per_requirement", std::move(per)},
          {"mean_nonzero", report.mean_nonzero},
          {"mean_all", report.mean_all},
          {"nonzero_count", report.nonzero_count},
          {"nonzero_mean_defined", report.nonzero_mean_defined}};
}

EvalReport eval_report_from_json(const Json& j) {
  EvalReport r;
  try {
    r.method = j.at("method").get<std::string>();
    r.backend = j.at("backend").get<std::string>();
    r.k = j.at("k").get<std::size_t>();
    for (const auto& [id, score] : j.at("per_requirement").items()) {
      r.per_requirement.emplace_back(id, score.get<double>());
    }
    r.mean_nonzero = j.at("mean_nonzero").get<double>();
    r.mean_all = j.at("mean_all").get<double>();
    r.nonzero_count = j.at("nonzero_count").get<std::size_t>();
    r.nonzero_mean_defined = j.at("nonzero_mean_defined").get<bool>();
  } catch (const Json::exception& e) {
    throw InputError(std::string("evaluation report: ") + e.what());
  }
  return r;
}

void save_eval_report(const EvalReport& report, const std::filesystem::path& path) {
  detail::write_file(path, detail::dump_json(eval_report_to_json(report), 2) + "\n");
}

EvalReport load_eval_report(const std::filesystem::path& path) {
  const std::string text = detail::read_file(path);
  try {
    return eval_report_from_json(Json::parse(text));
  } catch (const Json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

}  // namespace reqmetric
