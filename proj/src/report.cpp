#include "reqmetric/report.hpp"

#include <algorithm>
#include <charconv>
#include <map>

#include "io.hpp"

namespace reqmetric {

Comparison compare(std::span<const EvalReport> reports, const std::optional<BaselineRef>& baseline) {
  if (reports.empty()) throw ConsistencyError("compare: no reports");
  Comparison cmp;
  cmp.k = reports.front().k;
  cmp.baseline = baseline;

  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& r : reports) {
    if (r.k != cmp.k) {
      throw ConsistencyError("compare: mixed cutoffs k=" + std::to_string(cmp.k) + " and k=" +
                             std::to_string(r.k) + " (" + r.backend + ")");
    }
    if (!seen.emplace(r.backend, r.method).second) {
      throw ConsistencyError("compare: backend \"" + r.backend + "\" appears twice for method \"" +
                             r.method + "\"");
    }
    cmp.rows.push_back({r.backend, r.method, r.mean_nonzero, r.mean_all, r.nonzero_count,
                        r.nonzero_mean_defined, std::nullopt, std::nullopt});
  }

  std::stable_sort(cmp.rows.begin(), cmp.rows.end(),
                   [](const ComparisonRow& a, const ComparisonRow& b) {
                     if (a.mean_nonzero != b.mean_nonzero) return a.mean_nonzero > b.mean_nonzero;
                     if (a.backend != b.backend) return a.backend < b.backend;
                     return a.method < b.method;
                   });

  if (baseline) {
    const ComparisonRow* base = nullptr;
    for (const auto& row : cmp.rows) {
      if (row.backend != baseline->backend) continue;
      if (baseline->method && row.method != *baseline->method) continue;
      if (base != nullptr) {
        throw ConsistencyError("compare: baseline \"" + baseline->backend +
                               "\" is ambiguous; give its method too");
      }
      base = &row;
    }
    if (base == nullptr) {
      throw ConsistencyError("compare: baseline \"" + baseline->backend + "\" matches no report");
    }
    const double base_nonzero = base->mean_nonzero;
    const double base_all = base->mean_all;
    for (auto& row : cmp.rows) {
      row.delta_nonzero = row.mean_nonzero - base_nonzero;
      row.delta_all = row.mean_all - base_all;
    }
  }
  return cmp;
}

std::string format_fixed6(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed, 6);
  if (ec != std::errc()) return "nan";
  std::string out(buf, ptr);
  if (out == "-0.000000") out.erase(0, 1);
  return out;
}

std::string comparison_to_csv(const Comparison& cmp) {
  std::string out = "backend,method,mean_nonzero,mean_all,nonzero_count,delta_nonzero\n";
  for (const auto& row : cmp.rows) {
    out += row.backend + "," + row.method + "," + format_fixed6(row.mean_nonzero) + "," +
           format_fixed6(row.mean_all) + "," + std::to_string(row.nonzero_count) + "," +
           (row.delta_nonzero ? format_fixed6(*row.delta_nonzero) : std::string()) + "\n";
  }
  return out;
}

namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::optional<double> read_optional(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

// Row labels for plot data: the backend name, qualified by method when a
// backend has rows for more than one method.
std::vector<std::string> plot_labels(const Comparison& cmp) {
  std::map<std::string, int> count;
  for (const auto& row : cmp.rows) ++count[row.backend];
  std::vector<std::string> labels;
  for (const auto& row : cmp.rows) {
    labels.push_back(count[row.backend] > 1 ? row.backend + " (" + row.method + ")" : row.backend);
  }
  return labels;
}

}  // namespace

Json comparison_to_json(const Comparison& cmp) {
  Json rows = Json::array();
  for (const auto& row : cmp.rows) {
    rows.push_back({{"backend", row.backend},
                    {"method", row.method},
                    {"mean_nonzero", row.mean_nonzero},
                    {"mean_all", row.mean_all},
                    {"nonzero_count", row.nonzero_count},
                    {"nonzero_mean_defined", row.nonzero_mean_defined},
                    {"delta_nonzero", optional_number(row.delta_nonzero)},
                    {"delta_all", optional_number(row.delta_all)}});
  }
  Json base = nullptr;
  if (cmp.baseline) {
    base = {{"backend", cmp.baseline->backend},
            {"method", cmp.baseline->method ? Json(*cmp.baseline->method) : Json(nullptr)}};
  }
  return {{"k", cmp.k}, {"baseline", std::move(base)}, {"rows", std::move(rows)}};
}

Comparison comparison_from_json(const Json& j) {
  Comparison cmp;
  try {
    cmp.k = j.at("k").get<std::size_t>();
    if (const Json& b = j.at("baseline"); !b.is_null()) {
      BaselineRef ref{b.at("backend").get<std::string>(), std::nullopt};
      if (auto m = b.find("method"); m != b.end() && !m->is_null()) ref.method = m->get<std::string>();
      cmp.baseline = ref;
    }
    for (const auto& r : j.at("rows")) {
      cmp.rows.push_back({r.at("backend").get<std::string>(), r.at("method").get<std::string>(),
                          r.at("mean_nonzero").get<double>(), r.at("mean_all").get<double>(),
                          r.at("nonzero_count").get<std::size_t>(),
                          r.at("nonzero_mean_defined").get<bool>(),
                          read_optional(r, "delta_nonzero"), read_optional(r, "delta_all")});
    }
  } catch (const Json::exception& e) {
    throw InputError(std::string("comparison: ") + e.what());
  }
  return cmp;
}

std::string comparison_to_plot_data(const Comparison& cmp, PlotMode mode) {
  const auto labels = plot_labels(cmp);
  std::string out;
  for (std::size_t i = 0; i < cmp.rows.size(); ++i) {
    const auto& row = cmp.rows[i];
    const double v = mode == PlotMode::kNonzero ? row.mean_nonzero : row.mean_all;
    out += labels[i] + "\t" + format_fixed6(v) + "\n";
  }
  return out;
}

std::vector<std::filesystem::path> emit(const Comparison& cmp, EmitFormat format,
                                        const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> written;
  auto put = [&](const std::filesystem::path& path, const std::string& content) {
    detail::write_file(path, content);
    written.push_back(path);
  };
  switch (format) {
    case EmitFormat::kCsv:
      put(dir / "comparison.csv", comparison_to_csv(cmp));
      break;
    case EmitFormat::kJson:
      put(dir / "comparison.json", detail::dump_json(comparison_to_json(cmp), 2) + "\n");
      break;
    case EmitFormat::kPlotData:
      put(dir / "plot_nonzero.tsv", comparison_to_plot_data(cmp, PlotMode::kNonzero));
      put(dir / "plot_all.tsv", comparison_to_plot_data(cmp, PlotMode::kAll));
      break;
  }
  return written;
}

}  // namespace reqmetric
