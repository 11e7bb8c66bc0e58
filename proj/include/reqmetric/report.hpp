#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "reqmetric/evaluation.hpp"

namespace reqmetric {

struct BaselineRef {
  std::string backend;
  std::optional<std::string> method;  // needed only when the backend has several rows

  bool operator==(const BaselineRef&) const = default;
};

struct ComparisonRow {
  std::string backend;
  std::string method;
  double mean_nonzero = 0.0;
  double mean_all = 0.0;
  std::size_t nonzero_count = 0;
  bool nonzero_mean_defined = false;
  std::optional<double> delta_nonzero;  // vs the baseline row
  std::optional<double> delta_all;

  bool operator==(const ComparisonRow&) const = default;
};

struct Comparison {
  std::size_t k = kDefaultCutoff;
  std::optional<BaselineRef> baseline;
  std::vector<ComparisonRow> rows;  // descending mean_nonzero

  bool operator==(const Comparison&) const = default;
};

// Throws ConsistencyError on an empty input, mixed cutoffs, a repeated
// (backend, method) pair, or a baseline that matches no row (or several).
Comparison compare(std::span<const EvalReport> reports,
                   const std::optional<BaselineRef>& baseline = {});

enum class PlotMode { kNonzero, kAll };

// Fixed six-decimal, locale-independent number formatting.
std::string format_fixed6(double value);

std::string comparison_to_csv(const Comparison& comparison);
Json comparison_to_json(const Comparison& comparison);
Comparison comparison_from_json(const Json& j);
// Two-column TSV (label, value), one line per row.
std::string comparison_to_plot_data(const Comparison& comparison, PlotMode mode);

enum class EmitFormat { kCsv, kJson, kPlotData };

// Writes the comparison under `dir`:
//   csv       -> comparison.csv
//   json      -> comparison.json
//   plot-data -> plot_nonzero.tsv and plot_all.tsv
// Returns the written paths. Throws InputError when a file cannot be written.
std::vector<std::filesystem::path> emit(const Comparison& comparison, EmitFormat format,
                                        const std::filesystem::path& dir);

}  // namespace reqmetric
