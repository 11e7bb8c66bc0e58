#include "reqmetric/cli.hpp"

#include <chrono>
#include <iostream>
#include <map>
#include <memory>
#include <set>

#include "CLI11.hpp"
#include "io.hpp"
#include "reqmetric/corpus.hpp"
#include "reqmetric/embedding.hpp"
#include "reqmetric/error.hpp"
#include "reqmetric/evaluation.hpp"
#include "reqmetric/ranking.hpp"
#include "reqmetric/report.hpp"

#ifndef REQMETRIC_DEFAULT_STOPWORDS
#define REQMETRIC_DEFAULT_STOPWORDS ""
#endif

namespace reqmetric::cli {

namespace {

namespace fs = std::filesystem;

fs::path default_stopwords() { return fs::path(REQMETRIC_DEFAULT_STOPWORDS); }

Corpus require_corpus(const RunConfig& cfg) {
  if (cfg.corpus.empty()) throw InputError("--corpus is required");
  return load_corpus(cfg.corpus);
}

StopwordSet stopwords_for(const RunConfig& cfg) {
  fs::path path = cfg.stopwords.empty() ? default_stopwords() : cfg.stopwords;
  if (path.empty()) throw InputError("--stopwords is required for the wordvec backend");
  return load_stopwords(path);
}

fs::path store_path(const RunConfig& cfg) {
  return cfg.store.empty() ? cfg.out / "embeddings.jsonl" : cfg.store;
}

std::unique_ptr<EmbeddingBackend> make_backend(const RunConfig& cfg) {
  switch (cfg.backend) {
    case BackendKind::kHash:
      return std::make_unique<HashBackend>(cfg.hash_dim, cfg.seed);
    case BackendKind::kWordVec: {
      if (cfg.vectors.empty()) throw InputError("--vectors is required for the wordvec backend");
      auto table = std::make_shared<const WordVectorTable>(
          load_word_vectors(cfg.vectors, cfg.vectors_limit));
      std::string name = cfg.model.empty() ? "wordvec:" + cfg.vectors.stem().string() : cfg.model;
      if (cfg.normalize_baseline && cfg.model.empty()) name += "+l2";
      return std::make_unique<WordVectorBackend>(std::move(table), stopwords_for(cfg),
                                                 cfg.normalize_baseline, std::move(name));
    }
    case BackendKind::kRemote: {
      if (cfg.endpoint.empty()) throw InputError("--endpoint is required for the remote backend");
      if (cfg.model.empty()) throw InputError("--model is required for the remote backend");
      RemoteOptions options;
      options.normalize = cfg.normalize;
      options.max_in_flight = std::max<std::size_t>(1, std::min<std::size_t>(cfg.parallel, 4));
      return std::make_unique<RemoteBackend>(cfg.endpoint, cfg.model, options);
    }
    case BackendKind::kStore: {
      auto store = std::make_shared<const EmbeddingStore>(store_load(store_path(cfg)));
      std::string name = cfg.model;
      if (name.empty()) {
        const auto names = store->backends();
        if (names.size() != 1) {
          throw InputError("store " + store_path(cfg).string() + " holds " +
                           std::to_string(names.size()) +
                           " backends; choose one with --model");
        }
        name = names.front();
      }
      return std::make_unique<StoreBackend>(std::move(store), std::move(name));
    }
  }
  throw InputError("unknown backend");
}

void write_histogram(const WordStats& stats, const fs::path& path) {
  std::string tsv = "words\tfrequency\n";
  for (const auto& [count, freq] : stats.histogram) {
    tsv += std::to_string(count) + "\t" + std::to_string(freq) + "\n";
  }
  detail::write_file(path, tsv);
}

int cmd_stats(const RunConfig& cfg, std::ostream& out) {
  const Corpus corpus = require_corpus(cfg);
  const auto [reqs, metrics] = word_count_stats(corpus);
  fs::create_directories(cfg.out);
  const Json doc = {{"requirements", word_stats_to_json(reqs)},
                    {"metrics", word_stats_to_json(metrics)}};
  detail::write_file(cfg.out / "stats.json", detail::dump_json(doc, 2) + "\n");
  write_histogram(reqs, cfg.out / "word_counts_requirements.tsv");
  write_histogram(metrics, cfg.out / "word_counts_metrics.tsv");
  out << "requirements: n=" << reqs.n << " mean=" << format_fixed6(reqs.mean) << "\n"
      << "metrics: n=" << metrics.n << " mean=" << format_fixed6(metrics.mean) << "\n";
  return 0;
}

int cmd_embed(const RunConfig& cfg, std::ostream& out) {
  if (cfg.backend == BackendKind::kStore) {
    throw InputError("embed needs a computing backend (hash, wordvec or remote)");
  }
  const Corpus corpus = require_corpus(cfg);
  const auto backend = make_backend(cfg);
  const fs::path path = store_path(cfg);

  EmbeddingStore existing;
  if (fs::exists(path)) existing = store_load(path);

  std::vector<std::string> pending;
  std::set<std::string> queued;
  auto consider = [&](const std::string& text) {
    const StoreKey key = store_key(text, backend->name());
    if (existing.contains(key) || !queued.insert(key.hash).second) return;
    pending.push_back(text);
  };
  for (const auto& r : corpus.requirements) consider(r.description);
  for (const auto& m : corpus.metrics) consider(m.description);

  std::vector<std::pair<StoreKey, Embedding>> records;
  if (!pending.empty()) {
    auto embeddings = backend->embed(pending);
    if (embeddings.size() != pending.size()) {
      throw BackendError("backend returned " + std::to_string(embeddings.size()) +
                         " embeddings for " + std::to_string(pending.size()) + " texts");
    }
    for (std::size_t i = 0; i < pending.size(); ++i) {
      StoreKey key = store_key(pending[i], backend->name());
      existing.insert(key, embeddings[i]);  // validates dim consistency
      records.emplace_back(std::move(key), std::move(embeddings[i]));
    }
    store_append(records, path);
  } else if (!fs::exists(path)) {
    detail::write_file(path, "");
  }
  out << records.size() << " new embeddings, " << existing.size() << " total in "
      << path.string() << "\n";
  return 0;
}

int cmd_rank(const RunConfig& cfg, std::ostream& out) {
  const Corpus corpus = require_corpus(cfg);
  const auto backend = make_backend(cfg);
  RankOptions options;
  options.method = parse_rank_method(cfg.method);
  options.k = cfg.k;
  options.parallel = cfg.parallel;
  const auto lists = rank_all(corpus, *backend, options);
  const fs::path path = cfg.rankings.empty() ? cfg.out / "rankings.jsonl" : cfg.rankings;
  save_rankings(lists, path);
  out << lists.size() << " rankings (" << to_string(options.method) << ", " << backend->name()
      << ") written to " << path.string() << "\n";
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
  const Corpus corpus = require_corpus(cfg);
  if (cfg.rankings.empty()) throw InputError("--rankings is required");
  const auto lists = load_rankings(cfg.rankings);
  const EvalReport report = evaluate(lists, corpus.ground_truth, cfg.k);
  const fs::path path = cfg.report.empty() ? cfg.out / "report.json" : cfg.report;
  save_eval_report(report, path);
  out << report.method << " " << report.backend << " k=" << report.k
      << " mean_nonzero=" << format_fixed6(report.mean_nonzero)
      << " mean_all=" << format_fixed6(report.mean_all)
      << " nonzero=" << report.nonzero_count << "/" << report.per_requirement.size() << "\n";
  return 0;
}

int cmd_compare(const RunConfig& cfg, std::ostream& out) {
  if (cfg.reports.empty()) throw InputError("compare needs at least one report file");
  std::vector<EvalReport> reports;
  for (const auto& p : cfg.reports) reports.push_back(load_eval_report(p));
  std::optional<BaselineRef> baseline;
  if (!cfg.baseline.empty()) {
    baseline = BaselineRef{cfg.baseline, std::nullopt};
    if (!cfg.baseline_method.empty()) {
      baseline->method = std::string(to_string(parse_rank_method(cfg.baseline_method)));
    }
  }
  const Comparison cmp = compare(reports, baseline);
  for (auto format : {EmitFormat::kCsv, EmitFormat::kJson, EmitFormat::kPlotData}) {
    for (const auto& p : emit(cmp, format, cfg.out)) out << "wrote " << p.string() << "\n";
  }
  out << comparison_to_csv(cmp);
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rank security metrics against requirements and score the rankings with nDCG"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with default flag values (flags win)");

  RunConfig cfg;
  std::string backend_name = "hash";
  const std::map<std::string, BackendKind> backends{{"wordvec", BackendKind::kWordVec},
                                                    {"store", BackendKind::kStore},
                                                    {"remote", BackendKind::kRemote},
                                                    {"hash", BackendKind::kHash}};

  auto shared = [&](CLI::App* sub) {
    sub->add_option("--corpus", cfg.corpus, "Corpus JSON file");
    sub->add_option("--backend", backend_name, "Embedding backend")
        ->check(CLI::IsMember({"wordvec", "store", "remote", "hash"}));
    sub->add_option("--vectors", cfg.vectors, "Word-vector file (.vec text format)");
    sub->add_option("--vectors-limit", cfg.vectors_limit, "Read at most N word vectors");
    sub->add_option("--store", cfg.store, "Embedding store (JSON Lines)");
    sub->add_option("--endpoint", cfg.endpoint, "Embedding service URL");
    sub->add_option("--model", cfg.model, "Model / backend name");
    sub->add_flag("--normalize", cfg.normalize, "Request unit-norm vectors from the service");
    sub->add_option("--method", cfg.method, "Ranking method")
        ->check(CLI::IsMember({"cosine", "knn", "euclidean-knn"}));
    sub->add_option("--k", cfg.k, "Cutoff / neighbour count")->check(CLI::PositiveNumber);
    sub->add_option("--stopwords", cfg.stopwords, "Stopword list (one per line)");
    sub->add_flag("--normalize-baseline", cfg.normalize_baseline,
                  "L2-normalize averaged word vectors");
    sub->add_option("--out", cfg.out, "Output directory");
    sub->add_option("--parallel", cfg.parallel, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", cfg.seed, "Seed for the hash backend");
    sub->add_option("--hash-dim", cfg.hash_dim, "Dimension of the hash backend")
        ->check(CLI::PositiveNumber);
    sub->add_option("--rankings", cfg.rankings, "Rankings file (JSON Lines)");
    sub->add_option("--report", cfg.report, "Evaluation report output path");
  };

  auto* stats = app.add_subcommand("stats", "Word-count statistics of the corpus");
  auto* embed = app.add_subcommand("embed", "Embed all descriptions into the store");
  auto* rank = app.add_subcommand("rank", "Rank metrics for every requirement");
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score rankings with nDCG@k");
  auto* compare_cmd = app.add_subcommand("compare", "Compare evaluation reports");
  for (auto* sub : {stats, embed, rank, evaluate_cmd, compare_cmd}) shared(sub);
  compare_cmd->add_option("reports", cfg.reports, "Evaluation report files")->required();
  compare_cmd->add_option("--baseline", cfg.baseline, "Backend name of the baseline row");
  compare_cmd->add_option("--baseline-method", cfg.baseline_method,
                          "Method of the baseline row, when ambiguous");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::kInput);
  }
  cfg.backend = backends.at(backend_name);

  try {
    if (*stats) return cmd_stats(cfg, out);
    if (*embed) return cmd_embed(cfg, out);
    if (*rank) return cmd_rank(cfg, out);
    if (*evaluate_cmd) return cmd_evaluate(cfg, out);
    if (*compare_cmd) return cmd_compare(cfg, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::kInput);
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("reqmetric");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace reqmetric::cli
