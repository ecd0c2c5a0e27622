#pragma once

// Subcommand pipeline: ingest -> build -> baseline / eval -> analyze.
// Exit codes: 0 success, 1 some repositories failed while others completed,
// 2 fatal (strict-mode parse failure, bad arguments, every unit failed).

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "issuelinks/analysis.hpp"
#include "issuelinks/baseline.hpp"
#include "issuelinks/config.hpp"
#include "issuelinks/corpus.hpp"
#include "issuelinks/dataset.hpp"
#include "issuelinks/detail/parallel.hpp"
#include "issuelinks/error.hpp"
#include "issuelinks/evaluation.hpp"

namespace issuelinks::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitFatal = 2;

enum class LogLevel { Debug, Info, Warn, Error };

inline LogLevel parse_log_level(std::string_view s) {
  if (s == "debug") return LogLevel::Debug;
  if (s == "info") return LogLevel::Info;
  if (s == "warn") return LogLevel::Warn;
  if (s == "error") return LogLevel::Error;
  throw Error(ErrorKind::InvalidArgument, "unknown log level '" + std::string(s) + "'");
}

class Logger {
 public:
  Logger(std::ostream& out, LogLevel level) : out_(&out), level_(level) {}

  void debug(const std::string& m) { emit(LogLevel::Debug, "debug", m); }
  void info(const std::string& m) { emit(LogLevel::Info, "info", m); }
  void warn(const std::string& m) { emit(LogLevel::Warn, "warn", m); }
  void error(const std::string& m) { emit(LogLevel::Error, "error", m); }

 private:
  void emit(LogLevel l, const char* tag, const std::string& m) {
    if (l >= level_) *out_ << "[" << tag << "] " << m << '\n';
  }
  std::ostream* out_;
  LogLevel level_;
};

/// File-name-safe form of a repository id.
inline std::string safe_name(std::string_view repo) {
  std::string out;
  for (char c : repo) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                    c == '_' || c == '.';
    out += ok ? c : '_';
  }
  return out.empty() ? std::string("repo") : out;
}

inline void write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

inline void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  auto j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorKind::SchemaError, path.string() + " is not valid JSON");
  return j;
}

/// Regular files in `dir` whose name ends with `suffix`, sorted by name.
inline std::vector<fs::path> files_with_suffix(const fs::path& dir, std::string_view suffix) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::Io, "not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() >= suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline int outcome(std::size_t ok, std::size_t failed) {
  if (failed == 0) return kExitOk;
  return ok > 0 ? kExitPartial : kExitFatal;
}

// ---------------------------------------------------------------------------
// ingest

struct IngestResult {
  std::map<std::string, RepositorySnapshot> snapshots;
  ParseReport issue_report;
  ParseReport link_report;
  std::int64_t orphan_links = 0;  // links naming a repository without issues
};

inline IngestResult ingest_corpus(const fs::path& corpus_dir, const TypeNormalizer& normalizer, bool strict,
                                  std::size_t jobs) {
  IngestResult res;
  std::ifstream issues_in(corpus_dir / "issues.jsonl");
  if (!issues_in) throw Error(ErrorKind::Io, "cannot open " + (corpus_dir / "issues.jsonl").string());
  std::ifstream links_in(corpus_dir / "links.jsonl");
  if (!links_in) throw Error(ErrorKind::Io, "cannot open " + (corpus_dir / "links.jsonl").string());

  std::map<std::string, std::vector<Issue>> issues_by_repo;
  std::map<std::string, std::set<std::string>> keys_by_repo;
  for (auto& issue : read_issues(issues_in, strict, res.issue_report)) {
    if (!keys_by_repo[issue.repo_id].insert(issue.issue_key).second) {
      const std::string msg = "duplicate issue_key " + issue.issue_key + " in " + issue.repo_id;
      if (strict) throw Error(ErrorKind::MalformedRecord, msg);
      ++res.issue_report.duplicate_issue_keys;
      res.issue_report.messages.push_back("MalformedRecord: " + msg + " (first record kept)");
      continue;
    }
    issues_by_repo[issue.repo_id].push_back(std::move(issue));
  }
  std::map<std::string, std::vector<Link>> links_by_repo;
  for (auto& link : read_links(links_in, normalizer, strict, res.link_report)) {
    if (!issues_by_repo.contains(link.repo_id)) {
      ++res.orphan_links;
      continue;
    }
    links_by_repo[link.repo_id].push_back(std::move(link));
  }

  std::vector<std::string> repos;
  for (const auto& [repo, _] : issues_by_repo) repos.push_back(repo);
  std::vector<RepositorySnapshot> built(repos.size());
  detail::parallel_for(repos.size(), jobs, [&](std::size_t i) {
    built[i] = build_snapshot(repos[i], std::move(issues_by_repo[repos[i]]), std::move(links_by_repo[repos[i]]));
  });
  for (auto& s : built) {
    const std::string id = s.repo_id;
    res.snapshots.emplace(id, std::move(s));
  }
  return res;
}

inline json to_json(const ParseReport& r) {
  return {{"lines", r.lines},
          {"records", r.records},
          {"malformed", r.malformed},
          {"self_links", r.self_links},
          {"duplicate_issue_keys", r.duplicate_issue_keys},
          {"messages", r.messages}};
}

inline int cmd_ingest(const RunConfig& cfg, const fs::path& corpus, const fs::path& out, Logger& log) {
  TypeNormalizer normalizer =
      cfg.type_map.empty() ? TypeNormalizer::defaults() : TypeNormalizer::from_file(cfg.type_map);
  const IngestResult res = ingest_corpus(corpus, normalizer, cfg.strict, cfg.jobs);
  if (res.snapshots.empty()) throw Error(ErrorKind::EmptyCorpus, "no issues found in " + corpus.string());

  const json meta = metadata_header(cfg, "ingest");
  json repos = json::object();
  for (const auto& [repo, snap] : res.snapshots) {
    std::ostringstream buf;
    write_snapshot(buf, snap, meta);
    write_text(out / (safe_name(repo) + ".snapshot.jsonl"), buf.str());
    json entry = issuelinks::to_json(repo_stats(snap, cfg.reference_year));
    entry["dropped_private_link_count"] = snap.dropped_private_link_count;
    entry["dropped_multilink_pair_count"] = snap.dropped_multilink_count;
    entry["dropped_private_issue_count"] = snap.dropped_private_issue_count;
    entry["collapsed_duplicate_link_count"] = snap.collapsed_duplicate_link_count;
    repos[repo] = entry;
    log.info("ingest " + repo + ": " + std::to_string(snap.issues.size()) + " issues, " +
             std::to_string(snap.links.size()) + " links, dropped private-link=" +
             std::to_string(snap.dropped_private_link_count) +
             " multi-link-pairs=" + std::to_string(snap.dropped_multilink_count));
  }
  for (const auto* r : {&res.issue_report, &res.link_report}) {
    for (const auto& m : r->messages) log.warn(m);
  }
  if (res.orphan_links > 0) log.warn(std::to_string(res.orphan_links) + " link(s) name a repository without issues");
  write_json(out / "ingest_report.json", {{"meta", meta},
                                          {"issues", to_json(res.issue_report)},
                                          {"links", to_json(res.link_report)},
                                          {"orphan_links", res.orphan_links},
                                          {"reference_year", cfg.reference_year},
                                          {"repos", repos}});
  return kExitOk;
}

// ---------------------------------------------------------------------------
// build

inline int cmd_build(const RunConfig& cfg, const fs::path& in, const fs::path& out, Logger& log) {
  cfg.dataset.validate();
  const auto files = files_with_suffix(in, ".snapshot.jsonl");
  if (files.empty()) throw Error(ErrorKind::EmptyCorpus, "no *.snapshot.jsonl files in " + in.string());
  std::vector<RepositorySnapshot> snaps;
  for (const auto& f : files) snaps.push_back(read_snapshot_file(f.string()));

  std::vector<std::optional<Dataset>> built(snaps.size());
  std::vector<std::string> failures(snaps.size());
  detail::parallel_for(snaps.size(), cfg.jobs, [&](std::size_t i) {
    try {
      built[i] = build_dataset(snaps[i], cfg.dataset);
    } catch (const Error& e) {
      failures[i] = e.what();
    }
  });

  const json meta = metadata_header(cfg, "build");
  std::size_t ok = 0, failed = 0;
  std::vector<RepositorySnapshot> kept;
  for (std::size_t i = 0; i < snaps.size(); ++i) {
    if (!built[i]) {
      ++failed;
      log.error("build " + snaps[i].repo_id + ": " + failures[i]);
      continue;
    }
    ++ok;
    const Dataset& ds = *built[i];
    const fs::path path = out / (safe_name(ds.repo_id) + ".dataset.jsonl");
    std::ostringstream buf;
    write_dataset(buf, ds);
    write_text(path, buf.str());
    write_json(path.string() + ".meta.json", dataset_metadata(ds, meta));
    log.info("build " + ds.repo_id + ": " + std::to_string(ds.examples.size()) + " examples, " +
             std::to_string(ds.labels.size()) + " labels");
    kept.push_back(snaps[i]);
  }
  if (!kept.empty()) {
    write_json(out / "common_types.json",
               {{"meta", meta},
                {"global_common_share", cfg.dataset.global_common_share},
                {"repos", [&] {
                   std::vector<std::string> r;
                   for (const auto& s : kept) r.push_back(s.repo_id);
                   return r;
                 }()},
                {"common_types", common_types(std::span<const RepositorySnapshot>(kept), cfg.dataset)}});
  }
  return outcome(ok, failed);
}

// ---------------------------------------------------------------------------
// baseline / eval

inline json topk_json(const TopKResult& t) {
  return {{"k", t.k},
          {"top1_accuracy", t.top1_accuracy},
          {"topk_accuracy", t.topk_accuracy},
          {"improvement", t.improvement}};
}

inline std::string topk_text(const TopKResult& t) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4) << "\ntop-" << t.k << " accuracy " << t.topk_accuracy << " (top-1 "
      << t.top1_accuracy << ", improvement " << t.improvement << ")\n";
  return out.str();
}

/// Writes `<stem>.report.json`, `<stem>.report.txt` and `<stem>.confusion.csv`.
inline void write_report(const fs::path& out, const std::string& stem, const std::string& repo_id,
                         const PredictionSet& set, std::size_t topk, const json& meta, json extra = json::object()) {
  const EvalReport report = classification_report(set);
  json j = {{"meta", meta}, {"repo_id", repo_id}, {"labels", set.labels}, {"report", to_json(report)}};
  std::string text = report_to_text(report);
  if (topk > 0) {
    const TopKResult t = topk_analysis(set, static_cast<std::int64_t>(topk));
    j["topk"] = topk_json(t);
    text += topk_text(t);
  }
  for (auto& [k, v] : extra.items()) j[k] = v;
  write_json(out / (stem + ".report.json"), j);
  write_text(out / (stem + ".report.txt"), text);
  write_text(out / (stem + ".confusion.csv"), confusion_to_csv(report.confusion));
}

inline json baseline_repo(const RunConfig& cfg, const Dataset& ds, const fs::path& out, const json& meta,
                          Logger& log) {
  const std::string kind(to_string(cfg.baseline.model_kind));
  const std::string stem = safe_name(ds.repo_id) + "." + kind;
  std::vector<LinkExample> train_set, test_set;
  for (const auto& e : ds.examples) {
    if (e.split == Split::Test) {
      test_set.push_back(e);
    } else if (e.split == Split::Train || e.split == Split::Val) {
      train_set.push_back(e);
    }
  }

  json cv = {{"folds", cfg.cv_folds}};
  try {
    const auto res = cross_validate(cfg.baseline, train_set, ds.labels, cfg.cv_folds);
    cv["fold_macro_f1"] = res.fold_macro_f1;
    cv["mean_macro_f1"] = res.mean_macro_f1;
    log.info("baseline " + ds.repo_id + " (" + kind + "): cv macro F1 " + detail::fmt(res.mean_macro_f1));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::StratificationImpossible) throw;
    cv["skipped"] = e.what();
    log.warn("baseline " + ds.repo_id + ": cross-validation skipped: " + e.what());
  }
  write_json(out / (stem + ".cv.json"), {{"meta", meta}, {"repo_id", ds.repo_id}, {"model", kind}, {"cv", cv}});

  const TrainedBaseline model = TrainedBaseline::train(cfg.baseline, train_set, ds.labels);
  json model_json = model.to_json();
  model_json["meta"] = meta;
  write_text(out / (stem + ".model.json"), model_json.dump() + "\n");

  PredictionSet set{ds.labels, {}};
  for (const auto& e : test_set) set.predictions.push_back(model.predict_example(e));
  std::ostringstream buf;
  write_predictions(buf, set);
  const fs::path pred_path = out / (stem + ".predictions.jsonl");
  write_text(pred_path, buf.str());
  write_json(pred_path.string() + ".meta.json", {{"meta", meta}, {"repo_id", ds.repo_id}, {"labels", ds.labels}});
  write_report(out, stem, ds.repo_id, set, cfg.topk, meta, {{"model", kind}, {"cv", cv}});
  return cv;
}

inline int cmd_baseline(const RunConfig& cfg, const std::vector<fs::path>& datasets, const fs::path& out,
                        Logger& log) {
  cfg.baseline.validate();
  if (datasets.empty()) throw Error(ErrorKind::EmptyCorpus, "no datasets given");
  const json meta = metadata_header(cfg, "baseline");
  std::size_t ok = 0, failed = 0;
  for (const auto& path : datasets) {
    try {
      const Dataset ds = read_dataset_file(path.string());
      baseline_repo(cfg, ds, out, meta, log);
      ++ok;
    } catch (const Error& e) {
      ++failed;
      log.error("baseline " + path.string() + ": " + e.what());
    }
  }
  return outcome(ok, failed);
}

inline int cmd_eval(const RunConfig& cfg, const fs::path& dataset_path, const fs::path& predictions_path,
                    const fs::path& out, std::string name, Logger& log) {
  const Dataset ds = read_dataset_file(dataset_path.string());
  const PredictionSet set = load_predictions(predictions_path.string(), ds);
  if (name.empty()) name = safe_name(ds.repo_id);
  write_report(out, name, ds.repo_id, set, cfg.topk, metadata_header(cfg, "eval"));
  log.info("eval " + ds.repo_id + ": macro F1 " + detail::fmt(classification_report(set).macro_f1));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// analyze

struct AnalysisInputs {
  std::map<std::string, RepositorySnapshot> snapshots;
  std::map<std::string, Dataset> datasets;
  std::map<std::string, EvalReport> reports;
};

inline AnalysisInputs load_analysis_inputs(const fs::path& snapshots_dir, const fs::path& datasets_dir,
                                           const fs::path& reports_dir, std::string_view report_suffix) {
  AnalysisInputs in;
  for (const auto& f : files_with_suffix(snapshots_dir, ".snapshot.jsonl")) {
    auto s = read_snapshot_file(f.string());
    const std::string id = s.repo_id;
    in.snapshots.emplace(id, std::move(s));
  }
  for (const auto& f : files_with_suffix(datasets_dir, ".dataset.jsonl")) {
    auto d = read_dataset_file(f.string());
    const std::string id = d.repo_id;
    in.datasets.emplace(id, std::move(d));
  }
  for (const auto& f : files_with_suffix(reports_dir, report_suffix)) {
    const json j = read_json(f);
    if (!j.contains("report") || !j.contains("repo_id")) continue;
    const std::string repo = j["repo_id"].get<std::string>();
    if (in.reports.contains(repo)) {
      throw Error(ErrorKind::InvalidArgument, "more than one report for '" + repo + "' matches suffix '" +
                                                  std::string(report_suffix) + "'; pass a narrower --report-suffix");
    }
    in.reports.emplace(repo, report_from_json(j["report"]));
  }
  return in;
}

inline std::string repo_table_csv(std::span<const RepoStats> stats) {
  std::ostringstream out;
  out << "Repo,Year,#Issues,#Links,#Types,#Projects,%Coverage,%CrossProject\n";
  for (const auto& s : stats) {
    out << detail::csv_escape(s.repo_id) << ',' << s.creation_year << ',' << s.issue_count << ',' << s.link_count
        << ',' << s.link_type_count << ',' << s.project_count << ',' << detail::fmt(100.0 * s.coverage, 1) << ','
        << (s.cross_project_share ? detail::fmt(100.0 * *s.cross_project_share, 1) : std::string("/")) << '\n';
  }
  return out.str();
}

inline std::string f1_table_csv(const std::map<std::string, EvalReport>& reports, std::span<const std::string> types) {
  std::ostringstream out;
  out << "Repo";
  for (const auto& t : types) out << ',' << detail::csv_escape(t);
  out << ",Macro,Weighted\n";
  for (const auto& [repo, r] : reports) {
    out << detail::csv_escape(repo);
    for (const auto& t : types) {
      const auto* c = r.find(t);
      out << ',' << ((c != nullptr && c->support > 0) ? detail::fmt(c->f1, 2) : std::string("/"));
    }
    out << ',' << detail::fmt(r.macro_f1, 2) << ',' << detail::fmt(r.weighted_f1, 2) << '\n';
  }
  const RepoSummary s = summarize_repos(reports);
  auto label_stat = [&](const std::string& t, bool want_std) -> std::string {
    for (const auto& l : s.labels) {
      if (l.label == t) return detail::fmt(want_std ? l.std_f1 : l.mean_f1, 2);
    }
    return "/";
  };
  out << "Mean";
  for (const auto& t : types) out << ',' << label_stat(t, false);
  out << ',' << detail::fmt(s.mean_macro_f1, 2) << ',' << detail::fmt(s.mean_weighted_f1, 2) << '\n';
  out << "Std";
  for (const auto& t : types) out << ',' << label_stat(t, true);
  out << ',' << detail::fmt(s.std_macro_f1, 2) << ',' << detail::fmt(s.std_weighted_f1, 2) << '\n';
  return out.str();
}

inline int cmd_analyze(const RunConfig& cfg, const AnalysisInputs& in, const fs::path& out, Logger& log) {
  if (in.snapshots.empty()) throw Error(ErrorKind::EmptyCorpus, "no snapshots to analyze");
  const json meta = metadata_header(cfg, "analyze");

  // Descriptive statistics cover every snapshot.
  std::vector<RepoStats> all_stats;
  for (const auto& [repo, snap] : in.snapshots) all_stats.push_back(repo_stats(snap, cfg.reference_year));
  write_text(out / "repositories.csv", repo_table_csv(all_stats));
  {
    json arr = json::array();
    for (const auto& s : all_stats) arr.push_back(issuelinks::to_json(s));
    write_json(out / "repositories.json", {{"meta", meta}, {"rows", arr}});
  }

  // Repositories with a snapshot, a dataset and a report take part in the rest.
  std::vector<std::string> repos;
  for (const auto& [repo, _] : in.reports) {
    if (in.snapshots.contains(repo) && in.datasets.contains(repo)) {
      repos.push_back(repo);
    } else {
      log.warn("analyze: report for '" + repo + "' has no matching snapshot/dataset; ignored");
    }
  }
  if (repos.size() < 3) log.warn("analyze: only " + std::to_string(repos.size()) + " repositories; correlations need 3");

  std::vector<RepositorySnapshot> used_snaps;
  std::map<std::string, EvalReport> used_reports;
  for (const auto& r : repos) {
    used_snaps.push_back(in.snapshots.at(r));
    used_reports.emplace(r, in.reports.at(r));
  }
  const auto common = used_snaps.empty() ? std::vector<std::string>{}
                                         : common_types(std::span<const RepositorySnapshot>(used_snaps), cfg.dataset);
  std::vector<std::string> type_columns = common;
  type_columns.emplace_back(kNonLink);

  // Per-type F1 by repository.
  write_text(out / "f1_by_type.csv", f1_table_csv(used_reports, type_columns));
  {
    const RepoSummary s = summarize_repos(used_reports);
    json labels = json::array();
    for (const auto& l : s.labels) {
      labels.push_back({{"label", l.label}, {"mean_f1", l.mean_f1}, {"std_f1", l.std_f1}, {"repos", l.repos}});
    }
    json per_repo = json::object();
    for (const auto& [repo, r] : used_reports) per_repo[repo] = to_json(r);
    write_json(out / "f1_by_type.json", {{"meta", meta},
                                           {"per_repo", per_repo},
                                           {"labels", labels},
                                           {"mean_macro_f1", s.mean_macro_f1},
                                           {"std_macro_f1", s.std_macro_f1},
                                           {"mean_weighted_f1", s.mean_weighted_f1},
                                           {"std_weighted_f1", s.std_weighted_f1},
                                           {"std", "population"}});
  }

  // Repository properties against macro F1.
  std::vector<RepoPerformance> perf;
  for (const auto& r : repos) {
    perf.push_back({repo_stats(in.snapshots.at(r), cfg.reference_year), in.reports.at(r).macro_f1,
                    in.datasets.at(r).labels.size()});
  }
  const auto repo_rows = repo_correlation_table(perf);
  write_text(out / "repo_correlations.csv", correlation_csv(repo_rows));
  {
    json arr = json::array();
    for (const auto& r : repo_rows) arr.push_back(to_json(r));
    write_json(out / "repo_correlations.json",
               {{"meta", meta}, {"rows", arr}, {"age_reference_year", cfg.reference_year}});
  }

  // Cosine, length and length difference per link type.
  std::vector<TfidfModel> models(repos.size());
  detail::parallel_for(repos.size(), cfg.jobs, [&](std::size_t i) {
    models[i] = fit_repo_vectorizer(in.snapshots.at(repos[i]), cfg.baseline.tfidf);
  });
  std::vector<LinkTypeInput> lt_inputs;
  for (std::size_t i = 0; i < repos.size(); ++i) {
    lt_inputs.push_back({repos[i], &models[i], typed_pairs(in.snapshots.at(repos[i]), in.datasets.at(repos[i]).examples)});
  }
  const auto lt_rows = linktype_property_table(lt_inputs, common, cfg.baseline.tfidf.tokenizer);
  write_text(out / "linktype_cosine.csv", linktype_measure_csv(lt_rows, repos, LinkTypeMeasure::Cosine));
  write_text(out / "linktype_length.csv", linktype_measure_csv(lt_rows, repos, LinkTypeMeasure::Length));
  write_text(out / "linktype_difference.csv", linktype_measure_csv(lt_rows, repos, LinkTypeMeasure::Difference));
  {
    json arr = json::array();
    for (const auto& r : lt_rows) arr.push_back(to_json(r));
    write_json(out / "linktype_properties.json", {{"meta", meta}, {"rows", arr}});
  }

  // Link-type properties against per-type F1.
  TypeMetrics metrics;
  for (const auto& r : repos) metrics[r] = type_metrics(in.reports.at(r), in.datasets.at(r));
  const auto tables = linktype_correlation_tables(lt_rows, metrics, cfg.exclude_per_type);
  write_text(out / "linktype_correlations.csv", correlation_csv(tables.pooled));
  write_text(out / "per_type_correlations.csv", per_type_csv(tables));
  json tables_json = to_json(tables);
  tables_json["meta"] = meta;
  write_json(out / "linktype_correlation_tables.json", tables_json);

  const auto inter = inter_type_f1_correlation(metrics);
  write_text(out / "inter_type_f1_correlations.csv", inter_type_csv(inter));
  json inter_json = to_json(inter);
  inter_json["meta"] = meta;
  inter_json["presence"] = to_json(presence_correlation(metrics, "Subtask", "Epic"));
  write_json(out / "inter_type_f1_correlations.json", inter_json);

  log.info("analyze: " + std::to_string(repos.size()) + " repositories, " + std::to_string(common.size()) +
           " common types");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// entry point

inline int run(int argc, const char* const* argv, std::ostream& log_stream = std::cerr) {
  CLI::App app{"Issue link type prediction: dataset construction, baselines, evaluation and analysis"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::uint64_t seed = 0;
  double min_share = 0, global_share = 0;
  std::int64_t min_links = 0;
  std::string model, type_map, log_level;
  std::size_t topk = 0, jobs = 0, folds = 0;
  int reference_year = 0;
  std::vector<std::string> exclude;
  bool strict = false, same_project = false;

  app.add_option("--config", config_path, "JSON file with RunConfig fields");
  auto* o_seed = app.add_option("--seed", seed, "Global seed");
  auto* o_strict = app.add_flag("--strict", strict, "Abort on the first malformed record");
  auto* o_min_share = app.add_option("--min-share", min_share, "Per-repository minimum link-type share");
  auto* o_global = app.add_option("--global-share", global_share, "Global share for common link types");
  auto* o_min_links = app.add_option("--min-links", min_links, "Minimum links for a repository");
  auto* o_model = app.add_option("--model", model, "Baseline model")->check(CLI::IsMember({"rf", "svm"}));
  auto* o_topk = app.add_option("--topk", topk, "Add a top-k block to reports");
  auto* o_jobs = app.add_option("--jobs", jobs, "Worker threads (default: logical CPUs)");
  auto* o_year = app.add_option("--reference-year", reference_year, "Reference year for repository age");
  auto* o_type_map = app.add_option("--type-map", type_map, "JSON {raw: canonical} link type table");
  auto* o_exclude = app.add_option("--exclude-per-type", exclude, "Repositories left out of per-type correlations");
  auto* o_folds = app.add_option("--cv-folds", folds, "Cross-validation folds for baselines");
  auto* o_same_project = app.add_flag("--same-project-non-links", same_project, "Sample non-links within a project");
  auto* o_log = app.add_option("--log-level", log_level, "debug, info, warn or error");

  std::string corpus, in_dir, out_dir, dataset_path, predictions_path, name, report_suffix = ".report.json";
  std::string snapshots_dir, datasets_dir, reports_dir;
  std::vector<std::string> datasets;

  auto* ingest = app.add_subcommand("ingest", "Parse issues.jsonl/links.jsonl into per-repository snapshots");
  ingest->add_option("--corpus", corpus, "Directory with issues.jsonl and links.jsonl");
  ingest->add_option("--out", out_dir, "Output directory");

  auto* build = app.add_subcommand("build", "Build per-repository datasets from snapshots");
  build->add_option("--in", in_dir, "Directory with *.snapshot.jsonl")->required();
  build->add_option("--out", out_dir, "Output directory (default: --in)");

  auto* baseline = app.add_subcommand("baseline", "Cross-validate, train and evaluate a TF-IDF baseline");
  baseline->add_option("--in", in_dir, "Directory with *.dataset.jsonl");
  baseline->add_option("--dataset", datasets, "Dataset file (repeatable)");
  baseline->add_option("--out", out_dir, "Output directory (default: --in or the dataset's directory)");

  auto* eval = app.add_subcommand("eval", "Evaluate a predictions file against a dataset's TEST split");
  eval->add_option("--dataset", dataset_path, "Dataset file")->required();
  eval->add_option("--predictions", predictions_path, "predictions.jsonl")->required();
  eval->add_option("--out", out_dir, "Output directory")->required();
  eval->add_option("--name", name, "Output file stem (default: repository id)");

  auto* analyze = app.add_subcommand("analyze", "Repository and link-type correlation tables");
  analyze->add_option("--in", in_dir, "Default directory for snapshots, datasets and reports");
  analyze->add_option("--snapshots", snapshots_dir, "Directory with *.snapshot.jsonl");
  analyze->add_option("--datasets", datasets_dir, "Directory with *.dataset.jsonl");
  analyze->add_option("--reports", reports_dir, "Directory with report JSON files");
  analyze->add_option("--report-suffix", report_suffix, "Report file suffix, e.g. .rf.report.json");
  analyze->add_option("--out", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, log_stream, log_stream);
    return code == 0 ? kExitOk : kExitFatal;
  }

  Logger log(log_stream, LogLevel::Info);
  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (o_seed->count()) cfg.seed = seed;
    if (o_strict->count()) cfg.strict = strict;
    if (o_min_share->count()) cfg.dataset.min_repo_share = min_share;
    if (o_global->count()) cfg.dataset.global_common_share = global_share;
    if (o_min_links->count()) cfg.dataset.min_repo_links = min_links;
    if (o_model->count()) cfg.baseline.model_kind = parse_model_kind(model);
    if (o_topk->count()) cfg.topk = topk;
    if (o_jobs->count()) cfg.jobs = jobs;
    if (o_year->count()) cfg.reference_year = reference_year;
    if (o_type_map->count()) cfg.type_map = type_map;
    if (o_exclude->count()) cfg.exclude_per_type = exclude;
    if (o_folds->count()) cfg.cv_folds = folds;
    if (o_same_project->count()) cfg.dataset.same_project_non_links = same_project;
    if (o_log->count()) cfg.log_level = log_level;
    log = Logger(log_stream, parse_log_level(cfg.log_level));

    if (ingest->parsed()) {
      if (corpus.empty()) corpus = cfg.corpus_dir;
      if (out_dir.empty()) out_dir = cfg.output_dir;
      if (corpus.empty() || out_dir.empty()) throw Error(ErrorKind::InvalidArgument, "ingest needs --corpus and --out");
      cfg.corpus_dir = corpus;
      cfg.output_dir = out_dir;
      return cmd_ingest(cfg.resolved(), corpus, out_dir, log);
    }
    if (build->parsed()) {
      if (out_dir.empty()) out_dir = in_dir;
      cfg.output_dir = out_dir;
      return cmd_build(cfg.resolved(), in_dir, out_dir, log);
    }
    if (baseline->parsed()) {
      std::vector<fs::path> files(datasets.begin(), datasets.end());
      if (!in_dir.empty()) {
        for (auto& f : files_with_suffix(in_dir, ".dataset.jsonl")) files.push_back(f);
      }
      if (out_dir.empty()) {
        out_dir = !in_dir.empty() ? in_dir : (files.empty() ? std::string(".") : files.front().parent_path().string());
      }
      cfg.output_dir = out_dir;
      return cmd_baseline(cfg.resolved(), files, out_dir, log);
    }
    if (eval->parsed()) {
      cfg.output_dir = out_dir;
      return cmd_eval(cfg.resolved(), dataset_path, predictions_path, out_dir, name, log);
    }
    if (analyze->parsed()) {
      auto pick = [&](const std::string& d) { return d.empty() ? in_dir : d; };
      if (pick(snapshots_dir).empty() || pick(datasets_dir).empty() || pick(reports_dir).empty()) {
        throw Error(ErrorKind::InvalidArgument, "analyze needs --in or all of --snapshots/--datasets/--reports");
      }
      cfg.output_dir = out_dir;
      const auto inputs =
          load_analysis_inputs(pick(snapshots_dir), pick(datasets_dir), pick(reports_dir), report_suffix);
      return cmd_analyze(cfg.resolved(), inputs, out_dir, log);
    }
  } catch (const Error& e) {
    log.error(e.what());
    return kExitFatal;
  } catch (const std::exception& e) {
    log.error(std::string("unexpected failure: ") + e.what());
    return kExitFatal;
  }
  return kExitFatal;
}

/// Convenience overload for tests and embedding.
inline int run(const std::vector<std::string>& args, std::ostream& log_stream = std::cerr) {
  std::vector<const char*> argv{"issuelinks"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), log_stream);
}

}  // namespace issuelinks::cli
