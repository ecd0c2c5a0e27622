#pragma once

// Repository- and link-type-level analyses: property tables and their Pearson
// correlations with per-repository model performance.

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "issuelinks/corpus.hpp"
#include "issuelinks/dataset.hpp"
#include "issuelinks/error.hpp"
#include "issuelinks/evaluation.hpp"
#include "issuelinks/stats.hpp"
#include "issuelinks/text.hpp"

namespace issuelinks {

/// One correlation row. Rows that cannot be computed (fewer than 3 points,
/// constant series) carry a skip reason instead of values.
struct CorrelationResult {
  std::string property;
  std::optional<double> r;
  std::optional<double> p;
  std::size_t n = 0;
  std::string skip_reason;

  bool skipped() const { return !r.has_value(); }
};

inline CorrelationResult correlate(std::string property, std::span<const double> x, std::span<const double> y) {
  CorrelationResult row;
  row.property = std::move(property);
  row.n = x.size();
  if (x.size() != y.size()) throw Error(ErrorKind::LengthMismatch, "series for '" + row.property + "'");
  if (x.size() < 3) {
    row.skip_reason = "n=" + std::to_string(x.size()) + " < 3";
    return row;
  }
  try {
    const auto c = stats::pearson(x, y);
    row.r = c.r;
    row.p = c.p;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::ConstantSeries) throw;
    row.skip_reason = "ConstantSeries";
  }
  return row;
}

// ---------------------------------------------------------------------------
// Repository properties vs. macro F1

struct RepoPerformance {
  RepoStats stats;
  double macro_f1 = 0.0;
  std::size_t predicted_type_count = 0;  // labels the model predicts, NON_LINK included
};

inline std::vector<CorrelationResult> repo_correlation_table(std::span<const RepoPerformance> repos) {
  using Getter = std::optional<double> (*)(const RepoPerformance&);
  static const std::pair<const char*, Getter> kProperties[] = {
      {"#Issues", [](const RepoPerformance& r) -> std::optional<double> { return static_cast<double>(r.stats.issue_count); }},
      {"#Links", [](const RepoPerformance& r) -> std::optional<double> { return static_cast<double>(r.stats.link_count); }},
      {"#Projects", [](const RepoPerformance& r) -> std::optional<double> { return static_cast<double>(r.stats.project_count); }},
      {"#PredictedTypes", [](const RepoPerformance& r) -> std::optional<double> { return static_cast<double>(r.predicted_type_count); }},
      {"%Coverage", [](const RepoPerformance& r) -> std::optional<double> { return r.stats.coverage; }},
      {"%CrossProject", [](const RepoPerformance& r) { return r.stats.cross_project_share; }},
      {"#Total Users", [](const RepoPerformance& r) -> std::optional<double> { return static_cast<double>(r.stats.total_users); }},
      {"#Assignees", [](const RepoPerformance& r) -> std::optional<double> { return static_cast<double>(r.stats.unique_assignees); }},
      {"#Creators", [](const RepoPerformance& r) -> std::optional<double> { return static_cast<double>(r.stats.unique_creators); }},
      {"#Reporters", [](const RepoPerformance& r) -> std::optional<double> { return static_cast<double>(r.stats.unique_reporters); }},
      {"Assignee-Issue-Ratio", [](const RepoPerformance& r) { return r.stats.assignee_issue_ratio; }},
      {"#Age", [](const RepoPerformance& r) -> std::optional<double> { return static_cast<double>(r.stats.age); }},
  };
  std::vector<CorrelationResult> rows;
  for (const auto& [name, get] : kProperties) {
    std::vector<double> x, y;
    for (const auto& r : repos) {
      if (auto v = get(r)) {
        x.push_back(*v);
        y.push_back(r.macro_f1);
      }
    }
    rows.push_back(correlate(name, x, y));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Link-type text properties

struct TypedPair {
  std::string type;
  IssueText a;
  IssueText b;
};

/// Linked pairs of a snapshot plus the sampled non-links of its dataset.
inline std::vector<TypedPair> typed_pairs(const RepositorySnapshot& snap, std::span<const LinkExample> non_links) {
  std::vector<TypedPair> out;
  for (const auto& l : snap.links) {
    const auto& a = snap.issues.at(l.key_a);
    const auto& b = snap.issues.at(l.key_b);
    out.push_back({l.link_type, {a.title, a.description}, {b.title, b.description}});
  }
  for (const auto& e : non_links) {
    if (e.label == kNonLink) out.push_back({std::string(kNonLink), e.a, e.b});
  }
  return out;
}

/// Vectorizer over every retained issue of the repository.
inline TfidfModel fit_repo_vectorizer(const RepositorySnapshot& snap, const TfidfOptions& opts = {}) {
  std::vector<std::string> docs;
  docs.reserve(snap.issues.size());
  for (const auto& [key, issue] : snap.issues) docs.push_back(IssueText{issue.title, issue.description}.document());
  if (docs.empty()) throw Error(ErrorKind::EmptyCorpus, "repository '" + snap.repo_id + "' has no issues");
  return TfidfModel::fit(docs, opts);
}

struct LinkTypeInput {
  std::string repo_id;
  const TfidfModel* model = nullptr;
  std::vector<TypedPair> pairs;
};

struct LinkTypeCell {
  double median_cosine = 0.0;
  double median_length = 0.0;
  double median_difference = 0.0;
  std::int64_t count = 0;
};

struct LinkTypePropertyRow {
  std::string link_type;
  std::map<std::string, std::optional<LinkTypeCell>> per_repo;  // nullopt: type absent (gap)
  std::optional<double> mean_cosine;
  std::optional<double> mean_length;
  std::optional<double> mean_difference;
  std::size_t repo_count = 0;
};

/// Per (repository, type) medians of pair cosine similarity, pair length and
/// length difference; cross-repository rows are unweighted means. Types are
/// the given common types followed by NON_LINK.
inline std::vector<LinkTypePropertyRow> linktype_property_table(std::span<const LinkTypeInput> repos,
                                                                std::span<const std::string> types,
                                                                const TokenizerOptions& tok = {}) {
  std::vector<std::string> order(types.begin(), types.end());
  if (std::find(order.begin(), order.end(), kNonLink) == order.end()) order.emplace_back(kNonLink);

  std::vector<LinkTypePropertyRow> rows;
  for (const auto& type : order) {
    LinkTypePropertyRow row;
    row.link_type = type;
    std::vector<double> cos_means, len_means, diff_means;
    for (const auto& repo : repos) {
      std::vector<double> cos, len, diff;
      for (const auto& p : repo.pairs) {
        if (p.type != type) continue;
        if (repo.model != nullptr) cos.push_back(pair_cosine(*repo.model, p.a, p.b));
        const auto pl = pair_length(p.a, p.b, tok);
        len.push_back(static_cast<double>(pl.total));
        diff.push_back(static_cast<double>(pl.difference));
      }
      if (len.empty()) {
        row.per_repo[repo.repo_id] = std::nullopt;
        continue;
      }
      LinkTypeCell cell;
      cell.count = static_cast<std::int64_t>(len.size());
      cell.median_cosine = stats::median(cos).value_or(0.0);
      cell.median_length = *stats::median(len);
      cell.median_difference = *stats::median(diff);
      row.per_repo[repo.repo_id] = cell;
      cos_means.push_back(cell.median_cosine);
      len_means.push_back(cell.median_length);
      diff_means.push_back(cell.median_difference);
    }
    row.repo_count = len_means.size();
    row.mean_cosine = stats::mean(cos_means);
    row.mean_length = stats::mean(len_means);
    row.mean_difference = stats::mean(diff_means);
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Link-type properties vs. per-type F1

struct TypeRepoMetrics {
  double f1 = 0.0;
  std::int64_t support = 0;
  double training_share = 0.0;  // type count / labeled examples in TRAIN
};

/// repo -> type -> metrics; a type is present in a repo iff it has an entry.
using TypeMetrics = std::map<std::string, std::map<std::string, TypeRepoMetrics>>;

/// Metrics for one repository from its evaluation report and dataset.
inline std::map<std::string, TypeRepoMetrics> type_metrics(const EvalReport& report, const Dataset& dataset) {
  std::map<std::string, std::int64_t> train_counts;
  std::int64_t train_total = 0;
  for (const auto& e : dataset.examples) {
    if (e.split != Split::Train) continue;
    ++train_counts[e.label];
    ++train_total;
  }
  std::map<std::string, TypeRepoMetrics> out;
  for (const auto& c : report.per_class) {
    if (c.support == 0) continue;
    TypeRepoMetrics m;
    m.f1 = c.f1;
    m.support = c.support;
    if (train_total > 0) m.training_share = static_cast<double>(train_counts[c.label]) / static_cast<double>(train_total);
    out[c.label] = m;
  }
  return out;
}

struct LinkTypeCorrelationTables {
  std::vector<CorrelationResult> pooled;  // count, difference, length, cosine vs. mean F1
  std::vector<std::string> types;
  std::vector<std::string> properties;
  std::map<std::string, std::vector<CorrelationResult>> per_type;  // type -> one row per property
  std::vector<std::string> excluded_repos;
};

inline bool same_repo(std::string_view a, std::string_view b) { return detail::iequals(a, b); }

inline LinkTypeCorrelationTables linktype_correlation_tables(std::span<const LinkTypePropertyRow> rows,
                                                             const TypeMetrics& metrics,
                                                             std::span<const std::string> exclude_from_per_type = {}) {
  LinkTypeCorrelationTables out;
  out.excluded_repos.assign(exclude_from_per_type.begin(), exclude_from_per_type.end());

  // (a) type-level means across repositories.
  std::vector<double> f1, count, diff, len, cos;
  for (const auto& row : rows) {
    std::vector<double> scores;
    for (const auto& [repo, types] : metrics) {
      if (auto it = types.find(row.link_type); it != types.end()) scores.push_back(it->second.f1);
    }
    if (scores.empty() || !row.mean_length) continue;
    f1.push_back(*stats::mean(scores));
    count.push_back(static_cast<double>(row.repo_count));
    diff.push_back(*row.mean_difference);
    len.push_back(*row.mean_length);
    cos.push_back(*row.mean_cosine);
  }
  out.pooled.push_back(correlate("#Counts in Repos", count, f1));
  out.pooled.push_back(correlate("#Difference", diff, f1));
  out.pooled.push_back(correlate("#Length", len, f1));
  out.pooled.push_back(correlate("#Cosine Similarity", cos, f1));

  // (b) per type, across repositories.
  out.properties = {"#Support", "Share in Training Data", "Length", "Difference", "Cosine Similarity"};
  auto excluded = [&](const std::string& repo) {
    return std::any_of(exclude_from_per_type.begin(), exclude_from_per_type.end(),
                       [&](const std::string& x) { return same_repo(x, repo); });
  };
  for (const auto& row : rows) {
    out.types.push_back(row.link_type);
    std::vector<double> y, support, share, plen, pdiff, pcos;
    for (const auto& [repo, types] : metrics) {
      if (excluded(repo)) continue;
      auto it = types.find(row.link_type);
      if (it == types.end()) continue;
      auto cell_it = row.per_repo.find(repo);
      if (cell_it == row.per_repo.end() || !cell_it->second) continue;
      const auto& cell = *cell_it->second;
      y.push_back(it->second.f1);
      support.push_back(static_cast<double>(it->second.support));
      share.push_back(it->second.training_share);
      plen.push_back(cell.median_length);
      pdiff.push_back(cell.median_difference);
      pcos.push_back(cell.median_cosine);
    }
    auto& dst = out.per_type[row.link_type];
    dst.push_back(correlate("#Support", support, y));
    dst.push_back(correlate("Share in Training Data", share, y));
    dst.push_back(correlate("Length", plen, y));
    dst.push_back(correlate("Difference", pdiff, y));
    dst.push_back(correlate("Cosine Similarity", pcos, y));
  }
  return out;
}

struct InterTypeMatrix {
  std::vector<std::string> types;
  std::vector<std::vector<std::optional<double>>> r;  // nullopt: unavailable
  std::vector<std::vector<std::size_t>> n;
};

/// Pearson r between the F1 of every pair of types, over the repositories
/// where both occur; fewer than 3 shared repositories leaves the cell empty.
inline InterTypeMatrix inter_type_f1_correlation(const TypeMetrics& metrics) {
  InterTypeMatrix m;
  std::set<std::string> all;
  for (const auto& [repo, types] : metrics) {
    for (const auto& [t, v] : types) all.insert(t);
  }
  m.types.assign(all.begin(), all.end());
  const std::size_t k = m.types.size();
  m.r.assign(k, std::vector<std::optional<double>>(k));
  m.n.assign(k, std::vector<std::size_t>(k, 0));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      std::vector<double> x, y;
      for (const auto& [repo, types] : metrics) {
        auto a = types.find(m.types[i]);
        auto b = types.find(m.types[j]);
        if (a == types.end() || b == types.end()) continue;
        x.push_back(a->second.f1);
        y.push_back(b->second.f1);
      }
      m.n[i][j] = x.size();
      if (x.size() < 3) continue;
      if (i == j) {
        m.r[i][j] = 1.0;
        continue;
      }
      auto row = correlate("", x, y);
      m.r[i][j] = row.r;
    }
  }
  return m;
}

/// F1 of `target` against a 0/1 indicator of whether `indicator` occurs, over
/// the repositories where `target` occurs. This is a point-biserial r.
inline CorrelationResult presence_correlation(const TypeMetrics& metrics, const std::string& target,
                                              const std::string& indicator) {
  std::vector<double> x, y;
  for (const auto& [repo, types] : metrics) {
    auto t = types.find(target);
    if (t == types.end()) continue;
    x.push_back(t->second.f1);
    y.push_back(types.contains(indicator) ? 1.0 : 0.0);
  }
  return correlate(target + " F1 vs. presence of " + indicator + " (point-biserial)", x, y);
}

// ---------------------------------------------------------------------------
// Emitters

namespace detail {

inline std::string fmt(double v, int precision = 4) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(precision) << v;
  return out.str();
}

inline std::string fmt(const std::optional<double>& v, int precision = 4) {
  return v ? fmt(*v, precision) : std::string("/");
}

inline nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

inline nlohmann::json to_json(const CorrelationResult& r) {
  nlohmann::json j = {{"property", r.property}, {"r", detail::opt_json(r.r)}, {"p", detail::opt_json(r.p)}, {"n", r.n}};
  if (r.skipped()) j["skipped"] = r.skip_reason;
  return j;
}

inline std::string correlation_csv(std::span<const CorrelationResult> rows) {
  std::ostringstream out;
  out << "Properties,Correlation,p-Value,n,Note\n";
  for (const auto& r : rows) {
    out << detail::csv_escape(r.property) << ',' << detail::fmt(r.r) << ',' << detail::fmt(r.p) << ',' << r.n << ','
        << (r.skipped() ? "SkippedRow(" + r.skip_reason + ")" : std::string{}) << '\n';
  }
  return out.str();
}

enum class LinkTypeMeasure { Cosine, Length, Difference };

/// Repositories as rows, types as columns, '/' for gaps, Mean row last.
inline std::string linktype_measure_csv(std::span<const LinkTypePropertyRow> rows,
                                        std::span<const std::string> repos, LinkTypeMeasure measure) {
  const int precision = measure == LinkTypeMeasure::Cosine ? 2 : 1;
  auto pick = [&](const LinkTypeCell& c) {
    return measure == LinkTypeMeasure::Cosine ? c.median_cosine
           : measure == LinkTypeMeasure::Length ? c.median_length
                                                : c.median_difference;
  };
  std::ostringstream out;
  out << "Repo";
  for (const auto& r : rows) out << ',' << detail::csv_escape(r.link_type);
  out << '\n';
  for (const auto& repo : repos) {
    out << detail::csv_escape(repo);
    for (const auto& r : rows) {
      auto it = r.per_repo.find(repo);
      if (it == r.per_repo.end() || !it->second) {
        out << ",/";
      } else {
        out << ',' << detail::fmt(pick(*it->second), precision);
      }
    }
    out << '\n';
  }
  out << "Mean";
  for (const auto& r : rows) {
    const auto& m = measure == LinkTypeMeasure::Cosine ? r.mean_cosine
                    : measure == LinkTypeMeasure::Length ? r.mean_length
                                                         : r.mean_difference;
    out << ',' << detail::fmt(m, precision);
  }
  out << '\n';
  return out.str();
}

inline nlohmann::json to_json(const LinkTypePropertyRow& row) {
  nlohmann::json per_repo = nlohmann::json::object();
  for (const auto& [repo, cell] : row.per_repo) {
    if (!cell) {
      per_repo[repo] = nullptr;
    } else {
      per_repo[repo] = {{"median_cosine", cell->median_cosine},
                        {"median_length", cell->median_length},
                        {"median_difference", cell->median_difference},
                        {"count", cell->count}};
    }
  }
  return {{"link_type", row.link_type},
          {"per_repo", per_repo},
          {"mean_cosine", detail::opt_json(row.mean_cosine)},
          {"mean_length", detail::opt_json(row.mean_length)},
          {"mean_difference", detail::opt_json(row.mean_difference)},
          {"repo_count", row.repo_count}};
}

/// Properties as rows, types as columns, r values ('/' when skipped).
inline std::string per_type_csv(const LinkTypeCorrelationTables& t) {
  std::ostringstream out;
  out << "Property";
  for (const auto& type : t.types) out << ',' << detail::csv_escape(type);
  out << '\n';
  for (std::size_t p = 0; p < t.properties.size(); ++p) {
    out << detail::csv_escape(t.properties[p]);
    for (const auto& type : t.types) out << ',' << detail::fmt(t.per_type.at(type)[p].r);
    out << '\n';
  }
  return out.str();
}

inline nlohmann::json to_json(const LinkTypeCorrelationTables& t) {
  nlohmann::json pooled = nlohmann::json::array();
  for (const auto& r : t.pooled) pooled.push_back(to_json(r));
  nlohmann::json per_type = nlohmann::json::object();
  for (const auto& [type, rows] : t.per_type) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows) arr.push_back(to_json(r));
    per_type[type] = arr;
  }
  return {{"pooled", pooled}, {"per_type", per_type}, {"properties", t.properties}, {"types", t.types},
          {"excluded_repos", t.excluded_repos}};
}

inline nlohmann::json to_json(const InterTypeMatrix& m) {
  nlohmann::json r = nlohmann::json::array();
  for (const auto& row : m.r) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& v : row) out.push_back(detail::opt_json(v));
    r.push_back(out);
  }
  return {{"types", m.types}, {"r", r}, {"n", m.n}};
}

inline std::string inter_type_csv(const InterTypeMatrix& m) {
  std::ostringstream out;
  out << "Type";
  for (const auto& t : m.types) out << ',' << detail::csv_escape(t);
  out << '\n';
  for (std::size_t i = 0; i < m.types.size(); ++i) {
    out << detail::csv_escape(m.types[i]);
    for (const auto& v : m.r[i]) out << ',' << detail::fmt(v);
    out << '\n';
  }
  return out.str();
}

}  // namespace issuelinks
