#pragma once

// Multi-class evaluation: per-class precision/recall/F1, macro and weighted
// aggregates, support-ordered normalized confusion matrices, top-k accuracy
// and the predictions.jsonl exchange format.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "issuelinks/dataset.hpp"
#include "issuelinks/error.hpp"

namespace issuelinks {

struct Prediction {
  std::string example_id;
  std::string true_label;
  std::string predicted_label;
  std::optional<std::map<std::string, double>> scores;

  bool operator==(const Prediction&) const = default;
};

struct PredictionSet {
  std::vector<std::string> labels;  // label universe; order is the tie-break order
  std::vector<Prediction> predictions;
};

namespace detail {

inline std::unordered_map<std::string, std::size_t> label_index(std::span<const std::string> labels) {
  std::unordered_map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < labels.size(); ++i) idx.emplace(labels[i], i);
  return idx;
}

// Highest score wins; equal scores go to the label listed first.
inline std::size_t score_argmax(const std::map<std::string, double>& scores,
                                std::span<const std::string> labels) {
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = scores.find(labels[i]);
    const double s = it == scores.end() ? -std::numeric_limits<double>::infinity() : it->second;
    if (i == 0 || s > best_score) {
      best = i;
      best_score = s;
    }
  }
  return best;
}

}  // namespace detail

/// Checks the PredictionSet invariants: known labels, unique ids, and scores
/// whose argmax agrees with the predicted label.
inline void validate(const PredictionSet& set) {
  const auto idx = detail::label_index(set.labels);
  std::unordered_set<std::string> seen;
  for (const auto& p : set.predictions) {
    if (!idx.contains(p.true_label)) {
      throw Error(ErrorKind::UnknownLabel, "true label '" + p.true_label + "' of " + p.example_id);
    }
    if (!idx.contains(p.predicted_label)) {
      throw Error(ErrorKind::UnknownLabel, "predicted label '" + p.predicted_label + "' of " + p.example_id);
    }
    if (!seen.insert(p.example_id).second) {
      throw Error(ErrorKind::SchemaError, "duplicate example_id " + p.example_id);
    }
    if (p.scores) {
      for (const auto& [label, score] : *p.scores) {
        if (!idx.contains(label)) throw Error(ErrorKind::UnknownLabel, "score label '" + label + "'");
        if (!std::isfinite(score)) throw Error(ErrorKind::SchemaError, "non-finite score for " + p.example_id);
      }
      if (set.labels[detail::score_argmax(*p.scores, set.labels)] != p.predicted_label) {
        throw Error(ErrorKind::SchemaError, "scores of " + p.example_id + " do not rank '" +
                                                p.predicted_label + "' first");
      }
    }
  }
}

struct ClassMetrics {
  std::string label;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;
  std::int64_t predicted = 0;
  bool included = false;       // appears in truth or predictions; counted in aggregates
  bool zero_division = false;  // some ratio had a zero denominator and was set to 0
};

struct ConfusionMatrix {
  std::vector<std::string> order;            // rows and columns, descending support
  std::vector<std::vector<std::int64_t>> counts;
  std::vector<std::vector<double>> normalized;  // row-stochastic where support > 0
  std::vector<bool> zero_support_rows;
};

struct EvalReport {
  std::vector<ClassMetrics> per_class;  // universe order
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double accuracy = 0.0;
  double f1_std_dev = 0.0;  // population std. dev. of per-class F1
  std::int64_t total = 0;
  ConfusionMatrix confusion;

  const ClassMetrics* find(std::string_view label) const {
    for (const auto& c : per_class) {
      if (c.label == label) return &c;
    }
    return nullptr;
  }
};

/// Rows/columns cover labels that occur as truth or prediction, ordered by
/// descending true support with alphabetical ties.
inline ConfusionMatrix confusion_matrix(const PredictionSet& set) {
  if (set.predictions.empty()) throw Error(ErrorKind::EmptyPredictions, "no predictions");
  validate(set);
  std::map<std::string, std::int64_t> support;
  std::set<std::string> present;
  for (const auto& p : set.predictions) {
    ++support[p.true_label];
    present.insert(p.true_label);
    present.insert(p.predicted_label);
  }
  ConfusionMatrix m;
  m.order.assign(present.begin(), present.end());
  std::stable_sort(m.order.begin(), m.order.end(), [&](const std::string& a, const std::string& b) {
    return support[a] > support[b];
  });
  const auto pos = detail::label_index(m.order);
  const std::size_t k = m.order.size();
  m.counts.assign(k, std::vector<std::int64_t>(k, 0));
  for (const auto& p : set.predictions) ++m.counts[pos.at(p.true_label)][pos.at(p.predicted_label)];
  m.normalized.assign(k, std::vector<double>(k, 0.0));
  m.zero_support_rows.assign(k, false);
  for (std::size_t i = 0; i < k; ++i) {
    std::int64_t row = 0;
    for (auto c : m.counts[i]) row += c;
    if (row == 0) {
      m.zero_support_rows[i] = true;
      continue;
    }
    for (std::size_t j = 0; j < k; ++j) {
      m.normalized[i][j] = static_cast<double>(m.counts[i][j]) / static_cast<double>(row);
    }
  }
  return m;
}

inline EvalReport classification_report(const PredictionSet& set) {
  if (set.predictions.empty()) throw Error(ErrorKind::EmptyPredictions, "no predictions");
  validate(set);
  const auto idx = detail::label_index(set.labels);
  const std::size_t k = set.labels.size();
  std::vector<std::int64_t> tp(k, 0), support(k, 0), predicted(k, 0);
  std::int64_t correct = 0;
  for (const auto& p : set.predictions) {
    const std::size_t t = idx.at(p.true_label);
    const std::size_t y = idx.at(p.predicted_label);
    ++support[t];
    ++predicted[y];
    if (t == y) {
      ++tp[t];
      ++correct;
    }
  }

  EvalReport r;
  r.total = static_cast<std::int64_t>(set.predictions.size());
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.total);
  std::vector<double> f1s;
  double weighted = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    ClassMetrics c;
    c.label = set.labels[i];
    c.support = support[i];
    c.predicted = predicted[i];
    c.included = support[i] > 0 || predicted[i] > 0;
    if (predicted[i] > 0) {
      c.precision = static_cast<double>(tp[i]) / static_cast<double>(predicted[i]);
    } else {
      c.zero_division = true;
    }
    if (support[i] > 0) {
      c.recall = static_cast<double>(tp[i]) / static_cast<double>(support[i]);
    } else {
      c.zero_division = true;
    }
    if (c.precision + c.recall > 0.0) {
      c.f1 = 2.0 * c.precision * c.recall / (c.precision + c.recall);
    } else {
      c.zero_division = true;
    }
    if (c.included) {
      f1s.push_back(c.f1);
      r.macro_precision += c.precision;
      r.macro_recall += c.recall;
      weighted += c.f1 * static_cast<double>(c.support);
    }
    r.per_class.push_back(c);
  }
  const double m = static_cast<double>(f1s.size());
  double sum = 0.0;
  for (double f : f1s) sum += f;
  r.macro_f1 = sum / m;
  r.macro_precision /= m;
  r.macro_recall /= m;
  r.weighted_f1 = weighted / static_cast<double>(r.total);
  double var = 0.0;
  for (double f : f1s) var += (f - r.macro_f1) * (f - r.macro_f1);
  r.f1_std_dev = std::sqrt(var / m);
  r.confusion = confusion_matrix(set);
  return r;
}

struct TopKResult {
  std::int64_t k = 1;
  double top1_accuracy = 0.0;
  double topk_accuracy = 0.0;
  double improvement = 0.0;  // topk_accuracy - top1_accuracy
};

/// Labels ranked by descending score; equal scores keep universe order.
inline std::vector<std::size_t> rank_labels(const std::map<std::string, double>& scores,
                                            std::span<const std::string> labels) {
  std::vector<std::size_t> order(labels.size());
  std::vector<double> s(labels.size(), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    order[i] = i;
    if (auto it = scores.find(labels[i]); it != scores.end()) s[i] = it->second;
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  return order;
}

inline TopKResult topk_analysis(const PredictionSet& set, std::int64_t k) {
  if (k < 1) throw Error(ErrorKind::InvalidArgument, "k must be at least 1");
  if (set.predictions.empty()) throw Error(ErrorKind::EmptyPredictions, "no predictions");
  const auto idx = detail::label_index(set.labels);
  std::int64_t hit1 = 0, hitk = 0;
  for (const auto& p : set.predictions) {
    if (!p.scores) throw Error(ErrorKind::MissingScores, "prediction " + p.example_id + " has no scores");
    auto t = idx.find(p.true_label);
    if (t == idx.end()) throw Error(ErrorKind::UnknownLabel, "true label '" + p.true_label + "'");
    const auto order = rank_labels(*p.scores, set.labels);
    const auto limit = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
    if (order.front() == t->second) ++hit1;
    for (std::size_t r = 0; r < limit; ++r) {
      if (order[r] == t->second) {
        ++hitk;
        break;
      }
    }
  }
  TopKResult res;
  res.k = k;
  const auto n = static_cast<double>(set.predictions.size());
  res.top1_accuracy = static_cast<double>(hit1) / n;
  res.topk_accuracy = static_cast<double>(hitk) / n;
  res.improvement = res.topk_accuracy - res.top1_accuracy;
  return res;
}

enum class SelectionRule { MaxValidationF1, MinValidationF1 };

/// Index of the epoch to keep given per-epoch validation macro F1; the first
/// one wins on ties. Both readings of the selection rule are supported.
inline std::size_t select_checkpoint(std::span<const double> validation_f1, SelectionRule rule) {
  if (validation_f1.empty()) throw Error(ErrorKind::InvalidArgument, "no validation scores");
  std::size_t best = 0;
  for (std::size_t i = 1; i < validation_f1.size(); ++i) {
    const bool better = rule == SelectionRule::MaxValidationF1 ? validation_f1[i] > validation_f1[best]
                                                               : validation_f1[i] < validation_f1[best];
    if (better) best = i;
  }
  return best;
}

// Cross-repository summary: per-label mean and population std. dev. of F1 over
// the repositories where the label has support, plus macro/weighted F1 stats.
struct LabelSummary {
  std::string label;
  double mean_f1 = 0.0;
  double std_f1 = 0.0;
  std::int64_t repos = 0;
};

struct RepoSummary {
  std::vector<std::pair<std::string, double>> macro_f1_by_repo;
  std::vector<LabelSummary> labels;
  double mean_macro_f1 = 0.0;
  double std_macro_f1 = 0.0;
  double mean_weighted_f1 = 0.0;
  double std_weighted_f1 = 0.0;
};

namespace detail {
inline std::pair<double, double> mean_and_population_std(std::span<const double> xs) {
  if (xs.empty()) return {0.0, 0.0};
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  return {m, std::sqrt(v / static_cast<double>(xs.size()))};
}
}  // namespace detail

inline RepoSummary summarize_repos(const std::map<std::string, EvalReport>& reports) {
  RepoSummary s;
  std::vector<double> macro, weighted;
  std::map<std::string, std::vector<double>> per_label;
  for (const auto& [repo, r] : reports) {
    s.macro_f1_by_repo.emplace_back(repo, r.macro_f1);
    macro.push_back(r.macro_f1);
    weighted.push_back(r.weighted_f1);
    for (const auto& c : r.per_class) {
      if (c.support > 0) per_label[c.label].push_back(c.f1);
    }
  }
  std::tie(s.mean_macro_f1, s.std_macro_f1) = detail::mean_and_population_std(macro);
  std::tie(s.mean_weighted_f1, s.std_weighted_f1) = detail::mean_and_population_std(weighted);
  for (const auto& [label, f1s] : per_label) {
    auto [m, sd] = detail::mean_and_population_std(f1s);
    s.labels.push_back({label, m, sd, static_cast<std::int64_t>(f1s.size())});
  }
  return s;
}

// ---------------------------------------------------------------------------
// predictions.jsonl

inline nlohmann::json to_json(const Prediction& p) {
  nlohmann::json j = {{"example_id", p.example_id},
                      {"true_label", p.true_label},
                      {"predicted_label", p.predicted_label}};
  if (p.scores) j["scores"] = *p.scores;
  return j;
}

inline void write_predictions(std::ostream& out, const PredictionSet& set) {
  for (const auto& p : set.predictions) out << to_json(p).dump() << '\n';
}

inline std::vector<Prediction> read_predictions(std::istream& in) {
  std::vector<Prediction> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const std::string where = "predictions line " + std::to_string(line_no);
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorKind::SchemaError, where + " is not a JSON object");
    Prediction p;
    for (const char* name : {"example_id", "true_label", "predicted_label"}) {
      if (!j.contains(name) || !j[name].is_string()) {
        throw Error(ErrorKind::SchemaError, where + ": missing string field '" + name + "'");
      }
    }
    p.example_id = j["example_id"].get<std::string>();
    p.true_label = j["true_label"].get<std::string>();
    p.predicted_label = j["predicted_label"].get<std::string>();
    if (j.contains("scores") && !j["scores"].is_null()) {
      if (!j["scores"].is_object()) throw Error(ErrorKind::SchemaError, where + ": scores must be an object");
      std::map<std::string, double> scores;
      for (const auto& [label, v] : j["scores"].items()) {
        if (!v.is_number()) throw Error(ErrorKind::SchemaError, where + ": score for '" + label + "' is not a number");
        scores[label] = v.get<double>();
      }
      p.scores = std::move(scores);
    }
    out.push_back(std::move(p));
  }
  return out;
}

/// Validates raw predictions against the dataset's TEST split: every test
/// example exactly once, matching true labels, labels within the dataset's
/// universe, and scores consistent with the predicted label.
inline PredictionSet bind_predictions(std::vector<Prediction> raw, const Dataset& dataset) {
  std::unordered_map<std::string, const LinkExample*> test;
  for (const auto& e : dataset.examples) {
    if (e.split == Split::Test) test.emplace(e.example_id, &e);
  }
  std::unordered_set<std::string> seen;
  for (const auto& p : raw) {
    auto it = test.find(p.example_id);
    if (it == test.end()) {
      throw Error(ErrorKind::CoverageError, "example_id " + p.example_id + " is not in the TEST split");
    }
    if (!seen.insert(p.example_id).second) {
      throw Error(ErrorKind::CoverageError, "example_id " + p.example_id + " appears more than once");
    }
    if (p.true_label != it->second->label) {
      throw Error(ErrorKind::SchemaError, "true_label of " + p.example_id + " is '" + p.true_label +
                                              "', dataset says '" + it->second->label + "'");
    }
  }
  std::vector<std::string> missing;
  for (const auto& [id, e] : test) {
    if (!seen.contains(id)) missing.push_back(id);
  }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    std::string names;
    for (std::size_t i = 0; i < missing.size() && i < 10; ++i) names += (i ? ", " : "") + missing[i];
    if (missing.size() > 10) names += ", ...";
    throw Error(ErrorKind::CoverageError,
                std::to_string(missing.size()) + " TEST example(s) without prediction: " + names);
  }
  PredictionSet set{dataset.labels, std::move(raw)};
  try {
    validate(set);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::UnknownLabel) throw Error(ErrorKind::SchemaError, e.what());
    throw;
  }
  return set;
}

inline PredictionSet load_predictions(const std::string& path, const Dataset& dataset) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open predictions " + path);
  return bind_predictions(read_predictions(in), dataset);
}

// ---------------------------------------------------------------------------
// Report emitters

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : r.per_class) {
    classes.push_back({{"label", c.label},
                       {"precision", c.precision},
                       {"recall", c.recall},
                       {"f1", c.f1},
                       {"support", c.support},
                       {"predicted", c.predicted},
                       {"included", c.included},
                       {"zero_division", c.zero_division}});
  }
  return {{"per_class", classes},
          {"macro_f1", r.macro_f1},
          {"weighted_f1", r.weighted_f1},
          {"macro_precision", r.macro_precision},
          {"macro_recall", r.macro_recall},
          {"accuracy", r.accuracy},
          {"f1_std_dev", r.f1_std_dev},
          {"total", r.total},
          {"confusion",
           {{"order", r.confusion.order},
            {"counts", r.confusion.counts},
            {"normalized", r.confusion.normalized},
            {"zero_support_rows", r.confusion.zero_support_rows}}}};
}

inline EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  for (const auto& c : j.at("per_class")) {
    ClassMetrics m;
    m.label = c.at("label").get<std::string>();
    m.precision = c.at("precision").get<double>();
    m.recall = c.at("recall").get<double>();
    m.f1 = c.at("f1").get<double>();
    m.support = c.at("support").get<std::int64_t>();
    m.predicted = c.at("predicted").get<std::int64_t>();
    m.included = c.at("included").get<bool>();
    m.zero_division = c.at("zero_division").get<bool>();
    r.per_class.push_back(m);
  }
  r.macro_f1 = j.at("macro_f1").get<double>();
  r.weighted_f1 = j.at("weighted_f1").get<double>();
  r.macro_precision = j.at("macro_precision").get<double>();
  r.macro_recall = j.at("macro_recall").get<double>();
  r.accuracy = j.at("accuracy").get<double>();
  r.f1_std_dev = j.at("f1_std_dev").get<double>();
  r.total = j.at("total").get<std::int64_t>();
  const auto& cm = j.at("confusion");
  r.confusion.order = cm.at("order").get<std::vector<std::string>>();
  r.confusion.counts = cm.at("counts").get<std::vector<std::vector<std::int64_t>>>();
  r.confusion.normalized = cm.at("normalized").get<std::vector<std::vector<double>>>();
  r.confusion.zero_support_rows = cm.at("zero_support_rows").get<std::vector<bool>>();
  return r;
}

inline std::string report_to_text(const EvalReport& r) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << std::left << std::setw(16) << "label" << std::right << std::setw(10) << "precision"
      << std::setw(10) << "recall" << std::setw(10) << "f1" << std::setw(10) << "support" << '\n';
  for (const auto& c : r.per_class) {
    if (!c.included) continue;
    out << std::left << std::setw(16) << c.label << std::right << std::setw(10) << c.precision
        << std::setw(10) << c.recall << std::setw(10) << c.f1 << std::setw(10) << c.support << '\n';
  }
  out << '\n'
      << std::left << std::setw(16) << "accuracy" << std::right << std::setw(30) << r.accuracy
      << std::setw(10) << r.total << '\n'
      << std::left << std::setw(16) << "macro avg" << std::right << std::setw(10) << r.macro_precision
      << std::setw(10) << r.macro_recall << std::setw(10) << r.macro_f1 << '\n'
      << std::left << std::setw(16) << "weighted f1" << std::right << std::setw(30) << r.weighted_f1 << '\n'
      << std::left << std::setw(16) << "f1 std dev" << std::right << std::setw(30) << r.f1_std_dev << '\n';
  return out.str();
}

inline std::string confusion_to_csv(const ConfusionMatrix& m) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "true\\predicted";
  for (const auto& l : m.order) out << ',' << l;
  out << '\n';
  for (std::size_t i = 0; i < m.order.size(); ++i) {
    out << m.order[i];
    for (double v : m.normalized[i]) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

}  // namespace issuelinks
