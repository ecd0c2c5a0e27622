#pragma once

// TF-IDF baselines for link-type prediction: pair featurization, random
// forest or linear SVM with optional balanced class weights, and stratified
// k-fold cross-validation with the vectorizer refit inside each fold.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "json.hpp"

#include "issuelinks/dataset.hpp"
#include "issuelinks/detail/hash.hpp"
#include "issuelinks/detail/random.hpp"
#include "issuelinks/error.hpp"
#include "issuelinks/evaluation.hpp"
#include "issuelinks/forest.hpp"
#include "issuelinks/sparse.hpp"
#include "issuelinks/svm.hpp"
#include "issuelinks/text.hpp"

namespace issuelinks {

enum class ModelKind { RandomForest, LinearSvm };
enum class ClassWeighting { None, Balanced };

inline std::string_view to_string(ModelKind k) { return k == ModelKind::RandomForest ? "rf" : "svm"; }
inline std::string_view to_string(ClassWeighting w) { return w == ClassWeighting::Balanced ? "balanced" : "none"; }

inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "rf" || s == "RANDOM_FOREST") return ModelKind::RandomForest;
  if (s == "svm" || s == "LINEAR_SVM") return ModelKind::LinearSvm;
  throw Error(ErrorKind::InvalidArgument, "unknown model kind '" + std::string(s) + "'");
}

inline ClassWeighting parse_class_weighting(std::string_view s) {
  if (s == "balanced" || s == "BALANCED") return ClassWeighting::Balanced;
  if (s == "none" || s == "NONE") return ClassWeighting::None;
  throw Error(ErrorKind::InvalidArgument, "unknown class weighting '" + std::string(s) + "'");
}

struct BaselineConfig {
  ModelKind model_kind = ModelKind::RandomForest;
  std::size_t n_trees = 100;
  std::optional<std::size_t> max_depth;
  std::optional<std::size_t> max_features;  // ceil(sqrt(d)) when empty
  std::size_t svm_epochs = 20;
  double svm_regularization = 1e-4;
  ClassWeighting class_weighting = ClassWeighting::Balanced;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  TfidfOptions tfidf;

  void validate() const {
    if (n_trees < 1) throw Error(ErrorKind::InvalidArgument, "n_trees must be at least 1");
    if (svm_epochs < 1) throw Error(ErrorKind::InvalidArgument, "svm_epochs must be at least 1");
    if (!(svm_regularization > 0.0)) throw Error(ErrorKind::InvalidArgument, "svm_regularization must be positive");
  }
};

inline nlohmann::json to_json(const BaselineConfig& c) {
  return {{"model_kind", to_string(c.model_kind)},
          {"n_trees", c.n_trees},
          {"max_depth", c.max_depth ? nlohmann::json(*c.max_depth) : nlohmann::json(nullptr)},
          {"max_features", c.max_features ? nlohmann::json(*c.max_features) : nlohmann::json(nullptr)},
          {"svm_epochs", c.svm_epochs},
          {"svm_regularization", c.svm_regularization},
          {"class_weighting", to_string(c.class_weighting)},
          {"seed", c.seed},
          {"min_token_length", c.tfidf.tokenizer.min_token_length},
          {"min_document_frequency", c.tfidf.min_document_frequency}};
}

inline BaselineConfig baseline_config_from_json(const nlohmann::json& j, BaselineConfig c = {}) {
  auto opt_size = [&](const char* key, std::optional<std::size_t>& out) {
    if (!j.contains(key)) return;
    out = j[key].is_null() ? std::nullopt : std::optional<std::size_t>(j[key].get<std::size_t>());
  };
  if (j.contains("model_kind")) c.model_kind = parse_model_kind(j["model_kind"].get<std::string>());
  c.n_trees = j.value("n_trees", c.n_trees);
  opt_size("max_depth", c.max_depth);
  opt_size("max_features", c.max_features);
  c.svm_epochs = j.value("svm_epochs", c.svm_epochs);
  c.svm_regularization = j.value("svm_regularization", c.svm_regularization);
  if (j.contains("class_weighting")) c.class_weighting = parse_class_weighting(j["class_weighting"].get<std::string>());
  c.seed = j.value("seed", c.seed);
  c.tfidf.tokenizer.min_token_length = j.value("min_token_length", c.tfidf.tokenizer.min_token_length);
  c.tfidf.min_document_frequency = j.value("min_document_frequency", c.tfidf.min_document_frequency);
  return c;
}

/// Block vector [tfidf(issue a) ; tfidf(issue b)] of dimension 2|V|.
inline SparseVector featurize_pair(const TfidfModel& model, const LinkExample& e) {
  const SparseVector va = model.transform(e.a.document());
  const SparseVector vb = model.transform(e.b.document());
  const auto offset = static_cast<std::uint32_t>(model.dimension());
  SparseVector out;
  out.dimension = 2 * model.dimension();
  out.indices.reserve(va.nnz() + vb.nnz());
  out.values.reserve(va.nnz() + vb.nnz());
  out.indices.insert(out.indices.end(), va.indices.begin(), va.indices.end());
  out.values.insert(out.values.end(), va.values.begin(), va.values.end());
  for (std::size_t q = 0; q < vb.nnz(); ++q) {
    out.indices.push_back(vb.indices[q] + offset);
    out.values.push_back(vb.values[q]);
  }
  return out;
}

/// Fits the vectorizer on the distinct issues referenced by `examples`.
inline TfidfModel fit_pair_vectorizer(std::span<const LinkExample> examples, const TfidfOptions& opts) {
  std::set<std::string> seen;
  std::vector<std::string> docs;
  auto add = [&](const std::string& repo, const std::string& key, const IssueText& text) {
    if (seen.insert(repo + '\x1f' + key).second) docs.push_back(text.document());
  };
  for (const auto& e : examples) {
    add(e.repo_id, e.key_a, e.a);
    add(e.repo_id, e.key_b, e.b);
  }
  return TfidfModel::fit(docs, opts);
}

/// Per-class weights N / (k * count(class)) for BALANCED, 1 otherwise. k is
/// the number of classes present in y.
inline std::vector<double> class_weights(std::span<const std::size_t> y, std::size_t n_classes,
                                         ClassWeighting weighting) {
  std::vector<double> w(n_classes, 1.0);
  if (weighting == ClassWeighting::None) return w;
  std::vector<std::size_t> counts(n_classes, 0);
  for (auto c : y) ++counts[c];
  std::size_t present = 0;
  for (auto c : counts) present += c > 0 ? 1 : 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (counts[c] > 0) {
      w[c] = static_cast<double>(y.size()) / (static_cast<double>(present) * static_cast<double>(counts[c]));
    }
  }
  return w;
}

class TrainedBaseline {
 public:
  static constexpr int kFormatVersion = 1;

  TrainedBaseline() = default;

  /// Trains on feature vectors with labels drawn from `labels`, whose order is
  /// the tie-break order at prediction time.
  static TrainedBaseline train(const BaselineConfig& config, std::span<const SparseVector> x,
                               std::span<const std::string> y, std::vector<std::string> labels) {
    config.validate();
    if (x.size() != y.size()) {
      throw Error(ErrorKind::LengthMismatch,
                  std::to_string(x.size()) + " vectors but " + std::to_string(y.size()) + " labels");
    }
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < labels.size(); ++i) index.emplace(labels[i], i);
    std::vector<std::size_t> yi;
    yi.reserve(y.size());
    std::set<std::size_t> distinct;
    for (const auto& label : y) {
      auto it = index.find(label);
      if (it == index.end()) throw Error(ErrorKind::UnknownLabel, "training label '" + label + "'");
      yi.push_back(it->second);
      distinct.insert(it->second);
    }
    if (distinct.size() < 2) {
      throw Error(ErrorKind::DegenerateTraining, "training data holds " + std::to_string(distinct.size()) +
                                                     " class(es); at least 2 are required");
    }
    if (x.size() < distinct.size()) {
      throw Error(ErrorKind::DegenerateTraining, "fewer examples than classes");
    }
    const std::size_t dim = x.front().dimension;
    const CsrMatrix m = CsrMatrix::from_rows(x, dim);
    const auto weights = class_weights(yi, labels.size(), config.class_weighting);

    TrainedBaseline b;
    b.config_ = config;
    b.labels_ = std::move(labels);
    b.dimension_ = dim;
    if (config.model_kind == ModelKind::RandomForest) {
      ForestConfig fc{config.n_trees, config.max_depth, config.max_features, config.seed, config.jobs};
      b.model_ = RandomForest::train(m, yi, b.labels_.size(), weights, fc);
    } else {
      SvmConfig sc{config.svm_epochs, config.svm_regularization, config.seed, config.jobs};
      b.model_ = LinearSvm::train(m, yi, b.labels_.size(), weights, sc);
    }
    return b;
  }

  /// Fits the vectorizer on the examples' issues, featurizes and trains. The
  /// returned model carries the vectorizer.
  static TrainedBaseline train(const BaselineConfig& config, std::span<const LinkExample> examples,
                               std::vector<std::string> labels) {
    TfidfModel vec = fit_pair_vectorizer(examples, config.tfidf);
    std::vector<SparseVector> x;
    std::vector<std::string> y;
    x.reserve(examples.size());
    for (const auto& e : examples) {
      x.push_back(featurize_pair(vec, e));
      y.push_back(e.label);
    }
    TrainedBaseline b = train(config, x, y, std::move(labels));
    b.vectorizer_ = std::move(vec);
    return b;
  }

  std::vector<double> predict_proba(const SparseVector& x) const {
    check_dimension(x);
    std::vector<double> p(labels_.size(), 0.0);
    if (const auto* forest = std::get_if<RandomForest>(&model_)) {
      const auto votes = forest->votes(x.indices, x.values);
      const auto n = static_cast<double>(forest->trees().size());
      for (std::size_t c = 0; c < p.size(); ++c) p[c] = static_cast<double>(votes[c]) / n;
    } else {
      // Softmax over margins: a monotone score, not a calibrated probability.
      const auto margins = std::get<LinearSvm>(model_).margins(x.indices, x.values);
      double hi = margins[0];
      for (double m : margins) hi = std::max(hi, m);
      double z = 0.0;
      for (std::size_t c = 0; c < p.size(); ++c) {
        p[c] = std::exp(margins[c] - hi);
        z += p[c];
      }
      for (double& v : p) v /= z;
    }
    return p;
  }

  /// Index into labels() of the highest score; ties go to the lower index.
  std::size_t predict(const SparseVector& x) const {
    const auto p = predict_proba(x);
    std::size_t best = 0;
    for (std::size_t c = 1; c < p.size(); ++c) {
      if (p[c] > p[best]) best = c;
    }
    return best;
  }

  const std::string& predict_label(const SparseVector& x) const { return labels_[predict(x)]; }

  /// Forest vote counts; empty for the SVM.
  std::vector<std::int64_t> votes(const SparseVector& x) const {
    check_dimension(x);
    if (const auto* forest = std::get_if<RandomForest>(&model_)) return forest->votes(x.indices, x.values);
    return {};
  }

  const BaselineConfig& config() const { return config_; }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t dimension() const { return dimension_; }
  const std::optional<TfidfModel>& vectorizer() const { return vectorizer_; }

  SparseVector featurize(const LinkExample& e) const {
    if (!vectorizer_) throw Error(ErrorKind::InvalidArgument, "model has no bound vectorizer");
    return featurize_pair(*vectorizer_, e);
  }

  Prediction predict_example(const LinkExample& e) const {
    const auto p = predict_proba(featurize(e));
    std::size_t best = 0;
    for (std::size_t c = 1; c < p.size(); ++c) {
      if (p[c] > p[best]) best = c;
    }
    std::map<std::string, double> scores;
    for (std::size_t c = 0; c < p.size(); ++c) scores[labels_[c]] = p[c];
    return Prediction{e.example_id, e.label, labels_[best], std::move(scores)};
  }

  nlohmann::json to_json() const {
    nlohmann::json j = {{"format", "issuelinks-baseline"},
                        {"version", kFormatVersion},
                        {"config", issuelinks::to_json(config_)},
                        {"labels", labels_},
                        {"dimension", dimension_}};
    j["vectorizer"] = vectorizer_ ? vectorizer_->to_json() : nlohmann::json(nullptr);
    if (const auto* forest = std::get_if<RandomForest>(&model_)) {
      j["forest"] = forest->to_json();
    } else {
      j["svm"] = std::get<LinearSvm>(model_).to_json();
    }
    return j;
  }

  static TrainedBaseline from_json(const nlohmann::json& j) {
    if (j.value("format", std::string{}) != "issuelinks-baseline") {
      throw Error(ErrorKind::SchemaError, "not a baseline model file");
    }
    if (j.value("version", 0) != kFormatVersion) throw Error(ErrorKind::SchemaError, "unsupported model version");
    TrainedBaseline b;
    b.config_ = baseline_config_from_json(j.at("config"));
    b.labels_ = j.at("labels").get<std::vector<std::string>>();
    b.dimension_ = j.at("dimension").get<std::size_t>();
    if (!j.at("vectorizer").is_null()) b.vectorizer_ = TfidfModel::from_json(j.at("vectorizer"));
    if (j.contains("forest")) {
      b.model_ = RandomForest::from_json(j.at("forest"));
    } else {
      b.model_ = LinearSvm::from_json(j.at("svm"));
    }
    return b;
  }

 private:
  void check_dimension(const SparseVector& x) const {
    if (x.dimension != dimension_) {
      throw Error(ErrorKind::DimensionMismatch, "vector dimension " + std::to_string(x.dimension) +
                                                    ", model expects " + std::to_string(dimension_));
    }
  }

  BaselineConfig config_;
  std::vector<std::string> labels_;
  std::size_t dimension_ = 0;
  std::variant<RandomForest, LinearSvm> model_;
  std::optional<TfidfModel> vectorizer_;
};

/// Seeded stratified fold assignment: within each label, examples ordered by
/// example_id are shuffled and dealt round-robin into folds.
inline std::vector<std::size_t> stratified_folds(std::span<const LinkExample> examples, std::size_t folds,
                                                 std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorKind::InvalidArgument, "need at least 2 folds");
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < examples.size(); ++i) by_label[examples[i].label].push_back(i);
  std::vector<std::size_t> fold(examples.size(), 0);
  for (auto& [label, idx] : by_label) {
    if (idx.size() < folds) {
      throw Error(ErrorKind::StratificationImpossible, "label '" + label + "' has " +
                                                           std::to_string(idx.size()) + " examples for " +
                                                           std::to_string(folds) + " folds");
    }
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return examples[a].example_id < examples[b].example_id; });
    detail::Rng rng(detail::derive_seed(seed, "cv/" + label));
    rng.shuffle(std::span<std::size_t>(idx));
    for (std::size_t k = 0; k < idx.size(); ++k) fold[idx[k]] = k % folds;
  }
  return fold;
}

struct CrossValidationResult {
  std::vector<double> fold_macro_f1;
  double mean_macro_f1 = 0.0;
};

inline CrossValidationResult cross_validate(const BaselineConfig& config, std::span<const LinkExample> examples,
                                            const std::vector<std::string>& labels, std::size_t folds = 5) {
  const auto fold = stratified_folds(examples, folds, config.seed);
  CrossValidationResult res;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<LinkExample> train_set, test_set;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      (fold[i] == f ? test_set : train_set).push_back(examples[i]);
    }
    BaselineConfig fold_config = config;
    fold_config.seed = detail::derive_seed(config.seed, f);
    const TrainedBaseline model = TrainedBaseline::train(fold_config, train_set, labels);
    PredictionSet preds{labels, {}};
    for (const auto& e : test_set) preds.predictions.push_back(model.predict_example(e));
    res.fold_macro_f1.push_back(classification_report(preds).macro_f1);
  }
  double s = 0.0;
  for (double v : res.fold_macro_f1) s += v;
  res.mean_macro_f1 = s / static_cast<double>(folds);
  return res;
}

inline void save_model(const TrainedBaseline& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write model " + path);
  out << model.to_json().dump() << '\n';
}

inline TrainedBaseline load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open model " + path);
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorKind::SchemaError, "model file is not valid JSON");
  return TrainedBaseline::from_json(j);
}

}  // namespace issuelinks
