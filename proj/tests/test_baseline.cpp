#include <gtest/gtest.h>

#include <random>
#include <set>

#include "helpers.hpp"

using namespace issuelinks;
using testutil::class_labels;
using testutil::separable_examples;

namespace {

BaselineConfig small(ModelKind kind, std::uint64_t seed = 5) {
  BaselineConfig c;
  c.model_kind = kind;
  c.n_trees = 15;
  c.seed = seed;
  return c;
}

double training_accuracy(const TrainedBaseline& m, const std::vector<LinkExample>& ex) {
  std::size_t hit = 0;
  for (const auto& e : ex) hit += m.predict_example(e).predicted_label == e.label ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(ex.size());
}

}  // namespace

TEST(FeaturizePair, BlockLayout) {
  const std::vector<std::string> docs{"disk full error", "disk slow", "error on boot"};
  const auto vec = TfidfModel::fit(docs);
  LinkExample e;
  e.a = {"disk error", ""};
  e.b = {"disk", "error"};
  const auto f = featurize_pair(vec, e);
  const auto d = vec.dimension();
  EXPECT_EQ(f.dimension, 2 * d);
  ASSERT_EQ(f.nnz() % 2, 0u);
  const std::size_t half = f.nnz() / 2;
  for (std::size_t q = 0; q < half; ++q) {
    EXPECT_EQ(f.indices[q] + d, f.indices[q + half]);
    EXPECT_DOUBLE_EQ(f.values[q], f.values[q + half]);
  }

  e.b = {"", ""};
  const auto g = featurize_pair(vec, e);
  for (auto i : g.indices) EXPECT_LT(i, d);
}

TEST(ClassWeights, BalancedAndNone) {
  std::vector<std::size_t> y(100, 0);
  for (int i = 0; i < 10; ++i) y[i] = 1;
  const auto w = class_weights(y, 2, ClassWeighting::Balanced);
  EXPECT_NEAR(w[0], 100.0 / (2 * 90), 1e-15);
  EXPECT_NEAR(w[1], 100.0 / (2 * 10), 1e-15);
  EXPECT_NEAR(w[1] / w[0], 9.0, 1e-12);
  EXPECT_EQ(class_weights(y, 2, ClassWeighting::None), (std::vector<double>{1.0, 1.0}));
  // An absent class keeps weight 1 and does not count towards k.
  const auto w3 = class_weights(y, 3, ClassWeighting::Balanced);
  EXPECT_EQ(w3[2], 1.0);
  EXPECT_NEAR(w3[1], 5.0, 1e-15);
}

TEST(Train, SingleClassIsDegenerate) {
  auto ex = separable_examples(1, 20, 1);
  for (auto kind : {ModelKind::RandomForest, ModelKind::LinearSvm}) {
    try {
      TrainedBaseline::train(small(kind), ex, class_labels(2));
      FAIL() << "expected DegenerateTraining";
    } catch (const Error& err) {
      EXPECT_EQ(err.kind(), ErrorKind::DegenerateTraining);
    }
  }
}

TEST(Train, UnknownLabelRejected) {
  auto ex = separable_examples(2, 10, 1);
  EXPECT_THROW(TrainedBaseline::train(small(ModelKind::RandomForest), ex, std::vector<std::string>{"T0"}), Error);
}

TEST(Train, SeparableDataIsFitPerfectly) {
  const auto ex = separable_examples(2, 60, 2);
  for (auto kind : {ModelKind::RandomForest, ModelKind::LinearSvm}) {
    const auto m = TrainedBaseline::train(small(kind), ex, class_labels(2));
    EXPECT_EQ(training_accuracy(m, ex), 1.0) << to_string(kind);
  }
}

TEST(Predict, ProbabilitiesAndArgmaxTieBreak) {
  const auto ex = separable_examples(3, 30, 3, /*shuffle_labels=*/true);
  for (auto kind : {ModelKind::RandomForest, ModelKind::LinearSvm}) {
    auto cfg = small(kind);
    cfg.n_trees = 4;  // few trees make vote ties common
    const auto m = TrainedBaseline::train(cfg, ex, class_labels(3));
    for (const auto& e : ex) {
      const auto x = m.featurize(e);
      const auto p = m.predict_proba(x);
      double sum = 0.0;
      for (double v : p) {
        EXPECT_GE(v, 0.0);
        sum += v;
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
      const auto first_max = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
      EXPECT_EQ(m.predict(x), first_max);
      EXPECT_EQ(m.predict_example(e).predicted_label, m.labels()[first_max]);
      if (kind == ModelKind::RandomForest) {
        const auto v = m.votes(x);
        std::int64_t total = 0;
        for (auto c : v) total += c;
        EXPECT_EQ(total, 4);
      } else {
        EXPECT_TRUE(m.votes(x).empty());
      }
    }
  }
}

TEST(Predict, DimensionMismatch) {
  const auto ex = separable_examples(2, 10, 4);
  const auto m = TrainedBaseline::train(small(ModelKind::RandomForest), ex, class_labels(2));
  SparseVector wrong;
  wrong.dimension = m.dimension() + 1;
  try {
    m.predict(wrong);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
  }
}

TEST(Train, DeterministicAcrossRunsAndJobCounts) {
  const auto ex = separable_examples(3, 25, 5, true);
  for (auto kind : {ModelKind::RandomForest, ModelKind::LinearSvm}) {
    auto cfg = small(kind);
    cfg.jobs = 1;
    const auto a = TrainedBaseline::train(cfg, ex, class_labels(3)).to_json().dump();
    const auto b = TrainedBaseline::train(cfg, ex, class_labels(3)).to_json().dump();
    cfg.jobs = 3;
    const auto c = TrainedBaseline::train(cfg, ex, class_labels(3)).to_json().dump();
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, c);
  }
}

TEST(Model, JsonRoundTripPredictsIdentically) {
  const auto ex = separable_examples(3, 20, 6, true);
  const auto dir = testutil::scratch_dir("model_rt");
  for (auto kind : {ModelKind::RandomForest, ModelKind::LinearSvm}) {
    const auto m = TrainedBaseline::train(small(kind), ex, class_labels(3));
    const auto path = (dir / (std::string(to_string(kind)) + ".json")).string();
    save_model(m, path);
    const auto back = load_model(path);
    EXPECT_EQ(back.labels(), m.labels());
    for (const auto& e : ex) {
      EXPECT_EQ(back.predict_example(e), m.predict_example(e));
    }
  }
  nlohmann::json bad = {{"format", "other"}};
  EXPECT_THROW(TrainedBaseline::from_json(bad), Error);
}

TEST(Folds, StratifiedPartition) {
  auto ex = separable_examples(3, 23, 7);
  ex.resize(ex.size() - 5);  // unequal class sizes: 23, 23, 18
  const auto fold = stratified_folds(ex, 5, 1);
  ASSERT_EQ(fold.size(), ex.size());
  std::map<std::string, std::map<std::size_t, int>> per;
  for (std::size_t i = 0; i < ex.size(); ++i) {
    ASSERT_LT(fold[i], 5u);
    ++per[ex[i].label][fold[i]];
  }
  for (const auto& [label, counts] : per) {
    ASSERT_EQ(counts.size(), 5u) << label;
    int lo = 1 << 30, hi = 0;
    for (const auto& [f, c] : counts) {
      lo = std::min(lo, c);
      hi = std::max(hi, c);
    }
    EXPECT_LE(hi - lo, 1) << label;
  }
  EXPECT_EQ(stratified_folds(ex, 5, 1), fold);

  auto few = separable_examples(2, 3, 8);
  try {
    stratified_folds(few, 5, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::StratificationImpossible);
  }
}

TEST(CrossValidation, SeparableScoresHigh) {
  const auto ex = separable_examples(3, 40, 9);
  for (auto kind : {ModelKind::RandomForest, ModelKind::LinearSvm}) {
    const auto cv = cross_validate(small(kind), ex, class_labels(3), 5);
    ASSERT_EQ(cv.fold_macro_f1.size(), 5u);
    EXPECT_GE(cv.mean_macro_f1, 0.95) << to_string(kind);
  }
}

TEST(BaselineConfig, JsonRoundTripAndValidation) {
  BaselineConfig c;
  c.model_kind = ModelKind::LinearSvm;
  c.max_depth = 7;
  c.class_weighting = ClassWeighting::None;
  const auto back = baseline_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  c.n_trees = 0;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_THROW(parse_model_kind("knn"), Error);
}
