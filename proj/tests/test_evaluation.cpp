#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "helpers.hpp"
#include "oracles.hpp"

using namespace issuelinks;

namespace {

PredictionSet from_labels(const std::vector<std::string>& universe, const std::vector<std::string>& truth,
                          const std::vector<std::string>& pred) {
  PredictionSet s{universe, {}};
  for (std::size_t i = 0; i < truth.size(); ++i) s.predictions.push_back({"e" + std::to_string(i), truth[i], pred[i], {}});
  return s;
}

PredictionSet random_set(std::mt19937_64& rng, std::size_t n, std::size_t k) {
  std::vector<std::string> universe;
  for (std::size_t c = 0; c < k; ++c) universe.push_back("L" + std::to_string(c));
  std::vector<std::string> truth, pred;
  for (std::size_t i = 0; i < n; ++i) {
    truth.push_back(universe[rng() % k]);
    pred.push_back(rng() % 3 == 0 ? truth.back() : universe[rng() % k]);
  }
  return from_labels(universe, truth, pred);
}

}  // namespace

TEST(Report, WorkedExample) {
  const auto r = classification_report(from_labels({"A", "B"}, {"A", "A", "B", "B"}, {"A", "B", "B", "B"}));
  EXPECT_NEAR(r.find("A")->f1, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.find("B")->f1, 0.8, 1e-15);
  EXPECT_NEAR(r.macro_f1, 11.0 / 15.0, 1e-15);
  EXPECT_NEAR(r.weighted_f1, 11.0 / 15.0, 1e-15);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.75);
}

TEST(Report, PerfectPredictions) {
  const auto r = classification_report(from_labels({"A", "B", "C"}, {"A", "B", "C", "C"}, {"A", "B", "C", "C"}));
  EXPECT_EQ(r.macro_f1, 1.0);
  EXPECT_EQ(r.weighted_f1, 1.0);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.f1_std_dev, 0.0);
  const auto& m = r.confusion.normalized;
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m.size(); ++j) EXPECT_EQ(m[i][j], i == j ? 1.0 : 0.0);
  }
  EXPECT_EQ(r.confusion.order.front(), "C");
}

TEST(Report, LabelsAbsentFromTruthAndPredictionAreExcluded) {
  const auto r = classification_report(from_labels({"A", "B", "Z"}, {"A", "A", "B", "B"}, {"A", "B", "B", "B"}));
  EXPECT_FALSE(r.find("Z")->included);
  EXPECT_NEAR(r.macro_f1, 11.0 / 15.0, 1e-15);
  const auto r2 = classification_report(from_labels({"A", "B"}, {"A", "A"}, {"A", "B"}));
  EXPECT_TRUE(r2.find("B")->included);
  EXPECT_TRUE(r2.find("B")->zero_division);
  EXPECT_NEAR(r2.macro_f1, (2.0 / 3.0 + 0.0) / 2.0, 1e-15);
}

TEST(Report, Errors) {
  EXPECT_THROW(classification_report(PredictionSet{{"A"}, {}}), Error);
  try {
    classification_report(from_labels({"A"}, {"X"}, {"A"}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnknownLabel);
  }
}

TEST(Confusion, SupportOrderingAndZeroRows) {
  // B has more support, all B predicted as A.
  const auto m = confusion_matrix(from_labels({"A", "B"}, {"A", "B", "B"}, {"A", "A", "A"}));
  EXPECT_EQ(m.order, (std::vector<std::string>{"B", "A"}));
  EXPECT_EQ(m.normalized[0], (std::vector<double>{0.0, 1.0}));
  const auto z = confusion_matrix(from_labels({"A", "B"}, {"A", "A"}, {"A", "B"}));
  EXPECT_EQ(z.order, (std::vector<std::string>{"A", "B"}));
  EXPECT_TRUE(z.zero_support_rows[1]);
  EXPECT_EQ(z.normalized[1], (std::vector<double>{0.0, 0.0}));
  const auto tie = confusion_matrix(from_labels({"B", "A"}, {"B", "A"}, {"B", "A"}));
  EXPECT_EQ(tie.order, (std::vector<std::string>{"A", "B"}));
}

TEST(Report, MatchesBruteForceOracle) {
  std::mt19937_64 rng(2024);
  for (int round = 0; round < 200; ++round) {
    const auto set = random_set(rng, 1 + rng() % 500, 2 + rng() % 11);
    std::vector<std::string> truth, pred;
    for (const auto& p : set.predictions) {
      truth.push_back(p.true_label);
      pred.push_back(p.predicted_label);
    }
    const auto want = oracle::tally(truth, pred);
    const auto got = classification_report(set);
    EXPECT_NEAR(got.macro_f1, want.macro_f1, 1e-9);
    EXPECT_NEAR(got.weighted_f1, want.weighted_f1, 1e-9);
    EXPECT_NEAR(got.accuracy, want.accuracy, 1e-9);
    for (const auto& [label, c] : want.per_class) {
      const auto* m = got.find(label);
      ASSERT_NE(m, nullptr);
      EXPECT_NEAR(m->precision, c.precision, 1e-9);
      EXPECT_NEAR(m->recall, c.recall, 1e-9);
      EXPECT_NEAR(m->f1, c.f1, 1e-9);
      EXPECT_EQ(m->support, c.support);
    }
    const auto& cm = got.confusion;
    for (std::size_t i = 0; i < cm.order.size(); ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < cm.order.size(); ++j) {
        EXPECT_NEAR(cm.normalized[i][j], want.normalized.at({cm.order[i], cm.order[j]}), 1e-9);
        row += cm.normalized[i][j];
      }
      if (!cm.zero_support_rows[i]) {
        EXPECT_NEAR(row, 1.0, 1e-9);
      }
    }
  }
}

TEST(Report, PermutationAndRelabelingInvariance) {
  std::mt19937_64 rng(5);
  for (int round = 0; round < 50; ++round) {
    auto set = random_set(rng, 50 + rng() % 200, 2 + rng() % 6);
    const auto base = classification_report(set);
    auto shuffled = set;
    std::shuffle(shuffled.predictions.begin(), shuffled.predictions.end(), rng);
    const auto r1 = classification_report(shuffled);
    EXPECT_NEAR(r1.macro_f1, base.macro_f1, 1e-12);
    EXPECT_NEAR(r1.weighted_f1, base.weighted_f1, 1e-12);

    auto renamed = set;
    for (auto& l : renamed.labels) l = "x" + l;
    for (auto& p : renamed.predictions) {
      p.true_label = "x" + p.true_label;
      p.predicted_label = "x" + p.predicted_label;
    }
    const auto r2 = classification_report(renamed);
    EXPECT_NEAR(r2.macro_f1, base.macro_f1, 1e-12);
    EXPECT_NEAR(r2.accuracy, base.accuracy, 1e-12);

    double lo = 1.0, hi = 0.0;
    for (const auto& c : base.per_class) {
      if (!c.included) continue;
      lo = std::min(lo, c.f1);
      hi = std::max(hi, c.f1);
    }
    EXPECT_GE(base.weighted_f1, lo - 1e-12);
    EXPECT_LE(base.weighted_f1, hi + 1e-12);
    EXPECT_GE(base.macro_f1, 0.0);
    EXPECT_LE(base.macro_f1, 1.0);
  }
}

TEST(TopK, KOneIsZeroAndConstructedHalf) {
  PredictionSet s{{"A", "B", "C", "D"}, {}};
  const std::vector<std::map<std::string, double>> scores{
      {{"A", 0.7}, {"B", 0.2}, {"C", 0.1}, {"D", 0.0}},  // truth A, top-1 hit
      {{"A", 0.5}, {"B", 0.3}, {"C", 0.2}, {"D", 0.0}},  // truth C, rank 3
      {{"B", 0.6}, {"D", 0.3}, {"A", 0.1}, {"C", 0.0}},  // truth B, top-1 hit
      {{"D", 0.4}, {"C", 0.3}, {"B", 0.3}, {"A", 0.0}},  // truth B, rank 2 (ties keep universe order)
  };
  const std::vector<std::string> truth{"A", "C", "B", "B"};
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto pred = s.labels[detail::score_argmax(scores[i], s.labels)];
    s.predictions.push_back({"e" + std::to_string(i), truth[i], pred, scores[i]});
  }
  const auto k1 = topk_analysis(s, 1);
  EXPECT_EQ(k1.improvement, 0.0);
  const auto k3 = topk_analysis(s, 3);
  EXPECT_EQ(k3.top1_accuracy, 0.5);
  EXPECT_EQ(k3.topk_accuracy, 1.0);
  EXPECT_EQ(k3.improvement, 0.5);
  EXPECT_EQ(topk_analysis(s, 2).topk_accuracy, 0.75);
  EXPECT_THROW(topk_analysis(s, 0), Error);
  s.predictions[0].scores.reset();
  try {
    topk_analysis(s, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingScores);
  }
}

TEST(Checkpoint, BothSelectionRules) {
  const std::vector<double> f1{0.4, 0.6, 0.6, 0.3, 0.5};
  EXPECT_EQ(select_checkpoint(f1, SelectionRule::MaxValidationF1), 1u);
  EXPECT_EQ(select_checkpoint(f1, SelectionRule::MinValidationF1), 3u);
  EXPECT_THROW(select_checkpoint(std::vector<double>{}, SelectionRule::MaxValidationF1), Error);
}

TEST(Summary, PopulationStd) {
  std::map<std::string, EvalReport> reports;
  reports["r1"] = classification_report(from_labels({"A", "B"}, {"A", "B"}, {"A", "B"}));
  reports["r2"] = classification_report(from_labels({"A", "B"}, {"A", "A", "B", "B"}, {"A", "B", "B", "B"}));
  const auto s = summarize_repos(reports);
  const double m = (1.0 + 11.0 / 15.0) / 2.0;
  EXPECT_NEAR(s.mean_macro_f1, m, 1e-15);
  EXPECT_NEAR(s.std_macro_f1, std::fabs(1.0 - m), 1e-15);
  ASSERT_EQ(s.labels.size(), 2u);
  EXPECT_EQ(s.labels[0].repos, 2);
}

TEST(PredictionsFile, RoundTripAndBinding) {
  const auto snap = testutil::synthetic_snapshot("r", {{"Relate", 60}, {"Block", 40}}, 100);
  const auto ds = build_dataset(snap, DatasetSpec{});
  PredictionSet set{ds.labels, {}};
  for (const auto& e : ds.examples) {
    if (e.split != Split::Test) continue;
    std::map<std::string, double> sc;
    for (const auto& l : ds.labels) sc[l] = l == e.label ? 0.8 : 0.1;
    set.predictions.push_back({e.example_id, e.label, e.label, sc});
  }
  std::stringstream buf;
  write_predictions(buf, set);
  const auto bound = bind_predictions(read_predictions(buf), ds);
  EXPECT_EQ(bound.predictions, set.predictions);
  EXPECT_EQ(classification_report(bound).macro_f1, 1.0);

  auto missing = set.predictions;
  const std::string dropped = missing.back().example_id;
  missing.pop_back();
  try {
    bind_predictions(missing, ds);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::CoverageError);
    EXPECT_NE(std::string(e.what()).find(dropped), std::string::npos);
  }

  auto dup = set.predictions;
  dup.push_back(dup.front());
  EXPECT_THROW(bind_predictions(dup, ds), Error);

  auto bad_scores = set.predictions;
  (*bad_scores[0].scores)[bad_scores[0].true_label] = 0.0;
  try {
    bind_predictions(bad_scores, ds);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SchemaError);
  }

  std::istringstream junk("{\"example_id\":\"x\"}\n");
  EXPECT_THROW(read_predictions(junk), Error);
}

TEST(ReportJson, RoundTrip) {
  std::mt19937_64 rng(1);
  const auto r = classification_report(random_set(rng, 300, 5));
  const auto back = report_from_json(to_json(r));
  EXPECT_EQ(to_json(back), to_json(r));
  EXPECT_FALSE(report_to_text(r).empty());
  EXPECT_NE(confusion_to_csv(r.confusion).find("true\\predicted"), std::string::npos);
}
