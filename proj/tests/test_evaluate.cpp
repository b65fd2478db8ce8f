#include <gtest/gtest.h>

#include <sstream>

#include "oracles.hpp"
#include "support.hpp"

using namespace wtad;
using namespace wtad::test;

namespace {

const std::string kNormal(kNormalOperation);

}  // namespace

TEST(Metrics, FBetaHandValues) {
  const ConfusionCounts c{4, 1, 0, 6};
  EXPECT_DOUBLE_EQ(precision(c), 0.8);
  EXPECT_DOUBLE_EQ(recall(c), 0.4);
  EXPECT_NEAR(f_beta(c, 0.5), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(f_beta(c, 1.0), 0.8 * 0.4 * 2.0 / 1.2, 1e-12);
  EXPECT_EQ(f_beta(ConfusionCounts{0, 3, 4, 5}, 0.5), 0.0);
  EXPECT_THROW(f_beta(c, 0.0), Error);
}

TEST(Metrics, ConfusionCounts) {
  const std::vector<bool> det{true, true, false, false, true};
  const LabelSeries labels{{Label::Anomalous, Label::Normal, Label::Anomalous, Label::Normal, Label::Anomalous}};
  EXPECT_EQ(confusion(det, labels), (ConfusionCounts{2, 1, 1, 1}));
  EXPECT_THROW(confusion({true}, labels), Error);
}

TEST(Criticality, HandCases) {
  const std::string s = "service";
  EXPECT_EQ(criticality({true, true, false, true}, {kNormal, kNormal, kNormal, kNormal}).values,
            (std::vector<int>{1, 2, 1, 2}));
  EXPECT_EQ(criticality({false, false}, {kNormal, kNormal}).values, (std::vector<int>{0, 0}));
  EXPECT_EQ(criticality({true, true, false, true}, {kNormal, s, s, kNormal}).values, (std::vector<int>{1, 1, 1, 2}));
  EXPECT_THROW(criticality({true}, {}), Error);
}

TEST(Criticality, CapsAtOneThousand) {
  const auto t = criticality(std::vector<bool>(1001, true), std::vector<std::string>(1001, kNormal));
  EXPECT_EQ(t.values[999], 1000);
  EXPECT_EQ(t.values[1000], 1000);
  EXPECT_EQ(t.max(), 1000);
}

TEST(Criticality, MatchesStepSimulation) {
  Rng rng(31);
  const std::vector<std::string> modes{kNormal, "service", "downtime"};
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = rng.below(3000);
    // Long runs of one outcome push the value against both clamps.
    std::vector<bool> det(n);
    std::vector<std::string> op(n);
    bool cur = rng.uniform() < 0.5;
    for (std::size_t i = 0; i < n; ++i) {
      if (rng.uniform() < 0.002) cur = !cur;
      det[i] = rng.uniform() < (cur ? 0.95 : 0.05);
      op[i] = modes[rng.uniform() < 0.9 ? 0 : 1 + rng.below(2)];
    }
    EXPECT_EQ(criticality(det, op).values, oracle::criticality(det, op)) << "trial " << trial;
  }
}

TEST(Comparison, BaselineDeltaIsZero) {
  const auto& fx = fixture();
  const std::vector<NamedModel> models{{"base", fx.model}, {"copy", fx.model}};
  const auto r = compare_models(models, "base", fx.tail, fx.farm.configs[0]);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.baseline_id, "base");
  EXPECT_EQ(r.rows[0].delta_f_half, 0.0);
  EXPECT_EQ(r.rows[1].delta_f_half, 0.0);
  const auto e = evaluate_month(fx.model, fx.tail, fx.farm.configs[0]);
  EXPECT_EQ(r.rows[0].f_half, e.f_half);
  EXPECT_EQ(e.counts.total(), fx.tail.rows());
  EXPECT_THROW(compare_models(models, "missing", fx.tail, fx.farm.configs[0]), Error);
}

TEST(Comparison, DeltaAgainstBaseline) {
  const auto& fx = fixture();
  auto strict = fx.model;
  strict.threshold *= 2.0;
  const std::vector<NamedModel> models{{"a", fx.model}, {"b", strict}};
  const auto r = compare_models(models, "b", fx.tail, fx.farm.configs[0]);
  EXPECT_DOUBLE_EQ(r.rows[0].delta_f_half, r.rows[0].f_half - r.rows[1].f_half);
}

TEST(Comparison, JsonAndCsvRoundTrip) {
  ComparisonReport r{"base", {{"base", 0.9, 0.0, 0.95, 0.8}, {"tl, 1m", 1.0 / 3.0, 1.0 / 3.0 - 0.9, 0.5, 0.25}}};
  EXPECT_EQ(comparison_from_json(to_json(r)), r);
  std::stringstream buf;
  write_comparison_csv(buf, r);
  EXPECT_EQ(buf.str().substr(0, buf.str().find('\n')), "model_id,f_half,delta_f_half,precision,recall,baseline_id");
  EXPECT_EQ(read_comparison_csv(buf), r);
}

TEST(CaseStudy, RowsMatchScoresAndCriticality) {
  const auto& fx = fixture();
  const auto rows = case_study_report(fx.model, fx.tail);
  const auto scores = anomaly_scores(fx.model, fx.tail);
  const auto crit = oracle::criticality(detect(scores, fx.model.threshold), fx.tail.op_modes());
  ASSERT_EQ(rows.size(), fx.tail.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].score, scores[i]);
    EXPECT_EQ(rows[i].detected, scores[i] > fx.model.threshold);
    EXPECT_EQ(rows[i].criticality, crit[i]);
    EXPECT_EQ(rows[i].timestamp, fx.tail.timestamps()[i]);
  }
  std::stringstream buf;
  write_case_study_csv(buf, rows);
  std::string header;
  std::getline(buf, header);
  EXPECT_EQ(header, "timestamp,score,threshold,detected,op_mode,criticality");
}
