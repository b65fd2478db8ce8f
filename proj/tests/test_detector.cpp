#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "support.hpp"

using namespace wtad;
using namespace wtad::test;

namespace {

LabelSeries labels_of(std::initializer_list<char> codes) {
  LabelSeries l;
  for (char c : codes) l.labels.push_back(c == 'A' ? Label::Anomalous : Label::Normal);
  return l;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::IoFailure;
}

}  // namespace

TEST(Threshold, HandExample) {
  const std::vector<double> scores{0.1, 0.2, 0.9};
  EXPECT_DOUBLE_EQ(fit_threshold(scores, labels_of({'N', 'N', 'A'})), 0.55);
}

TEST(Threshold, CandidateSet) {
  const std::vector<double> scores{0.3, 0.1, 0.3, 0.2};
  const auto c = threshold_candidates(scores);
  ASSERT_EQ(c.size(), 4u);
  EXPECT_DOUBLE_EQ(c[0], 0.1 - 1e-9);
  EXPECT_DOUBLE_EQ(c[1], 0.15);
  EXPECT_DOUBLE_EQ(c[2], 0.25);
  EXPECT_DOUBLE_EQ(c[3], 0.3 + 1e-9);
  EXPECT_DOUBLE_EQ(threshold_margin(50.0), 5e-8);
}

TEST(Threshold, FallbackWithoutAnomalies) {
  const std::vector<double> scores{1.0, 2.0, 3.0};
  EXPECT_DOUBLE_EQ(fit_threshold(scores, labels_of({'N', 'N', 'N'})), 3.0 + 3.0 * std::sqrt(2.0 / 3.0));
  const std::vector<double> flat{0.5, 0.5, 0.5, 0.5};
  EXPECT_DOUBLE_EQ(fit_threshold(flat, labels_of({'N', 'N', 'N', 'N'})), 0.5 + 3e-9);
}

TEST(Threshold, AllAnomalousDetectsEverything) {
  const std::vector<double> scores{0.4, 0.2, 0.7};
  const double thr = fit_threshold(scores, labels_of({'A', 'A', 'A'}));
  for (bool d : detect(scores, thr)) EXPECT_TRUE(d);
}

TEST(Threshold, Errors) {
  const std::vector<double> none;
  EXPECT_EQ(kind_of([&] { fit_threshold(none, LabelSeries{}); }), ErrorKind::EmptyInput);
  const std::vector<double> two{1.0, 2.0};
  EXPECT_EQ(kind_of([&] { fit_threshold(two, labels_of({'A'})); }), ErrorKind::LengthMismatch);
}

TEST(Threshold, MatchesExhaustiveSearchIncludingTies) {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(120);
    // Coarse rounding produces many repeated scores and tied F values.
    std::vector<double> scores(n);
    LabelSeries labels;
    for (auto& s : scores) s = std::round(rng.uniform(0.0, 2.0) * 8.0) / 8.0;
    for (std::size_t i = 0; i < n; ++i) labels.labels.push_back(rng.uniform() < 0.3 ? Label::Anomalous : Label::Normal);
    const double thr = fit_threshold(scores, labels);
    if (labels.count(Label::Anomalous) == 0) continue;
    const auto ex = oracle::exhaustive_threshold(scores, labels);
    EXPECT_EQ(oracle::compare_f_half(oracle::counts_at(scores, labels, thr), ex.best), 0) << "trial " << trial;
    EXPECT_EQ(thr, ex.largest_best_threshold) << "trial " << trial;
  }
}

TEST(Detect, StrictInequalityAndMonotone) {
  const std::vector<double> scores{0.5, 0.5000001, 0.4999999};
  EXPECT_EQ(detect(scores, 0.5), (std::vector<bool>{false, true, false}));
  Rng rng(4);
  std::vector<double> s(200);
  for (auto& x : s) x = rng.uniform();
  const auto lo = detect(s, 0.3), hi = detect(s, 0.6);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_TRUE(!hi[i] || lo[i]);
}

TEST(Scores, RowRmse) {
  Network net;
  DenseLayer enc, dec;
  enc.weights = Matrix(1, 2);
  enc.biases = {0.0};
  enc.prelu_slope = 0.25;
  dec.weights = Matrix(2, 1);
  dec.biases = {0.0, 0.0};
  net.layers = {enc, dec};
  net.encoder_len = 1;
  const auto s = reconstruction_rmse(net, Matrix(2, 2, std::vector<double>{5, 0, 3, 4}), 1);
  EXPECT_DOUBLE_EQ(s[0], std::sqrt(12.5));
  EXPECT_DOUBLE_EQ(s[1], std::sqrt(12.5));
}

TEST(Baseline, TrainedModelIsConsistent) {
  const auto& fx = fixture();
  const auto& m = fx.model;
  EXPECT_NO_THROW(validate(m));
  EXPECT_EQ(m.network.hidden_sizes(), (std::vector<std::size_t>{8, 4, 8}));
  EXPECT_EQ(m.metadata.loss_history.size(), 4u);
  EXPECT_LT(m.metadata.loss_history.back(), m.metadata.loss_history.front());
  EXPECT_GE(m.threshold, 0.0);
  EXPECT_EQ(m.metadata.source_turbines, (std::vector<std::string>{"T01"}));
  EXPECT_EQ(m.metadata.training_start, format_instant(fx.train.timestamps().front()));
  EXPECT_EQ(m.metadata.training_end, format_instant(fx.train.timestamps().back() + kSampleInterval));
  // The stored threshold is the best one for the training window.
  const auto scores = anomaly_scores(m, fx.train);
  const auto ex = oracle::exhaustive_threshold(scores, fx.train_labels);
  EXPECT_EQ(oracle::compare_f_half(oracle::counts_at(scores, fx.train_labels, m.threshold), ex.best), 0);
}

TEST(Baseline, DeterministicForSeed) {
  const auto& fx = fixture();
  const auto again = train_baseline(fx.train, fx.train_labels, fx.farm.schema, quick_config(), "T01");
  EXPECT_TRUE(again.network.same_parameters(fx.model.network));
  EXPECT_EQ(again.threshold, fx.model.threshold);
}

TEST(MultiAsset, PoolsTurbines) {
  const auto& fx = fixture();
  const auto& f2 = fx.farm.frames[1];
  const auto train2 = slice_period(f2, fx.train.timestamps().front(), fx.train.timestamps().back() + kSampleInterval);
  const std::vector<LabeledFrame> sources{{fx.train, fx.train_labels, "T01"},
                                          {train2, derive_labels(train2, fx.farm.configs[1]), "T02"}};
  const auto m = train_multi_asset(sources, fx.farm.schema, quick_config());
  EXPECT_EQ(m.metadata.source_turbines, (std::vector<std::string>{"T01", "T02"}));
  const std::vector<ScadaFrame> normal{select_normal(sources[0].frame, sources[0].labels),
                                       select_normal(sources[1].frame, sources[1].labels)};
  EXPECT_EQ(m.pipeline, fit_pipeline(std::span<const ScadaFrame>(normal), fx.farm.schema));
  EXPECT_EQ(kind_of([&] { train_multi_asset(std::span(sources).first(1), fx.farm.schema, quick_config()); }),
            ErrorKind::EmptyResult);
}

TEST(MultiAsset, DuplicatedTurbineKeepsPipeline) {
  const auto& fx = fixture();
  const std::vector<LabeledFrame> twice{{fx.train, fx.train_labels, "A"}, {fx.train, fx.train_labels, "B"}};
  const auto m = train_multi_asset(twice, fx.farm.schema, quick_config());
  EXPECT_EQ(m.pipeline, fx.model.pipeline);
}

TEST(MultiAsset, RejectsDifferentColumns) {
  const auto& fx = fixture();
  const auto schema = basic_schema({col("temp")});
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 50; ++i) rows.push_back({100.0 + i, 5.0 + 0.1 * i, 40.0 + 0.2 * i});
  const auto other = make_frame(schema, rows);
  const std::vector<LabeledFrame> sources{{fx.train, fx.train_labels, "T01"},
                                          {other, LabelSeries{std::vector<Label>(50, Label::Normal)}, "X"}};
  EXPECT_EQ(kind_of([&] { train_multi_asset(sources, fx.farm.schema, quick_config()); }), ErrorKind::SchemaMismatch);
}

TEST(Artifact, SaveLoadReproducesScores) {
  const auto& fx = fixture();
  const auto path = (temp_dir("artifact") / "model.json").string();
  save_model(fx.model, path);
  const auto back = load_model(path);
  EXPECT_EQ(anomaly_scores(back, fx.tail), anomaly_scores(fx.model, fx.tail));
  EXPECT_EQ(back.threshold, fx.model.threshold);
  EXPECT_EQ(back.metadata, fx.model.metadata);
  EXPECT_EQ(to_json(back), to_json(fx.model));
}

TEST(Artifact, BadFilesRejected) {
  const auto& fx = fixture();
  const auto dir = temp_dir("bad_artifact");
  const auto text = to_json(fx.model).dump();
  {
    std::ofstream(dir / "truncated.json") << text.substr(0, text.size() / 2);
    auto j = to_json(fx.model);
    j["format_version"] = 999;
    std::ofstream(dir / "future.json") << j.dump();
    j = to_json(fx.model);
    j["threshold"] = -1.0;
    std::ofstream(dir / "negative.json") << j.dump();
    j = to_json(fx.model);
    j["pipeline"]["feature_names"].erase(0);
    std::ofstream(dir / "shape.json") << j.dump();
  }
  for (const char* name : {"truncated.json", "future.json", "negative.json", "shape.json"})
    EXPECT_EQ(kind_of([&] { load_model((dir / name).string()); }), ErrorKind::BadArtifact) << name;
  EXPECT_EQ(kind_of([&] { load_model((dir / "missing.json").string()); }), ErrorKind::IoFailure);
}

TEST(TrainConfigJson, RoundTrip) {
  TrainConfig c;
  c.hidden_sizes = {12, 6, 12};
  c.learning_rate = 3e-4;
  c.seed = 77;
  c.high_power_fraction = 0.4;
  EXPECT_EQ(train_config_from_json(to_json(c)), c);
}
