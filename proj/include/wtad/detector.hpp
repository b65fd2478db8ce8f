#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wtad/error.hpp"
#include "wtad/ingest.hpp"
#include "wtad/neural.hpp"
#include "wtad/preprocess.hpp"

namespace wtad {

inline constexpr int kArtifactVersion = 1;

struct TrainConfig {
  std::vector<std::size_t> hidden_sizes{25, 10, 25};
  double learning_rate = 0.001;
  std::size_t epochs = 50;
  std::size_t batch_size = 256;
  std::uint64_t seed = 0;
  double high_power_fraction = 0.5;

  bool operator==(const TrainConfig&) const = default;
};

inline void validate(const TrainConfig& c) {
  if (!(c.learning_rate > 0.0)) throw Error(ErrorKind::BadSpec, "learning rate must be positive");
  if (c.epochs < 1) throw Error(ErrorKind::BadSpec, "epochs must be at least 1");
  if (c.batch_size < 1) throw Error(ErrorKind::BadSpec, "batch size must be at least 1");
}

/// One transfer step applied to a model.
struct LineageEntry {
  std::string method;
  std::string target_turbine;
  std::size_t epochs = 0;
  double learning_rate = 0.0;
  std::uint64_t seed = 0;
  std::string tuning_start;
  std::string tuning_end;
  double tuning_mse_before = 0.0;
  double tuning_mse_after = 0.0;

  bool operator==(const LineageEntry&) const = default;
};

struct ModelMetadata {
  std::vector<std::string> source_turbines;
  std::string training_start;
  std::string training_end;
  TrainConfig config;
  std::vector<double> loss_history;
  std::vector<LineageEntry> lineage;

  bool operator==(const ModelMetadata&) const = default;
};

/// Preprocessing + autoencoder + decision threshold on the anomaly score.
struct DetectorModel {
  FeaturePipeline pipeline;
  Network network;
  double threshold = 0.0;
  ModelMetadata metadata;
};

inline void validate(const DetectorModel& m) {
  validate(m.network);
  if (m.network.input_dim() != m.pipeline.feature_count() || m.network.output_dim() != m.pipeline.feature_count())
    throw Error(ErrorKind::ShapeMismatch, "network dimensions do not match pipeline feature count");
  if (!std::isfinite(m.threshold) || m.threshold < 0.0)
    throw Error(ErrorKind::BadArtifact, "threshold must be finite and non-negative");
}

inline Matrix to_matrix(FeatureMatrix fm) {
  const auto r = fm.rows(), c = fm.cols();
  return Matrix(r, c, std::move(fm.values));
}

/// Per-row RMSE between `inputs` and their reconstruction.
inline std::vector<double> reconstruction_rmse(const Network& net, const Matrix& inputs, std::size_t chunk = 4096) {
  std::vector<double> scores(inputs.rows);
  ForwardTrace trace;
  Matrix part;
  for (std::size_t start = 0; start < inputs.rows; start += chunk) {
    const std::size_t count = std::min(chunk, inputs.rows - start);
    part = Matrix(count, inputs.cols,
                  std::vector<double>(inputs.data.begin() + static_cast<std::ptrdiff_t>(start * inputs.cols),
                                      inputs.data.begin() + static_cast<std::ptrdiff_t>((start + count) * inputs.cols)));
    forward_trace(net, part, trace);
    const Matrix& rec = trace.post.back();
    for (std::size_t b = 0; b < count; ++b) {
      double sum = 0.0;
      for (std::size_t j = 0; j < inputs.cols; ++j) {
        const double d = part(b, j) - rec(b, j);
        sum += d * d;
      }
      scores[start + b] = std::sqrt(sum / static_cast<double>(inputs.cols));
    }
  }
  return scores;
}

/// Anomaly score per timestamp: RMSE of the reconstruction in scaled feature space.
inline std::vector<double> anomaly_scores(const DetectorModel& model, const ScadaFrame& frame) {
  return reconstruction_rmse(model.network, to_matrix(apply_pipeline(model.pipeline, frame)));
}

namespace detail {

/// F_{1/2} = 5 tp / (5 tp + 4 fp + fn) as an exact fraction, for tie-exact comparison.
struct FHalfFraction {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  bool operator>(const FHalfFraction& o) const { return num * o.den > o.num * den; }
  bool operator==(const FHalfFraction& o) const { return num * o.den == o.num * den; }
};

inline FHalfFraction f_half_fraction(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
  if (tp == 0) return {0, 1};
  return {5 * tp, 5 * tp + 4 * fp + fn};
}

inline double population_stddev(std::span<const double> xs) {
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size()));
}

}  // namespace detail

/// Margin used for the all-detected and none-detected candidates.
inline double threshold_margin(double max_score) { return 1e-9 * std::max(1.0, std::abs(max_score)); }

/// Candidate thresholds: midpoints between consecutive distinct scores plus
/// one just below the minimum and one just above the maximum (ascending).
inline std::vector<double> threshold_candidates(std::span<const double> scores) {
  if (scores.empty()) throw Error(ErrorKind::EmptyInput, "no scores");
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  const double delta = threshold_margin(sorted.back());
  std::vector<double> out{sorted.front() - delta};
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i) out.push_back(sorted[i] + (sorted[i + 1] - sorted[i]) / 2.0);
  out.push_back(sorted.back() + delta);
  return out;
}

/// Threshold maximizing F_{1/2} for detection rule `score > threshold`, with
/// anomalous as the positive class. Ties go to the largest threshold. With no
/// anomalous labels the result is max + 3 sigma (sigma replaced by the margin
/// when zero).
inline double fit_threshold(std::span<const double> scores, const LabelSeries& labels) {
  if (scores.empty()) throw Error(ErrorKind::EmptyInput, "no scores");
  if (labels.size() != scores.size()) throw Error(ErrorKind::LengthMismatch, "scores and labels differ in length");
  for (double s : scores)
    if (!std::isfinite(s)) throw Error(ErrorKind::BadValue, "non-finite score");

  const double max_score = *std::max_element(scores.begin(), scores.end());
  const std::size_t positives = labels.count(Label::Anomalous);
  if (positives == 0) {
    double sigma = detail::population_stddev(scores);
    if (sigma == 0.0) sigma = threshold_margin(max_score);
    return std::max(0.0, max_score + 3.0 * sigma);
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sweep thresholds from high to low: everything above the cut is detected.
  const auto candidates = threshold_candidates(scores);
  std::uint64_t tp = 0, fp = 0;
  const auto total_pos = static_cast<std::uint64_t>(positives);
  double best_threshold = candidates.back();
  detail::FHalfFraction best = detail::f_half_fraction(0, 0, total_pos);
  std::size_t next = order.size();  // rows [next, n) in sorted order are detected
  for (std::size_t c = candidates.size(); c-- > 0;) {
    const double thr = candidates[c];
    while (next > 0 && scores[order[next - 1]] > thr) {
      --next;
      if (labels.anomalous(order[next]))
        ++tp;
      else
        ++fp;
    }
    const auto f = detail::f_half_fraction(tp, fp, total_pos - tp);
    if (f > best) {
      best = f;
      best_threshold = thr;
    }
  }
  return best_threshold;
}

inline std::vector<bool> detect(std::span<const double> scores, double threshold) {
  std::vector<bool> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] > threshold;
  return out;
}

inline std::vector<bool> detect(const DetectorModel& model, const ScadaFrame& frame) {
  return detect(anomaly_scores(model, frame), model.threshold);
}

/// One turbine's training window with labels aligned to it.
struct LabeledFrame {
  ScadaFrame frame;
  LabelSeries labels;
  std::string turbine_id;
};

/// Trains on the pooled normal rows of one or more turbines: pipeline and
/// autoencoder see only normal rows, the threshold is fitted on every row.
inline DetectorModel train_pooled(std::span<const LabeledFrame> sources, const Schema& schema, const TrainConfig& config) {
  validate(config);
  if (sources.empty()) throw Error(ErrorKind::EmptyResult, "no training data");
  for (const auto& s : sources) {
    if (s.frame.columns() != sources.front().frame.columns())
      throw Error(ErrorKind::SchemaMismatch, "turbine " + s.turbine_id + " has different sensor columns");
    if (s.labels.size() != s.frame.rows()) throw Error(ErrorKind::LengthMismatch, "labels not aligned to frame");
  }

  std::vector<ScadaFrame> normal;
  normal.reserve(sources.size());
  for (const auto& s : sources) normal.push_back(select_normal(s.frame, s.labels));

  DetectorModel model;
  model.pipeline = fit_pipeline(std::span<const ScadaFrame>(normal), schema);
  const auto n_features = model.pipeline.feature_count();

  Matrix train_data(0, n_features);
  for (const auto& f : normal) {
    auto fm = apply_pipeline(model.pipeline, f);
    train_data.data.insert(train_data.data.end(), fm.values.begin(), fm.values.end());
    train_data.rows += fm.rows();
  }

  model.network = build_network(n_features, config.hidden_sizes, derive_seed(config.seed, 1));
  model.metadata.loss_history = train_autoencoder(
      model.network, train_data,
      TrainOptions{config.epochs, config.batch_size, config.learning_rate, derive_seed(config.seed, 2)});

  std::vector<double> all_scores;
  LabelSeries all_labels;
  for (const auto& s : sources) {
    auto sc = anomaly_scores(model, s.frame);
    all_scores.insert(all_scores.end(), sc.begin(), sc.end());
    all_labels.labels.insert(all_labels.labels.end(), s.labels.labels.begin(), s.labels.labels.end());
  }
  // Scores are non-negative; only the below-minimum candidate can dip under zero.
  model.threshold = std::max(0.0, fit_threshold(all_scores, all_labels));

  for (const auto& s : sources) model.metadata.source_turbines.push_back(s.turbine_id);
  Instant first = sources.front().frame.timestamps().front(), last = sources.front().frame.timestamps().back();
  for (const auto& s : sources) {
    first = std::min(first, s.frame.timestamps().front());
    last = std::max(last, s.frame.timestamps().back());
  }
  model.metadata.training_start = format_instant(first);
  model.metadata.training_end = format_instant(last + kSampleInterval);
  model.metadata.config = config;
  return model;
}

inline DetectorModel train_baseline(const ScadaFrame& frame, const LabelSeries& labels, const Schema& schema,
                                    const TrainConfig& config, const std::string& turbine_id = "") {
  if (frame.empty()) throw Error(ErrorKind::EmptyResult, "training frame is empty");
  const LabeledFrame src{frame, labels, turbine_id};
  return train_pooled(std::span<const LabeledFrame>(&src, 1), schema, config);
}

inline DetectorModel train_multi_asset(std::span<const LabeledFrame> sources, const Schema& schema,
                                       const TrainConfig& config) {
  if (sources.size() < 2) throw Error(ErrorKind::EmptyResult, "multi-asset training needs at least two turbines");
  for (const auto& s : sources)
    if (s.frame.empty()) throw Error(ErrorKind::EmptyResult, "turbine " + s.turbine_id + " has no rows");
  return train_pooled(sources, schema, config);
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"hidden_sizes", c.hidden_sizes}, {"learning_rate", c.learning_rate}, {"epochs", c.epochs},
          {"batch_size", c.batch_size},     {"seed", c.seed},                   {"high_power_fraction", c.high_power_fraction}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.hidden_sizes = j.value("hidden_sizes", c.hidden_sizes);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.high_power_fraction = j.value("high_power_fraction", c.high_power_fraction);
  return c;
}

inline nlohmann::json to_json(const LineageEntry& e) {
  return {{"method", e.method},
          {"target_turbine", e.target_turbine},
          {"epochs", e.epochs},
          {"learning_rate", e.learning_rate},
          {"seed", e.seed},
          {"tuning_start", e.tuning_start},
          {"tuning_end", e.tuning_end},
          {"tuning_mse_before", e.tuning_mse_before},
          {"tuning_mse_after", e.tuning_mse_after}};
}

inline LineageEntry lineage_from_json(const nlohmann::json& j) {
  LineageEntry e;
  e.method = j.at("method").get<std::string>();
  e.target_turbine = j.value("target_turbine", std::string{});
  e.epochs = j.value("epochs", std::size_t{0});
  e.learning_rate = j.value("learning_rate", 0.0);
  e.seed = j.value("seed", std::uint64_t{0});
  e.tuning_start = j.value("tuning_start", std::string{});
  e.tuning_end = j.value("tuning_end", std::string{});
  e.tuning_mse_before = j.value("tuning_mse_before", 0.0);
  e.tuning_mse_after = j.value("tuning_mse_after", 0.0);
  return e;
}

inline nlohmann::json to_json(const DetectorModel& m) {
  auto lineage = nlohmann::json::array();
  for (const auto& e : m.metadata.lineage) lineage.push_back(to_json(e));
  nlohmann::json meta{{"source_turbines", m.metadata.source_turbines},
                      {"training_start", m.metadata.training_start},
                      {"training_end", m.metadata.training_end},
                      {"config", to_json(m.metadata.config)},
                      {"loss_history", m.metadata.loss_history},
                      {"lineage", std::move(lineage)}};
  return {{"format_version", kArtifactVersion},
          {"metadata", std::move(meta)},
          {"pipeline", to_json(m.pipeline)},
          {"network", to_json(m.network)},
          {"threshold", m.threshold}};
}

inline DetectorModel model_from_json(const nlohmann::json& j) {
  DetectorModel m;
  try {
    if (!j.is_object()) throw Error(ErrorKind::BadArtifact, "artifact must be a JSON object");
    const int version = j.at("format_version").get<int>();
    if (version != kArtifactVersion)
      throw Error(ErrorKind::BadArtifact, "unsupported format_version " + std::to_string(version));
    m.pipeline = pipeline_from_json(j.at("pipeline"));
    m.network = network_from_json(j.at("network"));
    m.threshold = j.at("threshold").get<double>();
    const auto& meta = j.at("metadata");
    m.metadata.source_turbines = meta.value("source_turbines", std::vector<std::string>{});
    m.metadata.training_start = meta.value("training_start", std::string{});
    m.metadata.training_end = meta.value("training_end", std::string{});
    if (meta.contains("config")) m.metadata.config = train_config_from_json(meta.at("config"));
    m.metadata.loss_history = meta.value("loss_history", std::vector<double>{});
    if (meta.contains("lineage"))
      for (const auto& e : meta.at("lineage")) m.metadata.lineage.push_back(lineage_from_json(e));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::BadArtifact, e.what());
  }
  try {
    validate(m);
  } catch (const Error& e) {
    throw Error(ErrorKind::BadArtifact, e.what());
  }
  return m;
}

inline void save_model(const DetectorModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path);
  out << to_json(model).dump(1) << '\n';
  if (!out) throw Error(ErrorKind::IoFailure, "write failed for " + path);
}

inline DetectorModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::BadArtifact, std::string("unparseable artifact: ") + e.what());
  }
  return model_from_json(j);
}

}  // namespace wtad
