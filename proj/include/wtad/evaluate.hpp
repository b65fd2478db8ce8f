#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wtad/detector.hpp"
#include "wtad/error.hpp"
#include "wtad/ingest.hpp"

namespace wtad {

/// Anomalous is the positive class.
struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

inline ConfusionCounts confusion(const std::vector<bool>& detections, const LabelSeries& labels) {
  if (detections.size() != labels.size()) throw Error(ErrorKind::LengthMismatch, "detections and labels differ");
  ConfusionCounts c;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const bool pos = labels.anomalous(i);
    if (detections[i])
      ++(pos ? c.tp : c.fp);
    else
      ++(pos ? c.fn : c.tn);
  }
  return c;
}

inline double precision(const ConfusionCounts& c) {
  return c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
}

inline double recall(const ConfusionCounts& c) {
  return c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

/// F_beta = (1 + b^2) P R / (b^2 P + R); zero whenever tp is zero.
inline double f_beta(const ConfusionCounts& c, double beta) {
  if (!(beta > 0.0)) throw Error(ErrorKind::BadSpec, "beta must be positive");
  if (c.tp == 0) return 0.0;
  const double p = precision(c), r = recall(c), b2 = beta * beta;
  return (1.0 + b2) * p * r / (b2 * p + r);
}

struct MonthEvaluation {
  ConfusionCounts counts;
  double f_half = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

inline MonthEvaluation evaluate_detections(const std::vector<bool>& detections, const LabelSeries& labels) {
  MonthEvaluation e;
  e.counts = confusion(detections, labels);
  e.f_half = f_beta(e.counts, 0.5);
  e.precision = precision(e.counts);
  e.recall = recall(e.counts);
  return e;
}

/// Scores a model on an evaluation window (normally the month right after
/// its training or tuning data) against labels derived from `config`.
inline MonthEvaluation evaluate_month(const DetectorModel& model, const ScadaFrame& frame, const TurbineConfig& config) {
  if (frame.empty()) throw Error(ErrorKind::EmptyResult, "evaluation frame is empty");
  return evaluate_detections(detect(model, frame), derive_labels(frame, config));
}

inline constexpr int kCriticalityMax = 1000;

/// Criticality per timestamp, starting from 0: +1 for a detection during
/// normal operation, -1 for no detection during normal operation, unchanged
/// otherwise; clamped to [0, 1000] after each step.
struct CriticalityTrace {
  std::vector<int> values;

  int max() const { return values.empty() ? 0 : *std::max_element(values.begin(), values.end()); }
};

inline CriticalityTrace criticality(const std::vector<bool>& detections, const std::vector<std::string>& op_modes,
                                    int initial = 0) {
  if (detections.size() != op_modes.size())
    throw Error(ErrorKind::LengthMismatch, "detections and op-modes differ in length");
  CriticalityTrace trace;
  trace.values.reserve(detections.size());
  int c = std::clamp(initial, 0, kCriticalityMax);
  for (std::size_t i = 0; i < detections.size(); ++i) {
    if (op_modes[i] == kNormalOperation) c = std::clamp(c + (detections[i] ? 1 : -1), 0, kCriticalityMax);
    trace.values.push_back(c);
  }
  return trace;
}

struct NamedModel {
  std::string id;
  DetectorModel model;
};

struct ComparisonRow {
  std::string model_id;
  double f_half = 0.0;
  double delta_f_half = 0.0;
  double precision = 0.0;
  double recall = 0.0;

  bool operator==(const ComparisonRow&) const = default;
};

struct ComparisonReport {
  std::string baseline_id;
  std::vector<ComparisonRow> rows;

  bool operator==(const ComparisonReport&) const = default;
};

/// F_{1/2} of every model on the same window and its difference to the
/// baseline model's F_{1/2}.
inline ComparisonReport compare_models(std::span<const NamedModel> models, const std::string& baseline_id,
                                       const ScadaFrame& eval_frame, const TurbineConfig& config) {
  if (models.empty()) throw Error(ErrorKind::EmptyResult, "no models to compare");
  if (eval_frame.empty()) throw Error(ErrorKind::EmptyResult, "evaluation frame is empty");
  const auto base = std::find_if(models.begin(), models.end(), [&](const NamedModel& m) { return m.id == baseline_id; });
  if (base == models.end()) throw Error(ErrorKind::EmptyResult, "baseline '" + baseline_id + "' not among models");

  const auto labels = derive_labels(eval_frame, config);
  ComparisonReport report;
  report.baseline_id = baseline_id;
  std::vector<MonthEvaluation> evals;
  for (const auto& m : models) evals.push_back(evaluate_detections(detect(m.model, eval_frame), labels));
  const double base_f = evals[static_cast<std::size_t>(base - models.begin())].f_half;
  for (std::size_t i = 0; i < models.size(); ++i)
    report.rows.push_back({models[i].id, evals[i].f_half, evals[i].f_half - base_f, evals[i].precision, evals[i].recall});
  return report;
}

inline nlohmann::json to_json(const ComparisonReport& r) {
  auto rows = nlohmann::json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"model_id", row.model_id},
                    {"f_half", row.f_half},
                    {"delta_f_half", row.delta_f_half},
                    {"precision", row.precision},
                    {"recall", row.recall}});
  return {{"baseline_id", r.baseline_id}, {"rows", std::move(rows)}};
}

inline ComparisonReport comparison_from_json(const nlohmann::json& j) {
  ComparisonReport r;
  r.baseline_id = j.at("baseline_id").get<std::string>();
  for (const auto& row : j.at("rows"))
    r.rows.push_back({row.at("model_id").get<std::string>(), row.at("f_half").get<double>(),
                      row.at("delta_f_half").get<double>(), row.at("precision").get<double>(),
                      row.at("recall").get<double>()});
  return r;
}

inline void write_comparison_csv(std::ostream& out, const ComparisonReport& r) {
  out << "model_id,f_half,delta_f_half,precision,recall,baseline_id\n";
  for (const auto& row : r.rows)
    out << detail::quote_csv(row.model_id) << ',' << detail::format_double(row.f_half) << ','
        << detail::format_double(row.delta_f_half) << ',' << detail::format_double(row.precision) << ','
        << detail::format_double(row.recall) << ',' << detail::quote_csv(r.baseline_id) << '\n';
}

inline ComparisonReport read_comparison_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::EmptyFile, "comparison CSV has no header");
  ComparisonReport r;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 6) throw Error(ErrorKind::BadValue, "comparison CSV line " + std::to_string(line_no));
    r.rows.push_back({f[0], detail::parse_cell(f[1], line_no), detail::parse_cell(f[2], line_no),
                      detail::parse_cell(f[3], line_no), detail::parse_cell(f[4], line_no)});
    r.baseline_id = f[5];
  }
  return r;
}

struct CaseStudyRow {
  Instant timestamp;
  double score = 0.0;
  double threshold = 0.0;
  bool detected = false;
  std::string op_mode;
  int criticality = 0;
};

/// Plot-ready per-timestamp trace of score, threshold, detection and criticality.
inline std::vector<CaseStudyRow> case_study_report(const DetectorModel& model, const ScadaFrame& frame) {
  const auto scores = anomaly_scores(model, frame);
  const auto detections = detect(scores, model.threshold);
  const auto crit = criticality(detections, frame.op_modes());
  std::vector<CaseStudyRow> rows(frame.rows());
  for (std::size_t i = 0; i < frame.rows(); ++i)
    rows[i] = {frame.timestamps()[i], scores[i], model.threshold, detections[i], frame.op_modes()[i], crit.values[i]};
  return rows;
}

inline void write_case_study_csv(std::ostream& out, const std::vector<CaseStudyRow>& rows) {
  out << "timestamp,score,threshold,detected,op_mode,criticality\n";
  for (const auto& r : rows)
    out << format_instant(r.timestamp) << ',' << detail::format_double(r.score) << ','
        << detail::format_double(r.threshold) << ',' << (r.detected ? 1 : 0) << ',' << detail::quote_csv(r.op_mode)
        << ',' << r.criticality << '\n';
}

}  // namespace wtad
