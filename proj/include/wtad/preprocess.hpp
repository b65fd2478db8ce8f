#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "wtad/error.hpp"
#include "wtad/ingest.hpp"

namespace wtad {

/// Pruning thresholds. A column survives only with more than
/// `max_unique_to_drop` distinct values and a zero share of at most
/// `max_zero_fraction`.
struct PruningRules {
  std::size_t max_unique_to_drop = 3;
  double max_zero_fraction = 0.8;
};

/// Fitted transform from raw SCADA columns to the autoencoder's input space.
struct FeaturePipeline {
  std::vector<std::string> kept_columns;
  std::vector<std::string> angle_columns;
  std::vector<std::string> angle_units;  // parallel to angle_columns: "deg" or "rad"
  std::vector<std::string> feature_names;
  std::vector<double> min_vals;
  std::vector<double> max_vals;

  std::size_t feature_count() const noexcept { return feature_names.size(); }

  bool is_angle(const std::string& column) const {
    return std::find(angle_columns.begin(), angle_columns.end(), column) != angle_columns.end();
  }

  bool operator==(const FeaturePipeline&) const = default;
};

/// Row-major [rows x features] matrix in pipeline feature order.
struct FeatureMatrix {
  std::vector<double> values;
  std::vector<std::string> feature_names;
  std::vector<Instant> timestamps;

  std::size_t rows() const noexcept { return timestamps.size(); }
  std::size_t cols() const noexcept { return feature_names.size(); }
  double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }
};

namespace detail {

inline bool is_radian_unit(const std::string& unit) {
  return unit == "rad" || unit == "radian" || unit == "radians";
}

struct ColumnStats {
  std::size_t count = 0;
  std::size_t zeros = 0;
  std::unordered_set<double> uniques;  // capped once it exceeds the drop limit
};

inline void check_pipeline(const FeaturePipeline& p) {
  const auto n = p.feature_names.size();
  if (p.min_vals.size() != n || p.max_vals.size() != n)
    throw Error(ErrorKind::ShapeMismatch, "pipeline scaling bounds do not match feature count");
  if (p.angle_units.size() != p.angle_columns.size())
    throw Error(ErrorKind::ShapeMismatch, "pipeline angle units do not match angle columns");
  std::size_t expected = 0;
  for (const auto& c : p.kept_columns) expected += p.is_angle(c) ? 2 : 1;
  if (expected != n) throw Error(ErrorKind::ShapeMismatch, "pipeline feature count inconsistent with kept columns");
  for (std::size_t i = 0; i < n; ++i)
    if (!(p.min_vals[i] <= p.max_vals[i])) throw Error(ErrorKind::ShapeMismatch, "pipeline min exceeds max");
}

/// Column lookup for applying a pipeline to one frame layout. A zero
/// angle_factor marks a plain (non-angle) column.
struct RowPlan {
  std::vector<std::size_t> source_idx;
  std::vector<double> angle_factor;
};

inline RowPlan make_plan(const FeaturePipeline& p, const ScadaFrame& frame) {
  RowPlan plan;
  for (const auto& c : p.kept_columns) {
    const auto idx = frame.find_column(c);
    if (!idx) throw Error(ErrorKind::MissingColumn, c);
    plan.source_idx.push_back(*idx);
    const auto it = std::find(p.angle_columns.begin(), p.angle_columns.end(), c);
    if (it == p.angle_columns.end()) {
      plan.angle_factor.push_back(0.0);
    } else {
      const auto& unit = p.angle_units[static_cast<std::size_t>(it - p.angle_columns.begin())];
      plan.angle_factor.push_back(unit == "rad" ? 1.0 : std::numbers::pi / 180.0);
    }
  }
  return plan;
}

/// Angle expansion into `out` without scaling.
inline void expand_row(const RowPlan& plan, std::span<const double> raw_row, std::span<double> out) {
  std::size_t f = 0;
  for (std::size_t k = 0; k < plan.source_idx.size(); ++k) {
    const double x = raw_row[plan.source_idx[k]];
    if (plan.angle_factor[k] != 0.0) {
      const double theta = x * plan.angle_factor[k];
      out[f] = std::sin(theta);
      out[f + 1] = std::cos(theta);
      f += 2;
    } else {
      out[f++] = x;
    }
  }
}

/// Min-max scaling, unclipped; a degenerate range maps to 0.
inline void scale_row(const FeaturePipeline& p, std::span<double> row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    const double range = p.max_vals[i] - p.min_vals[i];
    row[i] = range > 0.0 ? (row[i] - p.min_vals[i]) / range : 0.0;
  }
}

}  // namespace detail

/// Fits the pipeline on pooled normal-behaviour frames (one per turbine for
/// multi-asset training). All frames must share the same columns.
inline FeaturePipeline fit_pipeline(std::span<const ScadaFrame> frames, const Schema& schema,
                                    const PruningRules& rules = {}) {
  validate_schema(schema);
  if (frames.empty()) throw Error(ErrorKind::EmptyResult, "no frames to fit on");
  std::size_t total_rows = 0;
  for (const auto& f : frames) {
    if (f.columns() != frames.front().columns()) throw Error(ErrorKind::SchemaMismatch, "frames differ in columns");
    total_rows += f.rows();
  }
  if (total_rows == 0) throw Error(ErrorKind::EmptyResult, "training frame is empty");

  FeaturePipeline p;
  for (const auto& col : schema) {
    if (!is_numeric(col.role) || col.role == ColumnRole::Counter || col.role == ColumnRole::Setpoint) continue;
    const auto idx = frames.front().find_column(col.name);
    if (!idx) throw Error(ErrorKind::MissingColumn, col.name);

    detail::ColumnStats stats;
    for (const auto& f : frames) {
      for (std::size_t r = 0; r < f.rows(); ++r) {
        const double v = f.at(r, *idx);
        ++stats.count;
        stats.zeros += v == 0.0;
        if (stats.uniques.size() <= rules.max_unique_to_drop) stats.uniques.insert(v);
      }
    }
    if (stats.uniques.size() <= rules.max_unique_to_drop) continue;
    // Strictly more than the allowed share of zeros drops the column.
    if (static_cast<double>(stats.zeros) > rules.max_zero_fraction * static_cast<double>(stats.count)) continue;

    p.kept_columns.push_back(col.name);
    if (col.role == ColumnRole::Angle) {
      p.angle_columns.push_back(col.name);
      p.angle_units.push_back(detail::is_radian_unit(col.unit) ? "rad" : "deg");
      p.feature_names.push_back(col.name + "_sin");
      p.feature_names.push_back(col.name + "_cos");
    } else {
      p.feature_names.push_back(col.name);
    }
  }
  if (p.kept_columns.empty()) throw Error(ErrorKind::NoFeaturesLeft, "every column was pruned");

  // Bounds come from the expanded but unscaled features.
  const auto n = p.feature_names.size();
  p.min_vals.assign(n, 0.0);
  p.max_vals.assign(n, 0.0);
  std::vector<double> buf(n);
  bool first = true;
  for (const auto& f : frames) {
    const auto plan = detail::make_plan(p, f);
    for (std::size_t r = 0; r < f.rows(); ++r) {
      detail::expand_row(plan, f.row(r), buf);
      for (std::size_t i = 0; i < n; ++i) {
        if (first) {
          p.min_vals[i] = p.max_vals[i] = buf[i];
        } else {
          p.min_vals[i] = std::min(p.min_vals[i], buf[i]);
          p.max_vals[i] = std::max(p.max_vals[i], buf[i]);
        }
      }
      first = false;
    }
  }
  return p;
}

inline FeaturePipeline fit_pipeline(const ScadaFrame& frame, const Schema& schema, const PruningRules& rules = {}) {
  return fit_pipeline(std::span<const ScadaFrame>(&frame, 1), schema, rules);
}

/// Applies a fitted pipeline: angle expansion (sin, cos) then min-max scaling.
inline FeatureMatrix apply_pipeline(const FeaturePipeline& pipeline, const ScadaFrame& frame) {
  detail::check_pipeline(pipeline);
  const auto plan = detail::make_plan(pipeline, frame);
  FeatureMatrix out;
  out.feature_names = pipeline.feature_names;
  out.timestamps = frame.timestamps();
  const auto n = pipeline.feature_count();
  out.values.resize(frame.rows() * n);
  for (std::size_t r = 0; r < frame.rows(); ++r) {
    std::span<double> dst(out.values.data() + r * n, n);
    detail::expand_row(plan, frame.row(r), dst);
    detail::scale_row(pipeline, dst);
  }
  return out;
}

inline nlohmann::json to_json(const FeaturePipeline& p) {
  return {{"kept_columns", p.kept_columns}, {"angle_columns", p.angle_columns}, {"angle_units", p.angle_units},
          {"feature_names", p.feature_names}, {"min_vals", p.min_vals},         {"max_vals", p.max_vals}};
}

inline FeaturePipeline pipeline_from_json(const nlohmann::json& j) {
  FeaturePipeline p;
  try {
    p.kept_columns = j.at("kept_columns").get<std::vector<std::string>>();
    p.angle_columns = j.at("angle_columns").get<std::vector<std::string>>();
    p.angle_units = j.contains("angle_units") ? j.at("angle_units").get<std::vector<std::string>>()
                                              : std::vector<std::string>(p.angle_columns.size(), "deg");
    p.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    p.min_vals = j.at("min_vals").get<std::vector<double>>();
    p.max_vals = j.at("max_vals").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::BadArtifact, std::string("pipeline: ") + e.what());
  }
  try {
    detail::check_pipeline(p);
  } catch (const Error& e) {
    throw Error(ErrorKind::BadArtifact, e.what());
  }
  return p;
}

}  // namespace wtad
