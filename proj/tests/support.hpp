#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include "wtad/wtad.hpp"

namespace wtad::test {

inline Instant day(int y, unsigned m, unsigned d) {
  return Instant{std::chrono::sys_days{std::chrono::year{y} / static_cast<int>(m) / static_cast<int>(d)}};
}

inline Instant t0() { return day(2022, 1, 1); }

inline Instant step(std::size_t i) { return t0() + static_cast<long>(i) * kSampleInterval; }

inline ColumnSchema col(std::string name, ColumnRole role = ColumnRole::Measurement, std::string unit = "") {
  return ColumnSchema{std::move(name), role, std::move(unit), {}};
}

inline Schema basic_schema(std::vector<ColumnSchema> extra = {}) {
  Schema s{col("timestamp", ColumnRole::Timestamp), col("op_mode", ColumnRole::OpMode),
           col("power", ColumnRole::Power, "kW"), col("wind_speed", ColumnRole::WindSpeed, "m/s")};
  s.insert(s.end(), extra.begin(), extra.end());
  return s;
}

/// Numeric columns of a schema in schema order.
inline std::vector<ColumnSchema> numeric_columns(const Schema& s) {
  std::vector<ColumnSchema> out;
  for (const auto& c : s)
    if (is_numeric(c.role)) out.push_back(c);
  return out;
}

/// Frame on the 10-minute grid from row vectors; op-mode defaults to normal operation.
inline ScadaFrame make_frame(const Schema& schema, const std::vector<std::vector<double>>& rows,
                             std::vector<std::string> modes = {}) {
  std::vector<Instant> ts;
  std::vector<double> vals;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ts.push_back(step(i));
    vals.insert(vals.end(), rows[i].begin(), rows[i].end());
  }
  if (modes.empty()) modes.assign(rows.size(), std::string(kNormalOperation));
  return ScadaFrame(std::move(ts), std::move(modes), numeric_columns(schema), std::move(vals));
}

inline FarmSpec small_spec(std::uint64_t seed = 3) {
  FarmSpec s;
  s.n_turbines = 2;
  s.months = 3;
  s.n_extra_sensors = 2;
  s.seed = seed;
  return s;
}

inline TrainConfig quick_config() {
  TrainConfig c;
  c.hidden_sizes = {8, 4, 8};
  c.epochs = 4;
  c.seed = 5;
  return c;
}

/// Small synthetic farm and a baseline trained on its first two months.
struct Fixture {
  SyntheticFarm farm;
  ScadaFrame train;
  LabelSeries train_labels;
  ScadaFrame tail;
  DetectorModel model;
};

inline const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture x;
    const auto spec = small_spec();
    x.farm = generate_farm(spec);
    const auto& frame = x.farm.frames[0];
    x.train = slice_period(frame, spec.start, add_months(spec.start, 2));
    x.train_labels = derive_labels(x.train, x.farm.configs[0]);
    x.tail = slice_period(frame, add_months(spec.start, 2), add_months(spec.start, 3));
    x.model = train_baseline(x.train, x.train_labels, x.farm.schema, quick_config(), "T01");
    return x;
  }();
  return f;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("wtad_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace wtad::test
