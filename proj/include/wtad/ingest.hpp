#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "wtad/error.hpp"
#include "wtad/time.hpp"

namespace wtad {

/// Canonical OP-mode token for normal operation; every other mode is anomalous.
inline constexpr std::string_view kNormalOperation = "normal operation";

enum class ColumnRole { Timestamp, OpMode, Power, WindSpeed, Measurement, Counter, Setpoint, Angle };

inline std::string_view to_string(ColumnRole role) {
  switch (role) {
    case ColumnRole::Timestamp: return "timestamp";
    case ColumnRole::OpMode: return "opmode";
    case ColumnRole::Power: return "power";
    case ColumnRole::WindSpeed: return "windspeed";
    case ColumnRole::Measurement: return "measurement";
    case ColumnRole::Counter: return "counter";
    case ColumnRole::Setpoint: return "setpoint";
    case ColumnRole::Angle: return "angle";
  }
  return "measurement";
}

inline std::optional<ColumnRole> parse_role(std::string_view s) {
  for (auto role : {ColumnRole::Timestamp, ColumnRole::OpMode, ColumnRole::Power, ColumnRole::WindSpeed,
                    ColumnRole::Measurement, ColumnRole::Counter, ColumnRole::Setpoint, ColumnRole::Angle})
    if (to_string(role) == s) return role;
  return std::nullopt;
}

/// One declared column. `aliases` is only consulted on the opmode column and
/// maps raw OP-mode tokens onto canonical ones at load time.
struct ColumnSchema {
  std::string name;
  ColumnRole role = ColumnRole::Measurement;
  std::string unit;
  std::map<std::string, std::string> aliases;

  bool operator==(const ColumnSchema&) const = default;
};

using Schema = std::vector<ColumnSchema>;

/// Columns carried in the numeric value matrix (everything but timestamp and opmode).
inline bool is_numeric(ColumnRole role) { return role != ColumnRole::Timestamp && role != ColumnRole::OpMode; }

inline void validate_schema(const Schema& schema) {
  std::set<std::string> names;
  int timestamps = 0, opmodes = 0, powers = 0, winds = 0;
  for (const auto& col : schema) {
    if (col.name.empty()) throw Error(ErrorKind::BadSchema, "empty column name");
    if (!names.insert(col.name).second) throw Error(ErrorKind::BadSchema, "duplicate column " + col.name);
    timestamps += col.role == ColumnRole::Timestamp;
    opmodes += col.role == ColumnRole::OpMode;
    powers += col.role == ColumnRole::Power;
    winds += col.role == ColumnRole::WindSpeed;
  }
  if (timestamps != 1 || opmodes != 1 || powers != 1 || winds != 1)
    throw Error(ErrorKind::BadSchema, "schema needs exactly one timestamp, opmode, power and windspeed column");
}

inline const ColumnSchema& column_with_role(const Schema& schema, ColumnRole role) {
  for (const auto& col : schema)
    if (col.role == role) return col;
  throw Error(ErrorKind::BadSchema, "no column with role " + std::string(to_string(role)));
}

inline nlohmann::json schema_to_json(const Schema& schema) {
  auto arr = nlohmann::json::array();
  for (const auto& col : schema) {
    nlohmann::json j{{"name", col.name}, {"role", to_string(col.role)}, {"unit", col.unit}};
    if (!col.aliases.empty()) j["aliases"] = col.aliases;
    arr.push_back(std::move(j));
  }
  return arr;
}

inline Schema schema_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorKind::BadSchema, "schema must be a JSON array");
  Schema schema;
  try {
    for (const auto& item : j) {
      ColumnSchema col;
      col.name = item.at("name").get<std::string>();
      const auto role_name = item.at("role").get<std::string>();
      const auto role = parse_role(role_name);
      if (!role) throw Error(ErrorKind::BadSchema, "unknown role '" + role_name + "'");
      col.role = *role;
      col.unit = item.value("unit", std::string{});
      if (item.contains("aliases")) col.aliases = item.at("aliases").get<std::map<std::string, std::string>>();
      schema.push_back(std::move(col));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::BadSchema, e.what());
  }
  validate_schema(schema);
  return schema;
}

struct TurbineConfig {
  std::string turbine_id;
  std::string farm_id;
  double cut_in = 3.0;          // m/s
  double cut_out = 25.0;        // m/s
  double rated_power = 2000.0;  // kW
  double high_power_fraction = 0.5;

  bool operator==(const TurbineConfig&) const = default;
};

inline void validate(const TurbineConfig& c) {
  if (!(c.cut_in > 0.0 && c.cut_in < c.cut_out))
    throw Error(ErrorKind::BadSpec, "turbine config needs 0 < cut_in < cut_out");
  if (!(c.rated_power > 0.0)) throw Error(ErrorKind::BadSpec, "rated_power must be positive");
  if (!(c.high_power_fraction > 0.0 && c.high_power_fraction <= 1.0))
    throw Error(ErrorKind::BadSpec, "high_power_fraction must lie in (0, 1]");
}

inline nlohmann::json to_json(const TurbineConfig& c) {
  return {{"turbine_id", c.turbine_id}, {"farm_id", c.farm_id},        {"cut_in", c.cut_in},
          {"cut_out", c.cut_out},       {"rated_power", c.rated_power}, {"high_power_fraction", c.high_power_fraction}};
}

inline TurbineConfig turbine_config_from_json(const nlohmann::json& j) {
  TurbineConfig c;
  try {
    c.turbine_id = j.at("turbine_id").get<std::string>();
    c.farm_id = j.value("farm_id", std::string{});
    c.cut_in = j.at("cut_in").get<double>();
    c.cut_out = j.at("cut_out").get<double>();
    c.rated_power = j.at("rated_power").get<double>();
    c.high_power_fraction = j.value("high_power_fraction", 0.5);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::BadSpec, std::string("turbine config: ") + e.what());
  }
  validate(c);
  return c;
}

/// Time-indexed table of ten-minute SCADA records. Immutable once built; the
/// constructor enforces the grid, ordering and shape invariants.
class ScadaFrame {
 public:
  ScadaFrame() = default;

  /// `columns` lists the numeric columns (roles other than timestamp/opmode)
  /// in matrix order; `values` is row-major.
  ScadaFrame(std::vector<Instant> timestamps, std::vector<std::string> op_modes, std::vector<ColumnSchema> columns,
             std::vector<double> values)
      : timestamps_(std::move(timestamps)),
        op_modes_(std::move(op_modes)),
        columns_(std::move(columns)),
        values_(std::move(values)) {
    if (op_modes_.size() != timestamps_.size())
      throw Error(ErrorKind::LengthMismatch, "op-mode count differs from timestamp count");
    if (values_.size() != timestamps_.size() * columns_.size())
      throw Error(ErrorKind::ShapeMismatch, "value matrix does not match rows x columns");
    for (const auto& col : columns_)
      if (!is_numeric(col.role)) throw Error(ErrorKind::BadSchema, "non-numeric column in value matrix: " + col.name);
    for (std::size_t i = 0; i < timestamps_.size(); ++i) {
      if (!on_sample_grid(timestamps_[i]))
        throw Error(ErrorKind::BadTimestamp, format_instant(timestamps_[i]) + " is off the 10-minute grid");
      if (i > 0 && timestamps_[i] <= timestamps_[i - 1])
        throw Error(ErrorKind::BadTimestamp, "timestamps not strictly increasing at " + format_instant(timestamps_[i]));
    }
    for (double v : values_)
      if (!std::isfinite(v)) throw Error(ErrorKind::BadValue, "non-finite value in frame");
  }

  std::size_t rows() const noexcept { return timestamps_.size(); }
  std::size_t cols() const noexcept { return columns_.size(); }
  bool empty() const noexcept { return timestamps_.empty(); }

  const std::vector<Instant>& timestamps() const noexcept { return timestamps_; }
  const std::vector<std::string>& op_modes() const noexcept { return op_modes_; }
  const std::vector<ColumnSchema>& columns() const noexcept { return columns_; }
  const std::vector<double>& values() const noexcept { return values_; }

  std::vector<std::string> column_names() const {
    std::vector<std::string> names;
    names.reserve(columns_.size());
    for (const auto& c : columns_) names.push_back(c.name);
    return names;
  }

  double at(std::size_t row, std::size_t col) const { return values_[row * columns_.size() + col]; }

  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * columns_.size(), columns_.size()};
  }

  std::optional<std::size_t> find_column(std::string_view name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i)
      if (columns_[i].name == name) return i;
    return std::nullopt;
  }

  std::size_t column_index(std::string_view name) const {
    if (auto idx = find_column(name)) return *idx;
    throw Error(ErrorKind::MissingColumn, std::string(name));
  }

  std::size_t role_index(ColumnRole role) const {
    for (std::size_t i = 0; i < columns_.size(); ++i)
      if (columns_[i].role == role) return i;
    throw Error(ErrorKind::MissingColumn, "no column with role " + std::string(to_string(role)));
  }

  std::vector<double> column(std::string_view name) const {
    const auto c = column_index(name);
    std::vector<double> out(rows());
    for (std::size_t r = 0; r < rows(); ++r) out[r] = at(r, c);
    return out;
  }

  /// New frame holding the given rows (in the given order, which must keep
  /// timestamps increasing).
  ScadaFrame take_rows(std::span<const std::size_t> indices) const {
    std::vector<Instant> ts;
    std::vector<std::string> modes;
    std::vector<double> vals;
    ts.reserve(indices.size());
    modes.reserve(indices.size());
    vals.reserve(indices.size() * cols());
    for (auto i : indices) {
      ts.push_back(timestamps_[i]);
      modes.push_back(op_modes_[i]);
      auto r = row(i);
      vals.insert(vals.end(), r.begin(), r.end());
    }
    return ScadaFrame(std::move(ts), std::move(modes), columns_, std::move(vals));
  }

  bool operator==(const ScadaFrame&) const = default;

 private:
  std::vector<Instant> timestamps_;
  std::vector<std::string> op_modes_;
  std::vector<ColumnSchema> columns_;
  std::vector<double> values_;
};

enum class Label : unsigned char { Normal, Anomalous };

/// Per-timestamp normal/anomalous labels aligned to one frame.
struct LabelSeries {
  std::vector<Label> labels;

  std::size_t size() const noexcept { return labels.size(); }
  Label operator[](std::size_t i) const { return labels[i]; }
  bool anomalous(std::size_t i) const { return labels[i] == Label::Anomalous; }

  std::size_t count(Label which) const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), which));
  }

  bool operator==(const LabelSeries&) const = default;
};

namespace detail {

/// Splits one CSV record; supports double-quoted fields with "" escapes.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

/// Empty and NaN cells are missing and read as 0.0.
inline double parse_cell(std::string_view raw, std::size_t line_no) {
  const auto s = trim(raw);
  if (s.empty() || s == "nan" || s == "NaN" || s == "NAN") return 0.0;
  double v = 0.0;
  const char* first = s.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw Error(ErrorKind::BadValue, "line " + std::to_string(line_no) + ": cannot parse '" + std::string(s) + "'");
  if (std::isnan(v)) return 0.0;
  if (!std::isfinite(v)) throw Error(ErrorKind::BadValue, "line " + std::to_string(line_no) + ": infinite value");
  return v;
}

inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string quote_csv(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

}  // namespace detail

/// Parses SCADA CSV text against `schema`. Extra file columns are ignored;
/// rows are sorted by timestamp.
inline ScadaFrame parse_csv(std::istream& in, const Schema& schema) {
  validate_schema(schema);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::trim(line).empty()) break;
  }
  if (detail::trim(line).empty()) throw Error(ErrorKind::EmptyFile, "no header row");

  const auto header = detail::split_csv_line(line);
  std::map<std::string, std::size_t, std::less<>> header_pos;
  for (std::size_t i = 0; i < header.size(); ++i) header_pos.emplace(std::string(detail::trim(header[i])), i);

  auto field_of = [&](const ColumnSchema& col) {
    auto it = header_pos.find(col.name);
    if (it == header_pos.end()) throw Error(ErrorKind::MissingColumn, col.name);
    return it->second;
  };
  const auto& ts_col = column_with_role(schema, ColumnRole::Timestamp);
  const auto& op_col = column_with_role(schema, ColumnRole::OpMode);
  const std::size_t ts_field = field_of(ts_col);
  const std::size_t op_field = field_of(op_col);
  std::vector<ColumnSchema> numeric;
  std::vector<std::size_t> numeric_fields;
  for (const auto& col : schema) {
    if (!is_numeric(col.role)) continue;
    numeric.push_back(col);
    numeric_fields.push_back(field_of(col));
  }

  struct Row {
    Instant t;
    std::string mode;
    std::vector<double> vals;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() < header.size())
      throw Error(ErrorKind::BadValue, "line " + std::to_string(line_no) + ": too few fields");
    Row row;
    const auto ts_text = detail::trim(fields[ts_field]);
    const auto t = parse_instant(ts_text);
    if (!t) throw Error(ErrorKind::BadTimestamp, "line " + std::to_string(line_no) + ": '" + std::string(ts_text) + "'");
    if (!on_sample_grid(*t))
      throw Error(ErrorKind::BadTimestamp, "line " + std::to_string(line_no) + ": off the 10-minute grid");
    row.t = *t;
    row.mode = std::string(detail::trim(fields[op_field]));
    if (auto alias = op_col.aliases.find(row.mode); alias != op_col.aliases.end()) row.mode = alias->second;
    row.vals.reserve(numeric_fields.size());
    for (auto f : numeric_fields) row.vals.push_back(detail::parse_cell(fields[f], line_no));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorKind::EmptyFile, "no data rows");

  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.t < b.t; });
  std::vector<Instant> ts;
  std::vector<std::string> modes;
  std::vector<double> vals;
  ts.reserve(rows.size());
  modes.reserve(rows.size());
  vals.reserve(rows.size() * numeric.size());
  for (auto& r : rows) {
    if (!ts.empty() && ts.back() == r.t)
      throw Error(ErrorKind::BadTimestamp, "duplicate timestamp " + format_instant(r.t));
    ts.push_back(r.t);
    modes.push_back(std::move(r.mode));
    vals.insert(vals.end(), r.vals.begin(), r.vals.end());
  }
  return ScadaFrame(std::move(ts), std::move(modes), std::move(numeric), std::move(vals));
}

inline ScadaFrame load_csv(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path);
  return parse_csv(in, schema);
}

/// Writes the frame with the timestamp column first, then opmode, then the
/// numeric columns in frame order. Doubles use shortest round-trip form.
inline void write_csv(std::ostream& out, const ScadaFrame& frame, const Schema& schema) {
  const auto& ts_name = column_with_role(schema, ColumnRole::Timestamp).name;
  const auto& op_name = column_with_role(schema, ColumnRole::OpMode).name;
  out << detail::quote_csv(ts_name) << ',' << detail::quote_csv(op_name);
  for (const auto& col : frame.columns()) out << ',' << detail::quote_csv(col.name);
  out << '\n';
  for (std::size_t r = 0; r < frame.rows(); ++r) {
    out << format_instant(frame.timestamps()[r]) << ',' << detail::quote_csv(frame.op_modes()[r]);
    for (double v : frame.row(r)) out << ',' << detail::format_double(v);
    out << '\n';
  }
}

inline void save_csv(const std::string& path, const ScadaFrame& frame, const Schema& schema) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path);
  write_csv(out, frame, schema);
  if (!out) throw Error(ErrorKind::IoFailure, "write failed for " + path);
}

/// A row is normal iff the OP-mode is normal operation, power is positive, and
/// the turbine is not reporting high power with wind outside [cut_in, cut_out].
inline LabelSeries derive_labels(const ScadaFrame& frame, const TurbineConfig& config) {
  const auto p_idx = frame.role_index(ColumnRole::Power);
  const auto w_idx = frame.role_index(ColumnRole::WindSpeed);
  const double high_power = config.high_power_fraction * config.rated_power;
  LabelSeries out;
  out.labels.resize(frame.rows());
  for (std::size_t r = 0; r < frame.rows(); ++r) {
    const double p = frame.at(r, p_idx);
    const double w = frame.at(r, w_idx);
    const bool normal_mode = frame.op_modes()[r] == kNormalOperation;
    const bool implausible = p >= high_power && (w < config.cut_in || w > config.cut_out);
    out.labels[r] = (normal_mode && p > 0.0 && !implausible) ? Label::Normal : Label::Anomalous;
  }
  return out;
}

inline ScadaFrame select_normal(const ScadaFrame& frame, const LabelSeries& labels) {
  if (labels.size() != frame.rows()) throw Error(ErrorKind::LengthMismatch, "labels not aligned to frame");
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < frame.rows(); ++r)
    if (labels[r] == Label::Normal) keep.push_back(r);
  if (keep.empty()) throw Error(ErrorKind::EmptyResult, "no normal rows");
  return frame.take_rows(keep);
}

/// Index range [first, last) of rows with start <= t < end.
inline std::pair<std::size_t, std::size_t> period_bounds(const ScadaFrame& frame, Instant start, Instant end) {
  const auto& ts = frame.timestamps();
  const auto first = std::lower_bound(ts.begin(), ts.end(), start) - ts.begin();
  const auto last = std::lower_bound(ts.begin(), ts.end(), end) - ts.begin();
  return {static_cast<std::size_t>(first), static_cast<std::size_t>(std::max(first, last))};
}

inline ScadaFrame slice_period(const ScadaFrame& frame, Instant start, Instant end) {
  if (!(start < end)) throw Error(ErrorKind::BadWindow, "slice start must precede end");
  const auto [first, last] = period_bounds(frame, start, end);
  std::vector<std::size_t> idx(last - first);
  std::iota(idx.begin(), idx.end(), first);
  return frame.take_rows(idx);
}

inline LabelSeries slice_labels(const LabelSeries& labels, const ScadaFrame& frame, Instant start, Instant end) {
  if (labels.size() != frame.rows()) throw Error(ErrorKind::LengthMismatch, "labels not aligned to frame");
  const auto [first, last] = period_bounds(frame, start, end);
  return LabelSeries{{labels.labels.begin() + static_cast<std::ptrdiff_t>(first),
                      labels.labels.begin() + static_cast<std::ptrdiff_t>(last)}};
}

}  // namespace wtad
