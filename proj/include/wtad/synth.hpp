#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wtad/error.hpp"
#include "wtad/ingest.hpp"
#include "wtad/random.hpp"
#include "wtad/time.hpp"

namespace wtad {

/// Synthetic wind farm description. Event rates are per turbine and month.
struct FarmSpec {
  std::string farm_id = "SYN";
  std::size_t n_turbines = 6;
  std::size_t n_extra_sensors = 10;
  Instant start = Instant{std::chrono::sys_days{std::chrono::year{2022} / 1 / 1}};
  int months = 13;
  std::uint64_t seed = 1;
  double turbine_variation = 0.05;
  double cut_in = 3.0;
  double cut_out = 25.0;
  double rated_power = 2000.0;
  double rated_wind = 12.0;
  double downtime_per_month = 2.0;
  double service_per_month = 0.5;
  double derate_per_month = 1.0;
  /// Share of downtime events whose OP-mode is wrongly logged as normal operation.
  double mislogged_downtime_fraction = 0.0;
  /// Per-row probability of an anemometer dropout (wind reads 0 at high power).
  double wind_dropout_rate = 0.0;
};

inline void validate(const FarmSpec& s) {
  if (s.n_turbines < 1) throw Error(ErrorKind::BadSpec, "n_turbines must be at least 1");
  if (s.months < 1) throw Error(ErrorKind::BadSpec, "months must be at least 1");
  if (s.n_extra_sensors > 999) throw Error(ErrorKind::BadSpec, "too many extra sensors");
  if (!(s.turbine_variation >= 0.0)) throw Error(ErrorKind::BadSpec, "turbine_variation must be non-negative");
  if (!(s.cut_in > 0.0 && s.cut_in < s.rated_wind && s.rated_wind < s.cut_out))
    throw Error(ErrorKind::BadSpec, "need 0 < cut_in < rated_wind < cut_out");
  if (!(s.rated_power > 0.0)) throw Error(ErrorKind::BadSpec, "rated_power must be positive");
  for (double rate : {s.downtime_per_month, s.service_per_month, s.derate_per_month})
    if (!(rate >= 0.0)) throw Error(ErrorKind::BadSpec, "event rates must be non-negative");
  if (!(s.mislogged_downtime_fraction >= 0.0 && s.mislogged_downtime_fraction <= 1.0) ||
      !(s.wind_dropout_rate >= 0.0 && s.wind_dropout_rate <= 1.0))
    throw Error(ErrorKind::BadSpec, "fractions must lie in [0, 1]");
}

inline nlohmann::json to_json(const FarmSpec& s) {
  return {{"farm_id", s.farm_id},
          {"n_turbines", s.n_turbines},
          {"n_extra_sensors", s.n_extra_sensors},
          {"start", format_instant(s.start)},
          {"months", s.months},
          {"seed", s.seed},
          {"turbine_variation", s.turbine_variation},
          {"cut_in", s.cut_in},
          {"cut_out", s.cut_out},
          {"rated_power", s.rated_power},
          {"rated_wind", s.rated_wind},
          {"downtime_per_month", s.downtime_per_month},
          {"service_per_month", s.service_per_month},
          {"derate_per_month", s.derate_per_month},
          {"mislogged_downtime_fraction", s.mislogged_downtime_fraction},
          {"wind_dropout_rate", s.wind_dropout_rate}};
}

inline FarmSpec farm_spec_from_json(const nlohmann::json& j) {
  FarmSpec s;
  try {
    s.farm_id = j.value("farm_id", s.farm_id);
    s.n_turbines = j.value("n_turbines", s.n_turbines);
    s.n_extra_sensors = j.value("n_extra_sensors", s.n_extra_sensors);
    if (j.contains("start")) {
      const auto t = parse_instant(j.at("start").get<std::string>());
      if (!t) throw Error(ErrorKind::BadSpec, "unparseable start instant");
      s.start = *t;
    }
    s.months = j.value("months", s.months);
    s.seed = j.value("seed", s.seed);
    s.turbine_variation = j.value("turbine_variation", s.turbine_variation);
    s.cut_in = j.value("cut_in", s.cut_in);
    s.cut_out = j.value("cut_out", s.cut_out);
    s.rated_power = j.value("rated_power", s.rated_power);
    s.rated_wind = j.value("rated_wind", s.rated_wind);
    s.downtime_per_month = j.value("downtime_per_month", s.downtime_per_month);
    s.service_per_month = j.value("service_per_month", s.service_per_month);
    s.derate_per_month = j.value("derate_per_month", s.derate_per_month);
    s.mislogged_downtime_fraction = j.value("mislogged_downtime_fraction", s.mislogged_downtime_fraction);
    s.wind_dropout_rate = j.value("wind_dropout_rate", s.wind_dropout_rate);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::BadSpec, e.what());
  }
  validate(s);
  return s;
}

struct SyntheticFarm {
  Schema schema;
  std::vector<TurbineConfig> configs;
  std::vector<ScadaFrame> frames;
};

namespace synth_detail {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double wrap_degrees(double a) {
  a = std::fmod(a, 360.0);
  return a < 0.0 ? a + 360.0 : a;
}

/// Signed smallest difference b - a in degrees.
inline double angle_diff(double a, double b) {
  double d = std::fmod(b - a + 540.0, 360.0) - 180.0;
  return d;
}

struct FarmWeather {
  std::vector<double> wind;       // m/s
  std::vector<double> direction;  // degrees
  std::vector<double> ambient;    // deg C
};

inline double day_of_year(Instant t) {
  using namespace std::chrono;
  const auto d = floor<days>(t);
  const year_month_day ymd{d};
  const auto jan1 = sys_days{ymd.year() / January / 1};
  return static_cast<double>((d - jan1).count()) + days_between(Instant{d}, t);
}

inline double hour_of_day(Instant t) {
  using namespace std::chrono;
  return static_cast<double>((t - floor<days>(t)).count()) / 3600.0;
}

/// Shared wind field: an AR(1) Gaussian pushed through the Weibull quantile
/// function, with seasonal and diurnal scale modulation.
inline FarmWeather farm_weather(const std::vector<Instant>& ts, std::uint64_t seed) {
  Rng rng(seed);
  const double phi = 0.985, shape = 2.4, base_scale = 10.5;
  const double innov = std::sqrt(1.0 - phi * phi);
  FarmWeather w;
  w.wind.resize(ts.size());
  w.direction.resize(ts.size());
  w.ambient.resize(ts.size());
  double z = rng.normal();
  double dir = 240.0;
  double amb_noise = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double doy = day_of_year(ts[i]);
    const double hour = hour_of_day(ts[i]);
    z = phi * z + innov * rng.normal();
    const double u = std::clamp(normal_cdf(z), 1e-12, 1.0 - 1e-12);
    const double scale = base_scale * (1.0 + 0.15 * std::cos(kTwoPi * (doy - 15.0) / 365.25)) *
                         (1.0 + 0.05 * std::sin(kTwoPi * (hour - 9.0) / 24.0));
    w.wind[i] = scale * std::pow(-std::log(1.0 - u), 1.0 / shape);

    dir = wrap_degrees(dir + 0.01 * angle_diff(dir, 240.0) + rng.normal(0.0, 2.0));
    w.direction[i] = dir;

    amb_noise = 0.995 * amb_noise + rng.normal(0.0, 0.2);
    w.ambient[i] = 9.0 + 8.0 * std::cos(kTwoPi * (doy - 200.0) / 365.25) +
                   3.0 * std::sin(kTwoPi * (hour - 9.0) / 24.0) + amb_noise;
  }
  return w;
}

enum class Mode { Normal, Waiting, Storm, Downtime, Service, Derated, MisloggedDowntime };

inline std::string mode_token(Mode m) {
  switch (m) {
    case Mode::Normal:
    case Mode::MisloggedDowntime: return std::string(kNormalOperation);
    case Mode::Waiting: return "waiting for wind";
    case Mode::Storm: return "storm stop";
    case Mode::Downtime: return "downtime";
    case Mode::Service: return "service";
    case Mode::Derated: return "derated";
  }
  return std::string(kNormalOperation);
}

struct ThermalSensor {
  std::string name;
  double offset;      // above ambient at zero power
  double gain;        // additional rise at rated power
  double response;    // first-order lag coefficient per step
};

inline std::vector<ThermalSensor> thermal_sensors(std::size_t n_extra, Rng& layout) {
  std::vector<ThermalSensor> s{{"nacelle_temp", 8.0, 6.0, 0.3},
                               {"gearbox_bearing_temp", 20.0, 35.0, 0.4},
                               {"gearbox_oil_temp", 18.0, 30.0, 0.25},
                               {"generator_winding_temp", 25.0, 60.0, 0.5},
                               {"generator_bearing_temp", 15.0, 25.0, 0.35},
                               {"converter_coolant_temp", 10.0, 20.0, 0.45},
                               {"transformer_temp", 12.0, 30.0, 0.3}};
  for (std::size_t k = 0; k < n_extra; ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "aux_temp_%02zu", k + 1);
    s.push_back({name, layout.uniform(5.0, 25.0), layout.uniform(10.0, 50.0), layout.uniform(0.2, 0.6)});
  }
  return s;
}

struct Event {
  std::size_t begin;
  std::size_t end;  // exclusive
  Mode mode;
  double cap = 1.0;
};

inline std::vector<Event> schedule_events(std::size_t n_rows, double per_month, Mode mode, double min_hours,
                                          double max_hours, Rng& rng) {
  std::vector<Event> events;
  if (per_month <= 0.0) return events;
  const double rows_per_month = 30.44 * 144.0;
  double pos = rng.exponential(rows_per_month / per_month);
  while (pos < static_cast<double>(n_rows)) {
    const double hours = rng.uniform(min_hours, max_hours);
    const auto begin = static_cast<std::size_t>(pos);
    const auto end = std::min(n_rows, begin + std::max<std::size_t>(1, static_cast<std::size_t>(hours * 6.0)));
    events.push_back({begin, end, mode, rng.uniform(0.3, 0.6)});
    pos = static_cast<double>(end) + rng.exponential(rows_per_month / per_month);
  }
  return events;
}

}  // namespace synth_detail

/// Schema shared by every synthetic turbine (timestamp, op_mode, then the
/// numeric columns in generation order).
inline Schema synthetic_schema(std::size_t n_extra_sensors, std::uint64_t seed) {
  Rng layout(derive_seed(seed, 1000));
  Schema s{{"timestamp", ColumnRole::Timestamp, "UTC", {}},
           {"op_mode", ColumnRole::OpMode, "", {}},
           {"wind_speed", ColumnRole::WindSpeed, "m/s", {}},
           {"power", ColumnRole::Power, "kW", {}},
           {"rotor_speed", ColumnRole::Measurement, "rpm", {}},
           {"generator_speed", ColumnRole::Measurement, "rpm", {}},
           {"pitch_angle", ColumnRole::Measurement, "deg", {}},
           {"wind_direction", ColumnRole::Angle, "deg", {}},
           {"nacelle_direction", ColumnRole::Angle, "deg", {}},
           {"ambient_temp", ColumnRole::Measurement, "degC", {}}};
  for (const auto& t : synth_detail::thermal_sensors(n_extra_sensors, layout))
    s.push_back({t.name, ColumnRole::Measurement, "degC", {}});
  s.push_back({"reactive_power", ColumnRole::Measurement, "kvar", {}});
  s.push_back({"energy_counter", ColumnRole::Counter, "kWh", {}});
  s.push_back({"power_setpoint", ColumnRole::Setpoint, "kW", {}});
  s.push_back({"brake_status", ColumnRole::Measurement, "", {}});
  s.push_back({"heater_power", ColumnRole::Measurement, "kW", {}});
  return s;
}

/// Deterministic farm generation: every output is a pure function of `spec`.
inline SyntheticFarm generate_farm(const FarmSpec& spec) {
  using namespace synth_detail;
  validate(spec);
  const Instant end = add_months(spec.start, spec.months);
  std::vector<Instant> ts;
  for (Instant t = spec.start; t < end; t += kSampleInterval) ts.push_back(t);
  const std::size_t n = ts.size();

  SyntheticFarm farm;
  farm.schema = synthetic_schema(spec.n_extra_sensors, spec.seed);
  Rng layout(derive_seed(spec.seed, 1000));
  const auto thermal = thermal_sensors(spec.n_extra_sensors, layout);
  const FarmWeather weather = farm_weather(ts, derive_seed(spec.seed, 0));

  std::vector<ColumnSchema> numeric;
  for (const auto& c : farm.schema)
    if (is_numeric(c.role)) numeric.push_back(c);
  const std::size_t ncol = numeric.size();
  const std::size_t thermal_col0 = 8;  // after wind..ambient

  const double ci = spec.cut_in, co = spec.cut_out, rated = spec.rated_power;
  for (std::size_t turbine = 0; turbine < spec.n_turbines; ++turbine) {
    Rng rng(derive_seed(spec.seed, 1 + turbine));
    const double v = spec.turbine_variation;
    char id[16];
    std::snprintf(id, sizeof id, "T%02zu", turbine + 1);
    farm.configs.push_back({id, spec.farm_id, ci, co, rated, 0.5});

    // Per-turbine deviations from the farm-wide behaviour.
    const double wind_gain = 1.0 + 0.5 * v * rng.normal();
    const double rated_wind = spec.rated_wind * (1.0 + 0.3 * v * rng.normal());
    const double dir_offset = 20.0 * v * rng.normal();
    std::vector<double> t_offset(thermal.size()), t_gain(thermal.size());
    for (std::size_t k = 0; k < thermal.size(); ++k) {
      t_offset[k] = thermal[k].offset + 20.0 * v * rng.normal();
      t_gain[k] = thermal[k].gain * (1.0 + v * rng.normal());
    }

    // OP-mode schedule.
    std::vector<Mode> sched(n, Mode::Normal);
    std::vector<double> cap(n, 1.0);
    auto downtime = schedule_events(n, spec.downtime_per_month, Mode::Downtime, 1.0, 12.0, rng);
    auto service = schedule_events(n, spec.service_per_month, Mode::Service, 4.0, 10.0, rng);
    auto derate = schedule_events(n, spec.derate_per_month, Mode::Derated, 6.0, 36.0, rng);
    for (auto& e : downtime)
      if (rng.uniform() < spec.mislogged_downtime_fraction) e.mode = Mode::MisloggedDowntime;
    for (const auto* events : {&derate, &downtime, &service})
      for (const auto& e : *events)
        for (std::size_t i = e.begin; i < e.end; ++i) {
          sched[i] = e.mode;
          cap[i] = e.cap;
        }

    std::vector<double> values(n * ncol);
    std::vector<std::string> modes(n);
    std::vector<double> temps(thermal.size());
    double wind_noise = 0.0, energy = 0.0, yaw_error = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      wind_noise = 0.9 * wind_noise + rng.normal(0.0, 0.15);
      const double wind = std::max(0.0, weather.wind[i] * wind_gain + wind_noise);
      const double ambient = weather.ambient[i] + 0.2 * rng.normal();

      Mode mode = sched[i];
      if (mode != Mode::Service && mode != Mode::Downtime && mode != Mode::MisloggedDowntime) {
        if (wind > co)
          mode = Mode::Storm;
        else if (wind < ci)
          mode = Mode::Waiting;
      }

      const double available =
          (wind >= ci && wind <= co)
              ? rated * std::clamp((std::pow(wind, 3) - std::pow(ci, 3)) / (std::pow(rated_wind, 3) - std::pow(ci, 3)), 0.0, 1.0)
              : 0.0;
      double power = 0.0, pitch = 86.0 + rng.normal(0.0, 1.0), rotor = 0.02 * std::abs(rng.normal());
      double setpoint = rated, brake = 0.0;
      const bool producing = mode == Mode::Normal || mode == Mode::Derated;
      if (producing) {
        const double limit = mode == Mode::Derated ? cap[i] * rated : rated;
        power = std::clamp(std::min(available, limit) * (1.0 + 0.015 * rng.normal()), 0.0, rated);
        if (mode == Mode::Derated) setpoint = limit;
        // Pitching sheds whatever the limit cuts off.
        const double shed = available > limit ? (available - limit) / rated : 0.0;
        pitch = 0.5 + 2.2 * std::max(0.0, wind - rated_wind) + 25.0 * shed + rng.normal(0.0, 0.3);
        rotor = std::min(16.0, 6.0 + 1.1 * (wind - ci)) + rng.normal(0.0, 0.1);
      } else if (mode == Mode::Waiting) {
        rotor = 1.0 + 0.3 * std::abs(rng.normal());
      } else {
        brake = 1.0;
        if (mode == Mode::Storm) rotor = 0.5 + 0.1 * std::abs(rng.normal());
      }
      energy += power / 6.0;

      yaw_error = 0.95 * yaw_error + rng.normal(0.0, 1.0);
      const double direction = wrap_degrees(weather.direction[i] + dir_offset + rng.normal(0.0, 2.0));
      const double nacelle = wrap_degrees(direction + yaw_error);

      const double load = power / rated;
      for (std::size_t k = 0; k < thermal.size(); ++k) {
        const double target = ambient + t_offset[k] + t_gain[k] * load;
        if (i == 0)
          temps[k] = target;
        else
          temps[k] += thermal[k].response * (target - temps[k]) + rng.normal(0.0, 0.2);
      }

      double wind_reading = wind;
      if (spec.wind_dropout_rate > 0.0 && power >= 0.5 * rated && rng.uniform() < spec.wind_dropout_rate)
        wind_reading = 0.0;

      double* row = values.data() + i * ncol;
      row[0] = wind_reading;
      row[1] = power;
      row[2] = rotor;
      row[3] = rotor * 100.0 + rng.normal(0.0, 3.0);
      row[4] = pitch;
      row[5] = direction;
      row[6] = nacelle;
      row[7] = ambient;
      for (std::size_t k = 0; k < thermal.size(); ++k) row[thermal_col0 + k] = temps[k] + rng.normal(0.0, 0.1);
      const std::size_t tail = thermal_col0 + thermal.size();
      row[tail] = 0.08 * power + rng.normal(0.0, 10.0);
      row[tail + 1] = energy;
      row[tail + 2] = setpoint;
      row[tail + 3] = brake;
      row[tail + 4] = ambient < 0.0 ? 3.0 + 0.5 * std::abs(rng.normal()) : 0.0;
      modes[i] = mode_token(mode);
    }
    farm.frames.emplace_back(ts, std::move(modes), numeric, std::move(values));
  }
  return farm;
}

enum class FaultKind { Drift, ChangePoint, Derate };

inline std::string_view to_string(FaultKind k) {
  switch (k) {
    case FaultKind::Drift: return "drift";
    case FaultKind::ChangePoint: return "change_point";
    case FaultKind::Derate: return "derate";
  }
  return "drift";
}

/// Fault window is closed: start <= t <= end. Magnitude is a slope in
/// units/day (drift), a step offset (change_point) or a power cap fraction
/// in (0, 1] (derate).
struct FaultSpec {
  FaultKind kind = FaultKind::Drift;
  std::string target_sensor;
  Instant start;
  Instant end;
  double magnitude = 0.0;
};

struct FaultInjection {
  ScadaFrame frame;
  std::vector<bool> in_fault;
};

inline FaultInjection inject_fault(const ScadaFrame& frame, const FaultSpec& fault) {
  if (!(fault.start < fault.end)) throw Error(ErrorKind::BadWindow, "fault start must precede end");
  if (frame.empty() || fault.start < frame.timestamps().front() || fault.end > frame.timestamps().back())
    throw Error(ErrorKind::BadWindow, "fault window outside the frame span");
  if (fault.magnitude == 0.0 || !std::isfinite(fault.magnitude))
    throw Error(ErrorKind::BadSpec, "fault magnitude must be finite and non-zero");
  if (fault.kind == FaultKind::Derate && !(fault.magnitude > 0.0 && fault.magnitude <= 1.0))
    throw Error(ErrorKind::BadSpec, "derate cap fraction must lie in (0, 1]");
  const std::size_t target = frame.column_index(fault.target_sensor);
  const std::size_t col = fault.kind == FaultKind::Derate ? frame.role_index(ColumnRole::Power) : target;

  std::vector<double> values = frame.values();
  std::vector<std::string> modes = frame.op_modes();
  std::vector<bool> flags(frame.rows(), false);
  const std::size_t ncol = frame.cols();
  for (std::size_t r = 0; r < frame.rows(); ++r) {
    const Instant t = frame.timestamps()[r];
    if (t < fault.start || t > fault.end) continue;
    flags[r] = true;
    double& x = values[r * ncol + col];
    switch (fault.kind) {
      case FaultKind::Drift: x += fault.magnitude * days_between(fault.start, t); break;
      case FaultKind::ChangePoint: x += fault.magnitude; break;
      case FaultKind::Derate:
        x *= fault.magnitude;
        modes[r] = "derated";
        break;
    }
  }
  return {ScadaFrame(frame.timestamps(), std::move(modes), frame.columns(), std::move(values)), std::move(flags)};
}

/// Writes one CSV and one config JSON per turbine plus schema.json and a
/// farm.json manifest into `dir`.
inline void write_farm(const SyntheticFarm& farm, const FarmSpec& spec, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoFailure, "cannot create " + dir.string());
  auto write_json = [](const std::filesystem::path& p, const nlohmann::json& j) {
    std::ofstream out(p);
    if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + p.string());
    out << j.dump(2) << '\n';
  };
  write_json(dir / "schema.json", schema_to_json(farm.schema));
  auto turbines = nlohmann::json::array();
  for (std::size_t i = 0; i < farm.frames.size(); ++i) {
    const auto& id = farm.configs[i].turbine_id;
    save_csv((dir / (id + ".csv")).string(), farm.frames[i], farm.schema);
    write_json(dir / (id + ".json"), to_json(farm.configs[i]));
    turbines.push_back({{"turbine_id", id}, {"data", id + ".csv"}, {"config", id + ".json"}});
  }
  write_json(dir / "farm.json", {{"spec", to_json(spec)}, {"schema", "schema.json"}, {"turbines", turbines}});
}

}  // namespace wtad
