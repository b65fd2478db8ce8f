#pragma once

// Subcommand implementations for the wtad command-line tool.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "wtad/wtad.hpp"

namespace wtad::cli {

namespace fs = std::filesystem;

inline void log(const std::string& msg) { std::cerr << "[wtad] " << msg << '\n'; }

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::BadSpec, path + ": " + e.what());
  }
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::IoFailure, "write failed for " + path.string());
}

inline Instant parse_date_arg(const std::string& text, const char* what) {
  const auto t = parse_instant(text);
  if (!t) throw Error(ErrorKind::BadWindow, std::string("cannot parse ") + what + " '" + text + "'");
  return *t;
}

inline std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(static_cast<std::size_t>(std::stoul(item)));
    } catch (const std::exception&) {
      throw Error(ErrorKind::BadArchitecture, "bad hidden size '" + item + "'");
    }
  }
  return out;
}

/// Half-open window; unset ends default to the frame's span.
struct Window {
  std::string start;
  std::string end;

  ScadaFrame apply(const ScadaFrame& frame) const {
    if (frame.empty()) return frame;
    const Instant s = start.empty() ? frame.timestamps().front() : parse_date_arg(start, "window start");
    const Instant e = end.empty() ? frame.timestamps().back() + kSampleInterval : parse_date_arg(end, "window end");
    auto sliced = slice_period(frame, s, e);
    if (sliced.empty()) throw Error(ErrorKind::EmptyResult, "no rows in window");
    return sliced;
  }
};

struct TurbineData {
  ScadaFrame frame;
  TurbineConfig config;
};

inline TurbineData load_turbine(const std::string& data, const std::string& config, const Schema& schema,
                                std::optional<double> high_power_fraction = std::nullopt) {
  TurbineData t{load_csv(data, schema), turbine_config_from_json(read_json(config))};
  if (high_power_fraction) {
    t.config.high_power_fraction = *high_power_fraction;
    validate(t.config);
  }
  return t;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string spec;
  std::string out;
};

inline int cmd_synth(const SynthArgs& a) {
  const FarmSpec spec = farm_spec_from_json(read_json(a.spec));
  log("generating " + std::to_string(spec.n_turbines) + " turbines x " + std::to_string(spec.months) + " months");
  const auto farm = generate_farm(spec);
  write_farm(farm, spec, a.out);
  log("wrote farm to " + a.out);
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::vector<std::string> data;
  std::vector<std::string> configs;
  std::string schema;
  bool multi = false;
  Window window;
  std::string hidden = "25,10,25";
  std::size_t epochs = 50;
  std::size_t batch_size = 256;
  double learning_rate = 0.001;
  std::uint64_t seed = 0;
  std::optional<double> high_power_fraction;
  std::string out;
};

inline int cmd_train(const TrainArgs& a) {
  if (a.data.size() != a.configs.size())
    throw Error(ErrorKind::BadSpec, "need one --config per --data file");
  if (!a.multi && a.data.size() != 1) throw Error(ErrorKind::BadSpec, "single-asset training takes exactly one --data");
  if (a.multi && a.data.size() < 2) throw Error(ErrorKind::BadSpec, "--multi needs at least two turbines");
  const Schema schema = schema_from_json(read_json(a.schema));

  TrainConfig tc;
  tc.hidden_sizes = parse_sizes(a.hidden);
  tc.epochs = a.epochs;
  tc.batch_size = a.batch_size;
  tc.learning_rate = a.learning_rate;
  tc.seed = a.seed;
  if (a.high_power_fraction) tc.high_power_fraction = *a.high_power_fraction;

  std::vector<LabeledFrame> sources;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    auto t = load_turbine(a.data[i], a.configs[i], schema, tc.high_power_fraction);
    auto frame = a.window.apply(t.frame);
    auto labels = derive_labels(frame, t.config);
    log(t.config.turbine_id + ": " + std::to_string(frame.rows()) + " rows, " +
        std::to_string(labels.count(Label::Normal)) + " normal");
    sources.push_back({std::move(frame), std::move(labels), t.config.turbine_id});
  }
  const DetectorModel model =
      a.multi ? train_multi_asset(sources, schema, tc) : train_baseline(sources[0].frame, sources[0].labels, schema, tc,
                                                                         sources[0].turbine_id);
  log("trained on " + std::to_string(model.pipeline.feature_count()) + " features, loss " +
      std::to_string(model.metadata.loss_history.front()) + " -> " + std::to_string(model.metadata.loss_history.back()) +
      ", threshold " + std::to_string(model.threshold));
  save_model(model, a.out);
  return 0;
}

// ---------------------------------------------------------------- transfer

struct TransferArgs {
  std::string model;
  std::string data;
  std::string config;
  std::string schema;
  std::string method;
  int months = 1;
  std::string end;
  std::size_t epochs = 10;
  std::optional<double> learning_rate;
  std::uint64_t seed = 0;
  std::string out;
};

inline int cmd_transfer(const TransferArgs& a) {
  const auto method = parse_transfer_method(a.method);
  if (!method) throw Error(ErrorKind::BadSpec, "unknown method '" + a.method + "'");
  const Schema schema = schema_from_json(read_json(a.schema));
  const DetectorModel source = load_model(a.model);
  auto t = load_turbine(a.data, a.config, schema, source.metadata.config.high_power_fraction);

  const Instant end = a.end.empty() ? t.frame.timestamps().back() + kSampleInterval : parse_date_arg(a.end, "--end");
  const Instant start = add_months(end, -a.months);
  const auto tuning = slice_period(t.frame, start, end);
  if (tuning.empty()) throw Error(ErrorKind::EmptyResult, "no tuning rows in window");
  const auto labels = derive_labels(tuning, t.config);

  TransferConfig tc;
  tc.method = *method;
  tc.epochs = a.epochs;
  tc.learning_rate = a.learning_rate;
  tc.seed = a.seed;
  tc.target_turbine = t.config.turbine_id;
  const DetectorModel model = transfer(source, tuning, labels, tc);
  const auto& entry = model.metadata.lineage.back();
  log(std::string(to_string(*method)) + " transfer to " + t.config.turbine_id + " on " + format_instant(start) + " .. " +
      format_instant(end) + ", tuning mse " + std::to_string(entry.tuning_mse_before) + " -> " +
      std::to_string(entry.tuning_mse_after) + ", threshold " + std::to_string(model.threshold));
  save_model(model, a.out);
  return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::vector<std::string> models;  // "id=path" or "path"
  std::string data;
  std::string config;
  std::string schema;
  Window window;
  std::string baseline;
  std::string out;
  std::string csv;
};

inline std::pair<std::string, std::string> split_model_arg(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos) return {fs::path(arg).stem().string(), arg};
  return {arg.substr(0, eq), arg.substr(eq + 1)};
}

/// End of the data a model last saw: the latest tuning window, or the training window.
inline std::optional<Instant> model_data_end(const DetectorModel& m) {
  const std::string& text = m.metadata.lineage.empty() ? m.metadata.training_end : m.metadata.lineage.back().tuning_end;
  return parse_instant(text);
}

inline int cmd_evaluate(const EvaluateArgs& a) {
  if (a.models.empty()) throw Error(ErrorKind::EmptyResult, "no models given");
  const Schema schema = schema_from_json(read_json(a.schema));
  std::vector<NamedModel> models;
  for (const auto& arg : a.models) {
    auto [id, path] = split_model_arg(arg);
    models.push_back({id, load_model(path)});
  }
  const std::string baseline = a.baseline.empty() ? models.front().id : a.baseline;
  const auto base_it = std::find_if(models.begin(), models.end(), [&](const NamedModel& m) { return m.id == baseline; });
  if (base_it == models.end()) throw Error(ErrorKind::EmptyResult, "baseline '" + baseline + "' not among models");

  auto t = load_turbine(a.data, a.config, schema, base_it->model.metadata.config.high_power_fraction);
  Window w = a.window;
  if (w.start.empty()) {
    // Default: the month right after the baseline's data.
    if (auto end = model_data_end(base_it->model)) {
      w.start = format_instant(*end);
      if (w.end.empty()) w.end = format_instant(add_months(*end, 1));
    }
  }
  const auto frame = w.apply(t.frame);
  const auto report = compare_models(models, baseline, frame, t.config);
  for (const auto& row : report.rows)
    log(row.model_id + ": F1/2 " + std::to_string(row.f_half) + " (delta " + std::to_string(row.delta_f_half) + ")");

  write_text(a.out, to_json(report).dump(2) + "\n");
  std::ostringstream csv;
  write_comparison_csv(csv, report);
  write_text(a.csv.empty() ? fs::path(a.out).replace_extension(".csv") : fs::path(a.csv), csv.str());
  return 0;
}

// ---------------------------------------------------------------- case-study

struct CaseStudyArgs {
  std::string model;
  std::string data;
  std::string config;
  std::string schema;
  Window window;
  std::string out;
};

inline int cmd_case_study(const CaseStudyArgs& a) {
  const Schema schema = schema_from_json(read_json(a.schema));
  const DetectorModel model = load_model(a.model);
  auto t = load_turbine(a.data, a.config, schema);
  const auto frame = a.window.apply(t.frame);
  const auto rows = case_study_report(model, frame);
  std::ostringstream csv;
  write_case_study_csv(csv, rows);
  write_text(a.out, csv.str());
  int peak = 0;
  for (const auto& r : rows) peak = std::max(peak, r.criticality);
  log("case study over " + std::to_string(rows.size()) + " rows, peak criticality " + std::to_string(peak));
  return 0;
}

// ---------------------------------------------------------------- experiment

/// Whole protocol from one JSON config: optional synthesis, source and
/// baseline training, every (method, tuning months) transfer per target, and
/// a comparison on the month after the training window.
inline int cmd_experiment(const std::string& config_path) {
  const auto cfg = read_json(config_path);
  const fs::path out_dir = cfg.value("out_dir", std::string("experiment_out"));
  fs::create_directories(out_dir / "models");
  fs::create_directories(out_dir / "reports");

  fs::path data_dir;
  if (cfg.contains("farm")) {
    const FarmSpec spec = farm_spec_from_json(cfg.at("farm"));
    data_dir = out_dir / "data";
    log("synthesizing farm into " + data_dir.string());
    write_farm(generate_farm(spec), spec, data_dir);
  } else {
    data_dir = cfg.at("data_dir").get<std::string>();
  }
  const auto manifest = read_json((data_dir / "farm.json").string());
  const Schema schema = schema_from_json(read_json((data_dir / manifest.at("schema").get<std::string>()).string()));
  std::map<std::string, TurbineData> turbines;
  for (const auto& t : manifest.at("turbines")) {
    const auto id = t.at("turbine_id").get<std::string>();
    turbines.emplace(id, load_turbine((data_dir / t.at("data").get<std::string>()).string(),
                                      (data_dir / t.at("config").get<std::string>()).string(), schema));
  }
  auto turbine = [&](const std::string& id) -> const TurbineData& {
    auto it = turbines.find(id);
    if (it == turbines.end()) throw Error(ErrorKind::BadSpec, "unknown turbine " + id);
    return it->second;
  };

  const auto& tw = cfg.at("train_window");
  const Instant train_start = parse_date_arg(tw.at("start").get<std::string>(), "train_window.start");
  const Instant train_end = parse_date_arg(tw.at("end").get<std::string>(), "train_window.end");
  const Instant eval_end = add_months(train_end, cfg.value("eval_months", 1));
  const TrainConfig tc = train_config_from_json(cfg.value("train", nlohmann::json::object()));
  const auto tuning_months = cfg.value("tuning_months", std::vector<int>{1, 2, 3});
  const auto methods = cfg.value("methods", std::vector<std::string>{"threshold", "decoder", "ae"});
  const auto transfer_cfg = cfg.value("transfer", nlohmann::json::object());

  std::vector<std::string> sources;
  if (cfg.at("source").is_array())
    sources = cfg.at("source").get<std::vector<std::string>>();
  else
    sources.push_back(cfg.at("source").get<std::string>());

  auto labeled = [&](const std::string& id, Instant s, Instant e) {
    const auto& t = turbine(id);
    auto frame = slice_period(t.frame, s, e);
    auto labels = derive_labels(frame, t.config);
    return LabeledFrame{std::move(frame), std::move(labels), id};
  };

  std::vector<LabeledFrame> source_data;
  for (const auto& id : sources) source_data.push_back(labeled(id, train_start, train_end));
  log("training source model on " + std::to_string(sources.size()) + " turbine(s)");
  const DetectorModel source = sources.size() > 1 ? train_multi_asset(source_data, schema, tc)
                                                  : train_baseline(source_data[0].frame, source_data[0].labels, schema,
                                                                   tc, sources[0]);
  save_model(source, (out_dir / "models" / "source.json").string());

  auto summary = nlohmann::json::object();
  for (const auto& target : cfg.at("targets").get<std::vector<std::string>>()) {
    const auto& t = turbine(target);
    std::vector<NamedModel> models;
    const auto base_data = labeled(target, train_start, train_end);
    log("training baseline for " + target);
    models.push_back({"baseline", train_baseline(base_data.frame, base_data.labels, schema, tc, target)});
    for (int months : tuning_months) {
      const auto tuning = labeled(target, add_months(train_end, -months), train_end);
      for (const auto& m : methods) {
        const auto method = parse_transfer_method(m);
        if (!method) throw Error(ErrorKind::BadSpec, "unknown method '" + m + "'");
        TransferConfig tr;
        tr.method = *method;
        tr.epochs = transfer_cfg.value("epochs", tr.epochs);
        if (transfer_cfg.contains("learning_rate")) tr.learning_rate = transfer_cfg.at("learning_rate").get<double>();
        tr.seed = transfer_cfg.value("seed", tr.seed);
        tr.target_turbine = target;
        models.push_back({m + "_" + std::to_string(months) + "m", transfer(source, tuning.frame, tuning.labels, tr)});
      }
    }
    for (const auto& nm : models) save_model(nm.model, (out_dir / "models" / (target + "_" + nm.id + ".json")).string());
    const auto eval = slice_period(t.frame, train_end, eval_end);
    const auto report = compare_models(models, "baseline", eval, t.config);
    write_text(out_dir / "reports" / (target + ".json"), to_json(report).dump(2) + "\n");
    std::ostringstream csv;
    write_comparison_csv(csv, report);
    write_text(out_dir / "reports" / (target + ".csv"), csv.str());
    summary[target] = to_json(report);
    for (const auto& row : report.rows)
      log(target + " " + row.model_id + ": F1/2 " + std::to_string(row.f_half) + " (delta " +
          std::to_string(row.delta_f_half) + ")");
  }
  write_text(out_dir / "summary.json", summary.dump(2) + "\n");
  return 0;
}

}  // namespace wtad::cli
