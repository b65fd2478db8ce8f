// Acceptance run: prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "support.hpp"

using namespace wtad;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------- shared protocol state

constexpr std::uint64_t kFarmSeed = 1;
constexpr std::uint64_t kTrainSeed = 7;
constexpr std::uint64_t kTransferSeed = 11;
constexpr std::size_t kSource = 2;  // T03

struct Protocol {
  FarmSpec spec;
  SyntheticFarm farm;
  Instant train_end;
  Instant eval_end;
  DetectorModel source;
  std::map<std::size_t, DetectorModel> baselines;
  double seconds = 0.0;
};

TrainConfig train_config() {
  TrainConfig c;
  c.seed = kTrainSeed;
  return c;
}

TransferConfig transfer_config(TransferMethod m, const std::string& target) {
  TransferConfig c;
  c.method = m;
  c.seed = kTransferSeed;
  c.target_turbine = target;
  return c;
}

DetectorModel train_on(const Protocol& p, std::size_t t) {
  const auto frame = slice_period(p.farm.frames[t], p.spec.start, p.train_end);
  return train_baseline(frame, derive_labels(frame, p.farm.configs[t]), p.farm.schema, train_config(),
                        p.farm.configs[t].turbine_id);
}

Protocol& protocol() {
  static Protocol p = [] {
    const auto start = Clock::now();
    Protocol x;
    x.spec.seed = kFarmSeed;
    x.farm = generate_farm(x.spec);
    x.train_end = add_months(x.spec.start, 12);
    x.eval_end = add_months(x.spec.start, 13);
    x.source = train_on(x, kSource);
    x.seconds = seconds_since(start);
    return x;
  }();
  return p;
}

struct Tuning {
  ScadaFrame frame;
  LabelSeries labels;
};

Tuning tuning_window(const Protocol& p, std::size_t t, int months) {
  Tuning w{slice_period(p.farm.frames[t], add_months(p.train_end, -months), p.train_end), {}};
  w.labels = derive_labels(w.frame, p.farm.configs[t]);
  return w;
}

ScadaFrame eval_month(const Protocol& p, std::size_t t) {
  return slice_period(p.farm.frames[t], p.train_end, p.eval_end);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------- criteria

Outcome gradient_correctness() {
  const auto start = Clock::now();
  Rng rng(20240601);
  int networks = 0, rejected = 0;
  std::size_t params = 0;
  double worst = 0.0;
  while (networks < 100) {
    const auto net = oracle::random_network(rng, 8, 5);
    const auto x = oracle::random_matrix(rng, 1 + rng.below(4), net.input_dim());
    const auto y = oracle::random_matrix(rng, x.rows, net.output_dim());
    if (oracle::kink_distance(net, x) < 1e-3) {
      ++rejected;
      continue;
    }
    const auto check = oracle::check_gradients(net, x, y, 1e-5);
    worst = std::max(worst, check.worst_relative_error);
    params += check.checked;
    ++networks;
  }
  const double secs = seconds_since(start);
  return {worst < 1e-4 && secs < 30.0, std::to_string(networks) + " networks, " + std::to_string(params) +
                                           " parameters, worst relative error " + fmt("%.2e", worst) + ", " +
                                           fmt("%.1f", secs) + " s"};
}

Outcome adam_single_step() {
  Network net;
  DenseLayer l;
  l.weights = Matrix(1, 1, std::vector<double>{1.0});
  l.biases = {0.0};
  net.layers.push_back(l);
  auto state = AdamState::fresh(net, 0.001);
  auto g = Gradients::zeros_like(net);
  g.layers[0].weights.data[0] = 1.0;
  adam_step(state, net, g);
  const double w = net.layers[0].weights.data[0];
  const double expected = 1.0 - 0.001 * 1.0 / (std::sqrt(1.0) + 1e-8);
  return {std::abs(w - expected) <= 1e-12, "w' = " + fmt("%.15f", w) + ", |error| " + fmt("%.1e", std::abs(w - expected))};
}

Outcome threshold_oracle() {
  Rng rng(77);
  int mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(500);
    // Half of the instances use coarse scores so ties are common.
    const bool coarse = trial % 2 == 0;
    std::vector<double> scores(n);
    for (auto& s : scores) s = coarse ? double(rng.below(20)) / 10.0 : rng.exponential(0.1);
    const double rate = rng.uniform(0.02, 0.6);
    LabelSeries labels;
    for (std::size_t i = 0; i < n; ++i) labels.labels.push_back(rng.uniform() < rate ? Label::Anomalous : Label::Normal);
    if (labels.count(Label::Anomalous) == 0) labels.labels[rng.below(n)] = Label::Anomalous;
    const double thr = fit_threshold(scores, labels);
    const auto ex = oracle::exhaustive_threshold(scores, labels);
    const auto got = oracle::counts_at(scores, labels, thr);
    if (oracle::compare_f_half(got, ex.best) != 0 || oracle::f_half(got) != oracle::f_half(ex.best)) ++mismatches;
  }
  return {mismatches == 0, "200 instances, " + std::to_string(mismatches) + " mismatches"};
}

Outcome criticality_oracle() {
  Rng rng(4242);
  const std::vector<std::string> modes{std::string(kNormalOperation), "service", "downtime", "waiting for wind"};
  int mismatches = 0, hit_top = 0, hit_floor = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = rng.below(10001);
    std::vector<bool> det(n);
    std::vector<std::string> op(n);
    bool alarm = rng.uniform() < 0.5;
    const double p_switch = rng.uniform(0.0002, 0.01);
    for (std::size_t i = 0; i < n; ++i) {
      if (rng.uniform() < p_switch) alarm = !alarm;
      det[i] = rng.uniform() < (alarm ? 0.97 : 0.03);
      op[i] = modes[rng.uniform() < 0.92 ? 0 : 1 + rng.below(3)];
    }
    const auto got = criticality(det, op).values;
    const auto want = oracle::criticality(det, op);
    if (got != want) ++mismatches;
    // Count sequences where a clamp actually bound.
    int c = 0;
    bool top = false, floor = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (op[i] != modes[0]) continue;
      if (det[i] && c == 1000) top = true;
      if (!det[i] && c == 0) floor = true;
      c = want[i];
    }
    hit_top += top;
    hit_floor += floor;
  }
  return {mismatches == 0 && hit_top > 0 && hit_floor > 0,
          "1000 sequences, " + std::to_string(mismatches) + " mismatches, upper clamp exercised in " +
              std::to_string(hit_top) + ", lower clamp in " + std::to_string(hit_floor)};
}

Outcome transfer_invariants() {
  const auto& p = protocol();
  const auto w = tuning_window(p, 0, 1);
  const auto src_net = to_json(p.source.network).dump();
  const auto src_pipe = to_json(p.source.pipeline).dump();
  const auto thr = transfer(p.source, w.frame, w.labels, transfer_config(TransferMethod::Threshold, "T01"));
  const auto dec = transfer(p.source, w.frame, w.labels, transfer_config(TransferMethod::Decoder, "T01"));
  const bool thr_ok = to_json(thr.network).dump() == src_net && to_json(thr.pipeline).dump() == src_pipe &&
                      thr.network.same_parameters(p.source.network);
  bool enc_ok = dec.pipeline == p.source.pipeline, dec_moved = false;
  for (std::size_t k = 0; k < dec.network.layers.size(); ++k) {
    const bool same = dec.network.layers[k].same_parameters(p.source.network.layers[k]);
    if (k < dec.network.encoder_len)
      enc_ok = enc_ok && same;
    else
      dec_moved = dec_moved || !same;
  }
  return {thr_ok && enc_ok && dec_moved,
          std::string("threshold: network+pipeline ") + (thr_ok ? "identical" : "CHANGED") + "; decoder: encoder " +
              (enc_ok ? "identical" : "CHANGED") + ", decoder " + (dec_moved ? "updated" : "unchanged")};
}

Outcome protocol_reproduction() {
  const auto start = Clock::now();
  auto& p = protocol();
  double worst_gap = 0.0, min_base = 1.0;
  std::ostringstream table;
  std::string outside;
  bool ok = true;
  for (std::size_t t = 0; t < p.farm.frames.size(); ++t) {
    if (t == kSource) continue;
    const auto& cfg = p.farm.configs[t];
    p.baselines.emplace(t, train_on(p, t));
    const auto eval = eval_month(p, t);
    const double base = evaluate_month(p.baselines.at(t), eval, cfg).f_half;
    min_base = std::min(min_base, base);
    ok = ok && base >= 0.7;
    table << "    " << cfg.turbine_id << " baseline " << fmt("%.3f", base);
    for (int months : {1, 2, 3}) {
      const auto w = tuning_window(p, t, months);
      for (auto m : {TransferMethod::Threshold, TransferMethod::Decoder, TransferMethod::FullAutoencoder}) {
        const auto tl = transfer(p.source, w.frame, w.labels, transfer_config(m, cfg.turbine_id));
        const double f = evaluate_month(tl, eval, cfg).f_half;
        const double gap = f - base;
        worst_gap = std::max(worst_gap, std::abs(gap));
        if (std::abs(gap) > 0.15) {
          ok = false;
          outside += " " + cfg.turbine_id + "/" + std::string(to_string(m)) + "/" + std::to_string(months) + "m";
        }
        table << " | " << to_string(m) << months << "m " << fmt("%+.3f", gap);
      }
    }
    table << "\n";
  }
  const double secs = seconds_since(start) + p.seconds;
  ok = ok && secs < 600.0;
  std::printf("%s", table.str().c_str());
  return {ok, "min baseline F1/2 " + fmt("%.3f", min_base) + ", max |TL - baseline| " + fmt("%.3f", worst_gap) + ", " +
                  fmt("%.0f", secs) + " s" + (outside.empty() ? "" : ", outside 0.15:" + outside)};
}

Outcome case_study_drift() {
  const auto& p = protocol();
  const std::size_t t = 0;
  const auto w = tuning_window(p, t, 2);
  const auto model = transfer(p.source, w.frame, w.labels, transfer_config(TransferMethod::Decoder, "T01"));
  const auto eval = eval_month(p, t);
  const FaultSpec fault{FaultKind::Drift, "converter_coolant_temp", p.train_end + std::chrono::days{10},
                        p.train_end + std::chrono::days{24}, 1.0};
  const auto inj = inject_fault(eval, fault);
  const auto rows = case_study_report(model, inj.frame);
  std::optional<std::size_t> first;
  std::size_t detections = 0, last_in_window = 0;
  int peak_in_window = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!inj.in_fault[i]) continue;
    last_in_window = i;
    peak_in_window = std::max(peak_in_window, rows[i].criticality);
    if (rows[i].detected) {
      ++detections;
      if (!first) first = i;
    }
  }
  int control_peak = 0;
  for (const auto& r : case_study_report(model, eval)) control_peak = std::max(control_peak, r.criticality);
  const bool ok = detections >= 1 && first && *first < last_in_window && peak_in_window >= 10 && control_peak < 10;
  const std::string lead =
      first ? fmt("%.1f", days_between(fault.start, inj.frame.timestamps()[*first])) + " days after onset" : "never";
  return {ok, std::to_string(detections) + " detections in window, first " + lead + ", peak criticality " +
                  std::to_string(peak_in_window) + ", control month peak " + std::to_string(control_peak)};
}

Outcome serialization_roundtrip() {
  const auto& p = protocol();
  const auto path = (std::filesystem::temp_directory_path() / "wtad_acceptance_model.json").string();
  save_model(p.source, path);
  const auto back = load_model(path);
  const auto eval = eval_month(p, kSource);
  const auto a = anomaly_scores(p.source, eval), b = anomaly_scores(back, eval);
  std::size_t differing = 0;
  for (std::size_t i = 0; i < a.size(); ++i) differing += std::memcmp(&a[i], &b[i], sizeof(double)) != 0;
  std::filesystem::remove(path);
  return {differing == 0 && back.threshold == p.source.threshold,
          std::to_string(a.size()) + " scores, " + std::to_string(differing) + " differ"};
}

Outcome training_sanity() {
  const auto& p = protocol();
  std::vector<std::pair<std::string, const DetectorModel*>> models{{"T03 (source)", &p.source}};
  for (const auto& [t, m] : p.baselines) models.emplace_back(p.farm.configs[t].turbine_id, &m);
  int falling = 0;
  std::string worst;
  double worst_ratio = 0.0;
  for (const auto& [id, m] : models) {
    const auto& h = m->metadata.loss_history;
    const double ratio = h.back() / h.front();
    falling += h.back() < h.front();
    if (ratio > worst_ratio) {
      worst_ratio = ratio;
      worst = id;
    }
  }
  const bool ok = falling == int(models.size()) && models.size() > 1;
  return {ok, std::to_string(falling) + "/" + std::to_string(models.size()) +
                  " models end below their first-epoch MSE, largest final/first ratio " + fmt("%.2e", worst_ratio) +
                  " (" + worst + ")"};
}

Outcome preprocessing_rules() {
  using test::col;
  const Schema schema = test::basic_schema({col("unique3"), col("unique4"), col("zeros80"), col("zeros81"),
                                            col("energy", ColumnRole::Counter), col("power_sp", ColumnRole::Setpoint)});
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < 100; ++i) {
    const double ramp = 1.0 + double(i);
    rows.push_back({100.0 + ramp, 4.0 + 0.1 * ramp, double(i % 3), double(i % 4), i < 80 ? 0.0 : ramp,
                    i < 81 ? 0.0 : ramp, 50.0 * ramp, 1000.0 + ramp});
  }
  const auto p = fit_pipeline(test::make_frame(schema, rows), schema);
  const std::vector<std::string> expected{"power", "wind_speed", "unique4", "zeros80"};
  std::string kept;
  for (const auto& c : p.kept_columns) kept += (kept.empty() ? "" : ",") + c;
  return {p.kept_columns == expected, "kept " + kept};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 gradient correctness", gradient_correctness},
      {"2 Adam single-step oracle", adam_single_step},
      {"3 threshold-fit oracle equivalence", threshold_oracle},
      {"4 criticality oracle equivalence", criticality_oracle},
      {"6 protocol reproduction", protocol_reproduction},
      {"5 transfer structural invariants", transfer_invariants},
      {"7 drift case study", case_study_drift},
      {"8 serialization round-trip", serialization_roundtrip},
      {"9 training sanity", training_sanity},
      {"10 preprocessing rules", preprocessing_rules},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s criterion %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
