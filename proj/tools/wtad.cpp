#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace wtad::cli;
  CLI::App app{"Autoencoder anomaly detection and transfer learning for wind-turbine SCADA data"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic wind farm (CSV + schema + configs)");
  s->add_option("--spec", synth.spec, "Farm spec JSON")->required()->check(CLI::ExistingFile);
  s->add_option("--out", synth.out, "Output directory")->required();

  TrainArgs train;
  std::optional<double> train_hpf;
  auto* t = app.add_subcommand("train", "Train a baseline or multi-asset source model");
  t->add_option("--data", train.data, "Turbine CSV (repeat with --multi)")->required();
  t->add_option("--config", train.configs, "Turbine config JSON, one per --data")->required();
  t->add_option("--schema", train.schema, "Schema JSON")->required();
  t->add_flag("--multi", train.multi, "Pool several turbines into one source model");
  t->add_option("--start", train.window.start, "Training window start (ISO-8601)");
  t->add_option("--end", train.window.end, "Training window end, exclusive (ISO-8601)");
  t->add_option("--hidden", train.hidden, "Hidden layer sizes, e.g. 25,10,25")->capture_default_str();
  t->add_option("--epochs", train.epochs)->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--batch-size", train.batch_size)->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--lr", train.learning_rate)->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--seed", train.seed)->capture_default_str();
  t->add_option("--high-power-fraction", train_hpf, "Fraction of rated power counted as high power");
  t->add_option("--out", train.out, "Model artifact path")->required();

  TransferArgs tr;
  std::optional<double> tr_lr;
  auto* x = app.add_subcommand("transfer", "Transfer a source model to a target turbine");
  x->add_option("--model", tr.model, "Source model artifact")->required()->check(CLI::ExistingFile);
  x->add_option("--data", tr.data, "Target turbine CSV")->required();
  x->add_option("--config", tr.config, "Target turbine config JSON")->required();
  x->add_option("--schema", tr.schema, "Schema JSON")->required();
  x->add_option("--method", tr.method, "threshold | decoder | ae")
      ->required()
      ->check(CLI::IsMember({"threshold", "decoder", "ae"}));
  x->add_option("--months", tr.months, "Months of tuning data")->capture_default_str()->check(CLI::Range(1, 3));
  x->add_option("--end", tr.end, "End of the tuning window, exclusive (default: end of data)");
  x->add_option("--epochs", tr.epochs)->capture_default_str();
  x->add_option("--lr", tr_lr, "Learning rate (default 1e-3 decoder, 1e-4 ae)");
  x->add_option("--seed", tr.seed)->capture_default_str();
  x->add_option("--out", tr.out, "Output model artifact")->required();

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Compare models on an evaluation window");
  e->add_option("--model", ev.models, "Model artifact as ID=PATH or PATH (repeatable)")->required();
  e->add_option("--data", ev.data, "Turbine CSV")->required();
  e->add_option("--config", ev.config, "Turbine config JSON")->required();
  e->add_option("--schema", ev.schema, "Schema JSON")->required();
  e->add_option("--start", ev.window.start, "Window start (default: end of the baseline's data)");
  e->add_option("--end", ev.window.end, "Window end, exclusive (default: one month after start)");
  e->add_option("--baseline", ev.baseline, "Baseline model id (default: first model)");
  e->add_option("--out", ev.out, "Report JSON path")->required();
  e->add_option("--csv", ev.csv, "Report CSV path (default: --out with .csv)");

  CaseStudyArgs cs;
  auto* c = app.add_subcommand("case-study", "Per-timestamp score, threshold, detection and criticality trace");
  c->add_option("--model", cs.model, "Model artifact")->required()->check(CLI::ExistingFile);
  c->add_option("--data", cs.data, "Turbine CSV")->required();
  c->add_option("--config", cs.config, "Turbine config JSON")->required();
  c->add_option("--schema", cs.schema, "Schema JSON")->required();
  c->add_option("--start", cs.window.start, "Window start");
  c->add_option("--end", cs.window.end, "Window end, exclusive");
  c->add_option("--out", cs.out, "Trace CSV path")->required();

  std::string experiment;
  auto* p = app.add_subcommand("experiment", "Run synth/train/transfer/evaluate from one experiment config");
  p->add_option("--config", experiment, "Experiment JSON")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*s) return cmd_synth(synth);
    if (*t) {
      train.high_power_fraction = train_hpf;
      return cmd_train(train);
    }
    if (*x) {
      tr.learning_rate = tr_lr;
      return cmd_transfer(tr);
    }
    if (*e) return cmd_evaluate(ev);
    if (*c) return cmd_case_study(cs);
    if (*p) return cmd_experiment(experiment);
  } catch (const wtad::Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 0;
}
