// SPDX-License-Identifier: Apache-2.0
//
// Experiment front door. Subcommands: train, probe, gradcheck, schedule,
// robustness, compare. Exit codes: 0 success, 1 validation failure,
// 2 numerical-check failure, 3 I/O failure.
#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "covpool/error.hpp"
#include "covpool/gradcheck.hpp"
#include "covpool/io.hpp"
#include "covpool/kernels.hpp"
#include "covpool/robustness.hpp"
#include "covpool/train.hpp"

using namespace covpool;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitIo = 3;

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::Validation:
    case ErrorKind::Shape:
    case ErrorKind::Domain:
      return kExitValidation;
    case ErrorKind::Solver:
      return kExitNumerical;
    case ErrorKind::Parse:
    case ErrorKind::Io:
      return kExitIo;
  }
  return kExitValidation;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  std::size_t col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw ParseError("CSV is missing column '" + name + "'", 0);
  }
  std::size_t rows() const { return columns.empty() ? 0 : columns[0].size(); }
};

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw ParseError("empty CSV", 0);
  std::istringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) t.header.push_back(cell);
  t.columns.resize(t.header.size());
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::size_t c = 0;
    while (std::getline(ls, cell, ',')) {
      if (c >= t.columns.size()) throw ParseError("ragged CSV row", 0);
      try {
        t.columns[c].push_back(std::stod(cell));
      } catch (const std::exception&) {
        t.columns[c].push_back(0.0);
      }
      ++c;
    }
  }
  return t;
}

// Run-config assembly: defaults <- config file <- command-line overrides.
struct ConfigCli {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
  bool deterministic = false;
  std::optional<std::string> dataset, arch, head, schedule, probe_mode;
  std::optional<long> epochs, max_steps, cadence;
  std::optional<std::size_t> batch, grid_count, layer;
  std::optional<double> grid_a, grid_b, momentum, weight_decay;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key = value config file");
    cmd->add_option("--seed", seed, "run seed");
    cmd->add_option("--out", out, "output directory");
    cmd->add_option("--threads", threads, "worker threads for probe grids");
    cmd->add_flag("--deterministic", deterministic,
                  "force scalar kernels and a single thread");
    cmd->add_option("--dataset", dataset, "synth-cov | mnist | cifar10 | cached");
    cmd->add_option("--arch", arch, "trunk layers, e.g. conv3x3:8,relu,conv1x1:8");
    cmd->add_option("--head", head, "gap | gcp");
    cmd->add_option("--schedule", schedule, "named or parametric lr schedule");
    cmd->add_option("--epochs", epochs, "training epochs");
    cmd->add_option("--max-steps", max_steps, "hard step cap (0 = none)");
    cmd->add_option("--batch", batch, "mini-batch size");
    cmd->add_option("--momentum", momentum, "SGD momentum");
    cmd->add_option("--weight-decay", weight_decay, "SGD weight decay");
    cmd->add_option("--cadence", cadence, "probe every N steps");
    cmd->add_option("--grid-a", grid_a, "probe grid left endpoint");
    cmd->add_option("--grid-b", grid_b, "probe grid right endpoint");
    cmd->add_option("--grid-count", grid_count, "probe grid point count");
    cmd->add_option("--probe-layer", layer, "probe activation layer index");
    cmd->add_option("--probe-mode", probe_mode, "net | quadratic");
  }

  RunConfig resolve() const {
    std::vector<std::string> problems;
    RunConfig cfg;
    if (!config_path.empty()) cfg = RunConfig::from_kv(KvConfig::load(config_path), problems);
    if (seed) cfg.seed = *seed;
    if (out) cfg.out_dir = *out;
    if (threads) cfg.threads = *threads;
    if (deterministic) cfg.deterministic = true;
    if (dataset) cfg.dataset = *dataset;
    if (arch) cfg.arch = *arch;
    if (head) cfg.head = *head;
    if (schedule) cfg.schedule = *schedule;
    if (epochs) cfg.epochs = *epochs;
    if (max_steps) cfg.max_steps = *max_steps;
    if (batch) cfg.batch = *batch;
    if (momentum) cfg.momentum = *momentum;
    if (weight_decay) cfg.weight_decay = *weight_decay;
    if (cadence) cfg.probe_cadence = *cadence;
    if (grid_a) cfg.grid.a = *grid_a;
    if (grid_b) cfg.grid.b = *grid_b;
    if (grid_count) cfg.grid.count = *grid_count;
    if (layer) cfg.probe_layer = *layer;
    if (probe_mode) cfg.probe_mode = *probe_mode;
    auto more = cfg.validate();
    problems.insert(problems.end(), more.begin(), more.end());
    if (!problems.empty()) throw ValidationError(problems);
    return cfg;
  }
};

void persist_run(const RunConfig& cfg, const TrainResult& result, bool with_probes) {
  if (cfg.out_dir.empty()) return;
  ensure_dir(cfg.out_dir);
  std::vector<std::string> outputs;

  write_file(cfg.out_dir + "/config.txt", cfg.to_kv().serialize());
  outputs.push_back("config.txt");

  write_file(cfg.out_dir + "/convergence.csv", convergence_csv(result.rows));
  outputs.push_back("convergence.csv");

  save_network(result.net, cfg.out_dir + "/model.ckpt");
  outputs.push_back("model.ckpt");

  if (with_probes) {
    write_file(cfg.out_dir + "/probes.csv", probes_csv(result.probes));
    outputs.push_back("probes.csv");

    // the SVG is rendered from the persisted CSV alone
    const CsvTable t = parse_csv(read_file(cfg.out_dir + "/probes.csv"));
    const auto& step = t.columns[t.col("step")];
    std::vector<SvgSeries> series = {
        {"loss", "#333333", step, t.columns[t.col("loss")]},
        {"dl_min", "#1f77b4", step, t.columns[t.col("dl_min")]},
        {"dl_max", "#d62728", step, t.columns[t.col("dl_max")]},
    };
    std::vector<SvgBand> bands = {{"dl range", "#1f77b4", step, t.columns[t.col("dl_min")],
                                   t.columns[t.col("dl_max")]},
                                  {"dg range", "#2ca02c", step, t.columns[t.col("dg_min")],
                                   t.columns[t.col("dg_max")]}};
    write_file(cfg.out_dir + "/probes.svg",
               render_svg_plot("landscape probes (" + cfg.head + ")", "training step",
                               "loss / gradient distance", series, bands));
    outputs.push_back("probes.svg");
  }

  write_manifest(cfg.out_dir, outputs);
}

int cmd_train(const ConfigCli& cli) {
  const RunConfig cfg = cli.resolve();
  const TrainResult result = run_training(cfg);
  persist_run(cfg, result, cfg.probe_cadence > 0);
  std::cout << "final_eval_acc " << format_double(result.final_eval_acc) << "\n";
  if (!cfg.out_dir.empty()) std::cout << "run directory: " << cfg.out_dir << "\n";
  return kExitOk;
}

int cmd_probe(const ConfigCli& cli) {
  RunConfig cfg = cli.resolve();
  if (cfg.probe_cadence <= 0) cfg.probe_cadence = 20;
  const TrainResult result = run_probed_training(cfg);
  persist_run(cfg, result, true);
  std::cout << "probe records: " << result.probes.records.size() << "\n";
  if (result.mean_trimmed_cosine != 0.0)
    std::cout << "mean trimmed-vs-full gradient cosine: "
              << format_double(result.mean_trimmed_cosine) << "\n";
  if (!cfg.out_dir.empty()) std::cout << "run directory: " << cfg.out_dir << "\n";
  return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t cases, const std::string& out) {
  const GradCheckReport report = run_gradcheck(seed, cases);
  const std::string table = gradcheck_table(report);
  std::cout << table;
  if (!out.empty()) {
    ensure_dir(out);
    write_file(out + "/gradcheck.csv", table);
    write_manifest(out, {"gradcheck.csv"});
  }
  return report.passed ? kExitOk : kExitNumerical;
}

int cmd_schedule(const std::string& spec_text, long horizon, const std::string& out) {
  const ScheduleSpec spec = ScheduleSpec::parse(spec_text);
  std::ostringstream csv;
  emit_schedule(spec, horizon, csv);
  if (out.empty()) {
    std::cout << csv.str();
    return kExitOk;
  }
  ensure_dir(out);
  write_file(out + "/schedule.csv", csv.str());

  const CsvTable t = parse_csv(read_file(out + "/schedule.csv"));
  std::vector<SvgSeries> series = {
      {spec_text, "#1f77b4", t.columns[t.col("epoch")], t.columns[t.col("lr")]}};
  write_file(out + "/schedule.svg",
             render_svg_plot("learning-rate schedule " + spec.describe(), "epoch", "lr",
                             series));
  write_manifest(out, {"schedule.csv", "schedule.svg"});
  std::cout << "schedule written to " << out << "\n";
  return kExitOk;
}

int cmd_robustness(const ConfigCli& cli, const std::string& model_path,
                   const std::string& baseline_path) {
  const RunConfig cfg = cli.resolve();
  if (!file_exists(model_path)) throw IoError("model checkpoint not found: " + model_path);
  if (!file_exists(baseline_path))
    throw IoError("baseline checkpoint not found: " + baseline_path);
  const Network model = load_network(model_path);
  const Network baseline = load_network(baseline_path);
  auto [train_ds, test_ds] = load_datasets(cfg);

  const RobustnessReport report =
      evaluate_robustness(model, baseline, test_ds, cfg.batch, cfg.seed);
  std::cout << "mCE " << format_double(report.corruption.mce) << "  relative mCE "
            << format_double(report.corruption.relative_mce) << "  mFR "
            << format_double(report.flips.mfr) << "\n";
  for (const auto& w : report.corruption.warnings) std::cout << "warning: " << w << "\n";
  for (const auto& w : report.flips.warnings) std::cout << "warning: " << w << "\n";

  if (!cfg.out_dir.empty()) {
    ensure_dir(cfg.out_dir);
    write_file(cfg.out_dir + "/robustness.json", report.to_json());
    write_file(cfg.out_dir + "/robustness.csv", report.to_csv());
    write_file(cfg.out_dir + "/config.txt", cfg.to_kv().serialize());
    write_manifest(cfg.out_dir, {"robustness.json", "robustness.csv", "config.txt"});
    std::cout << "report written to " << cfg.out_dir << "\n";
  }
  return kExitOk;
}

int cmd_compare(const std::string& run_a, const std::string& run_b, const std::string& out) {
  const CsvTable a = parse_csv(read_file(run_a + "/convergence.csv"));
  const CsvTable b = parse_csv(read_file(run_b + "/convergence.csv"));
  if (a.rows() == 0 || b.rows() == 0)
    throw ParseError("compare: a run has an empty convergence table", 0);

  const auto& a_epoch = a.columns[a.col("epoch")];
  const auto& a_acc = a.columns[a.col("eval_acc")];
  const auto& b_epoch = b.columns[b.col("epoch")];
  const auto& b_acc = b.columns[b.col("eval_acc")];

  const double target = b_acc.back();
  const long b_final_epoch = static_cast<long>(b_epoch.back()) + 1;

  // first (1-based) epoch at which run A's end-of-epoch accuracy reaches the
  // target; rows carry their epoch's final accuracy
  long matching = -1;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    if (a_acc[i] >= target) {
      matching = static_cast<long>(a_epoch[i]) + 1;
      break;
    }
  }

  std::ostringstream txt;
  txt << "run_a = " << run_a << "\n";
  txt << "run_b = " << run_b << "\n";
  txt << "b_final_acc = " << format_double(target) << "\n";
  txt << "b_final_epoch = " << b_final_epoch << "\n";
  txt << "a_final_acc = " << format_double(a_acc.back()) << "\n";
  txt << "matching_epoch = " << (matching < 0 ? std::string("none") : std::to_string(matching))
      << "\n";
  std::cout << txt.str();

  if (!out.empty()) {
    ensure_dir(out);
    write_file(out + "/compare.txt", txt.str());
    std::vector<SvgSeries> series = {
        {"run A", "#1f77b4", a.columns[a.col("step")], a_acc},
        {"run B", "#d62728", b.columns[b.col("step")], b_acc},
    };
    write_file(out + "/compare.svg",
               render_svg_plot("eval accuracy", "training step", "accuracy", series));
    write_manifest(out, {"compare.txt", "compare.svg"});
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"covariance pooling experiment CLI"};
  app.require_subcommand(1);

  bool global_deterministic = false;
  int global_threads = 0;
  app.add_flag("--deterministic", global_deterministic,
               "force scalar kernels process-wide");
  app.add_option("--threads", global_threads, "default worker thread count");

  ConfigCli train_cli, probe_cli, robust_cli;

  CLI::App* train = app.add_subcommand("train", "train a model and emit convergence.csv");
  train_cli.attach(train);

  CLI::App* probe = app.add_subcommand("probe", "train with landscape probes and emit probes.csv");
  probe_cli.attach(probe);

  std::uint64_t gc_seed = 1;
  std::size_t gc_cases = 20;
  std::string gc_out;
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "verify the GCP backward pass");
  gradcheck->add_option("--seed", gc_seed, "case seed");
  gradcheck->add_option("--cases", gc_cases, "number of random cases")
      ->check(CLI::PositiveNumber);
  gradcheck->add_option("--out", gc_out, "directory for gradcheck.csv");

  std::string sched_spec = "resnet-adju";
  long sched_horizon = 50;
  std::string sched_out;
  CLI::App* schedule = app.add_subcommand("schedule", "emit a learning-rate schedule");
  schedule->add_option("--spec", sched_spec, "schedule name or parametric spec");
  schedule->add_option("--horizon", sched_horizon, "last epoch to emit");
  schedule->add_option("--out", sched_out, "directory for schedule.csv + schedule.svg");

  std::string rb_model, rb_baseline;
  CLI::App* robustness = app.add_subcommand("robustness", "corruption/perturbation report");
  robustness->add_option("--model", rb_model, "model checkpoint")->required();
  robustness->add_option("--baseline", rb_baseline, "baseline checkpoint")->required();
  robust_cli.attach(robustness);

  std::string cmp_a, cmp_b, cmp_out;
  CLI::App* compare = app.add_subcommand("compare", "matching-epoch report for two runs");
  compare->add_option("--run-a", cmp_a, "first run directory")->required();
  compare->add_option("--run-b", cmp_b, "second run directory")->required();
  compare->add_option("--out", cmp_out, "directory for compare.txt + compare.svg");

  CLI11_PARSE(app, argc, argv);

  try {
    if (global_deterministic) {
      kern::select(kern::Backend::Scalar);
      for (ConfigCli* c : {&train_cli, &probe_cli, &robust_cli}) c->deterministic = true;
    }
    if (global_threads > 0)
      for (ConfigCli* c : {&train_cli, &probe_cli, &robust_cli})
        if (!c->threads) c->threads = global_threads;

    if (*train) return cmd_train(train_cli);
    if (*probe) return cmd_probe(probe_cli);
    if (*gradcheck) return cmd_gradcheck(gc_seed, gc_cases, gc_out);
    if (*schedule) return cmd_schedule(sched_spec, sched_horizon, sched_out);
    if (*robustness) return cmd_robustness(robust_cli, rb_model, rb_baseline);
    if (*compare) return cmd_compare(cmp_a, cmp_b, cmp_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}
