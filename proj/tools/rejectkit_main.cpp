// rejectkit: calibrate and apply selective-prediction thresholds to
// multi-label classifier score files, then evaluate the accuracy/coverage
// trade-off. Subcommands write their artifacts into --out and echo the
// fully-resolved configuration to <out>/run.json; identical run.json means
// byte-identical artifacts.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "rejectkit/calibration.hpp"
#include "rejectkit/core.hpp"
#include "rejectkit/evaluation.hpp"
#include "rejectkit/io.hpp"
#include "rejectkit/rejection.hpp"
#include "rejectkit/synthgen.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace rejectkit;

namespace {

constexpr int kExitInputError = 2;
constexpr int kExitCalibrationDegenerate = 3;
constexpr int kExitBudgetInfeasible = 4;

struct CommonArgs {
  std::string out_dir;
  std::string scores;
  std::string format = "csv";
  std::string split_manifest;
  std::string subset;
  unsigned threads = 0;  // 0 = unset, fall back to REJECTKIT_THREADS, then 1
  bool pretty = false;
};

unsigned resolve_threads(unsigned flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("REJECTKIT_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return 1;
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw Error(ErrorCode::io_error,
                "cannot create output directory: " + dir + " (" +
                    ec.message() + ")");
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(ErrorCode::io_error, "cannot write file: " + path.string());
  out << text;
}

void write_run_json(const std::string& out_dir, ordered_json config) {
  write_text_file(fs::path(out_dir) / "run.json", config.dump(2) + "\n");
}

ScoreTable load_table(const CommonArgs& args, double theta) {
  const FileFormat format = format_from_string(args.format);
  const ClassSchema schema = infer_schema(args.scores, format, theta);
  ScoreTable table = read_scores(args.scores, format, schema);
  if (!args.split_manifest.empty()) {
    if (args.subset.empty())
      throw Error(ErrorCode::invalid_config,
                  "--split requires --subset train|cal|eval");
    std::ifstream in(args.split_manifest);
    if (!in)
      throw Error(ErrorCode::io_error,
                  "cannot open file: " + args.split_manifest);
    const SplitManifest manifest = read_manifest_csv(in);
    Assignment which;
    if (args.subset == "train")
      which = Assignment::train;
    else if (args.subset == "cal")
      which = Assignment::cal;
    else if (args.subset == "eval")
      which = Assignment::eval;
    else
      throw Error(ErrorCode::invalid_config,
                  "unknown subset: " + args.subset);
    table = filter_by_assignment(table, manifest, which);
  }
  return table;
}

ordered_json common_json(const char* command, const CommonArgs& args) {
  ordered_json j;
  j["command"] = command;
  j["scores"] = args.scores;
  j["format"] = args.format;
  if (!args.split_manifest.empty()) {
    j["split"] = args.split_manifest;
    j["subset"] = args.subset;
  }
  j["out"] = args.out_dir;
  return j;
}

std::string fmt_opt(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", *v);
  return buf;
}

void print_report(const EvaluationReport& report) {
  std::printf("%-12s %-16s %10s %8s %8s %8s %8s %10s\n", "dataset", "class",
              "threshold", "auc", "auc_sel", "f1", "f1_sel", "rejection");
  auto line = [](const std::string& dataset, const std::string& cls,
                 const CellReport& cell, bool with_threshold = true) {
    char threshold[32] = "-";
    if (with_threshold)
      std::snprintf(threshold, sizeof(threshold), "%.4f", cell.threshold);
    std::printf("%-12s %-16s %10s %8s %8s %8s %8s %9.2f%%\n", dataset.c_str(),
                cls.c_str(), threshold, fmt_opt(cell.auc_baseline).c_str(),
                fmt_opt(cell.auc_selective).c_str(),
                fmt_opt(cell.f1_baseline).c_str(),
                fmt_opt(cell.f1_selective).c_str(),
                100.0 * cell.rejection_rate);
  };
  for (std::size_t s = 0; s < report.sources.size(); ++s)
    for (std::size_t c = 0; c < report.schema.class_names.size(); ++c)
      line(report.sources[s], report.schema.class_names[c],
           report.cells[s][c]);
  for (std::size_t c = 0; c < report.schema.class_names.size(); ++c)
    line("(all)", report.schema.class_names[c], report.per_class[c]);
  line("(all)", "(average)", report.average, /*with_threshold=*/false);
}

// --- subcommand payloads ---

struct CalibrateArgs {
  CommonArgs common;
  std::string mechanism = "entropy";
  std::string scope = "class-specific";
  std::string mode = "per-class";
  double theta = 0.5;
  double budget = 0.25;
  double grid_start = 75.0, grid_end = 95.0, grid_step = 2.5;
};

CalibrationConfig make_config(const CalibrateArgs& a) {
  CalibrationConfig config;
  config.mechanism = mechanism_from_string(a.mechanism);
  config.scope = scope_from_string(a.scope);
  config.mode = mode_from_string(a.mode);
  config.theta = a.theta;
  config.epsilon = a.budget;
  config.grid = {a.grid_start, a.grid_end, a.grid_step};
  config.validate();
  return config;
}

ordered_json config_json(const CalibrateArgs& a) {
  ordered_json j;
  j["mechanism"] = a.mechanism;
  j["scope"] = scope_from_string(a.scope) == Scope::global
                   ? "global"
                   : "class_specific";
  j["mode"] = mode_from_string(a.mode) == Mode::image_level ? "image_level"
                                                            : "per_class";
  j["theta"] = a.theta;
  j["budget"] = a.budget;
  j["grid"] = {{"start", a.grid_start},
               {"end", a.grid_end},
               {"step", a.grid_step}};
  return j;
}

int cmd_calibrate(const CalibrateArgs& args) {
  ensure_out_dir(args.common.out_dir);
  const CalibrationConfig config = make_config(args);
  const ScoreTable table = load_table(args.common, args.theta);
  const CalibrationResult result = calibrate(table, config);

  ordered_json run = common_json("calibrate", args.common);
  run.update(config_json(args));
  write_run_json(args.common.out_dir, run);

  write_artifact((fs::path(args.common.out_dir) / "thresholds.json").string(),
                 result.artifact);
  std::ostringstream sweep;
  write_sweep_csv(sweep, result.sweep, table.schema.class_names);
  write_text_file(fs::path(args.common.out_dir) / "calibration_sweep.csv",
                  sweep.str());

  if (args.common.pretty) {
    std::printf("%-16s %10s %10s\n", "class", "percentile", "threshold");
    for (std::size_t c = 0; c < result.artifact.class_names.size(); ++c)
      std::printf("%-16s %10.1f %10.6f\n",
                  result.artifact.class_names[c].c_str(),
                  result.artifact.percentile_for(c),
                  result.artifact.threshold_for(c));
    for (const auto& flag : result.artifact.flags)
      std::printf("flag: %s\n", flag.c_str());
  }
  return result.artifact.has_flag("BUDGET_INFEASIBLE") ? kExitBudgetInfeasible
                                                       : 0;
}

struct SimulateArgs {
  CommonArgs common;
  std::string spec_path;
  std::optional<std::uint64_t> seed;
};

int cmd_simulate(const SimulateArgs& args) {
  ensure_out_dir(args.common.out_dir);
  GeneratorSpec spec;
  if (!args.spec_path.empty()) {
    std::ifstream in(args.spec_path);
    if (!in)
      throw Error(ErrorCode::io_error, "cannot open file: " + args.spec_path);
    std::stringstream buf;
    buf << in.rdbuf();
    spec = GeneratorSpec::from_json(buf.str());
  }
  if (args.seed) spec.seed = *args.seed;

  const unsigned threads = resolve_threads(args.common.threads);
  const GeneratedTable generated = generate(spec, threads);
  const FileFormat format = format_from_string(args.common.format);

  ordered_json run = common_json("simulate", args.common);
  run.erase("scores");
  run["spec"] = ordered_json::parse(spec.to_json());
  run["threads"] = threads;
  write_run_json(args.common.out_dir, run);

  const char* scores_name =
      format == FileFormat::csv ? "scores.csv" : "scores.jsonl";
  write_scores((fs::path(args.common.out_dir) / scores_name).string(),
               generated.table, format);
  write_text_file(fs::path(args.common.out_dir) / "spec.json", spec.to_json());

  // Truth metadata: which cells came from the boundary component.
  std::ostringstream truth;
  truth << "sample_id";
  for (const auto& n : generated.table.schema.class_names)
    truth << ",boundary_" << n;
  truth << "\n";
  const std::size_t k = generated.table.n_classes();
  for (std::size_t i = 0; i < generated.table.n_samples(); ++i) {
    truth << generated.table.records[i].sample_id;
    for (std::size_t c = 0; c < k; ++c)
      truth << ',' << int(generated.boundary_cells[i * k + c]);
    truth << "\n";
  }
  write_text_file(fs::path(args.common.out_dir) / "truth.csv", truth.str());
  return 0;
}

struct SplitArgs {
  CommonArgs common;
  std::string strategy = "intra";
  double train_frac = 0.8;
  double cal_frac = 0.0;
  std::vector<std::string> held_out;
  std::uint64_t seed = 0;
  double theta = 0.5;
};

int cmd_split(const SplitArgs& args) {
  ensure_out_dir(args.common.out_dir);
  const ScoreTable table = load_table(args.common, args.theta);
  const SplitManifest manifest =
      make_split(table, split_strategy_from_string(args.strategy),
                 args.train_frac, args.cal_frac, args.held_out, args.seed);

  ordered_json run = common_json("split", args.common);
  run["strategy"] = to_string(manifest.strategy);
  run["train_frac"] = args.train_frac;
  run["cal_frac"] = args.cal_frac;
  run["held_out"] = args.held_out;
  run["seed"] = args.seed;
  run["theta"] = args.theta;
  write_run_json(args.common.out_dir, run);

  std::ostringstream out;
  write_manifest_csv(out, manifest);
  write_text_file(fs::path(args.common.out_dir) / "manifest.csv", out.str());
  return 0;
}

struct ArtifactArgs {
  CommonArgs common;
  std::string thresholds_path;
  std::uint64_t iterations = 1000;
  std::uint64_t seed = 0;
};

int cmd_apply(const ArtifactArgs& args) {
  ensure_out_dir(args.common.out_dir);
  const ThresholdArtifact artifact = read_artifact(args.thresholds_path);
  const ScoreTable table = load_table(args.common, artifact.theta);

  ordered_json run = common_json("apply", args.common);
  run["thresholds"] = args.thresholds_path;
  write_run_json(args.common.out_dir, run);

  if (artifact.schema_hash != table.schema.hash())
    throw Error(ErrorCode::schema_mismatch,
                "artifact fingerprint does not match the score file schema");
  const UncertaintyMatrix unc = score_uncertainty(table, artifact.mechanism);
  const SelectionMask mask = build_mask(unc, artifact, artifact.mode);

  std::ostringstream out;
  write_mask_csv(out, table, mask);
  write_text_file(fs::path(args.common.out_dir) / "mask.csv", out.str());
  return 0;
}

int cmd_evaluate(const ArtifactArgs& args) {
  ensure_out_dir(args.common.out_dir);
  const ThresholdArtifact artifact = read_artifact(args.thresholds_path);
  const ScoreTable table = load_table(args.common, artifact.theta);

  ordered_json run = common_json("evaluate", args.common);
  run["thresholds"] = args.thresholds_path;
  write_run_json(args.common.out_dir, run);

  const EvaluationReport report = evaluate(table, artifact);
  write_text_file(fs::path(args.common.out_dir) / "report.json",
                  report_to_json(report));
  std::ostringstream csv;
  write_report_csv(csv, report);
  write_text_file(fs::path(args.common.out_dir) / "report.csv", csv.str());
  if (args.common.pretty) print_report(report);
  return 0;
}

int cmd_bootstrap(const ArtifactArgs& args) {
  ensure_out_dir(args.common.out_dir);
  const ThresholdArtifact artifact = read_artifact(args.thresholds_path);
  const ScoreTable table = load_table(args.common, artifact.theta);
  const unsigned threads = resolve_threads(args.common.threads);

  ordered_json run = common_json("bootstrap", args.common);
  run["thresholds"] = args.thresholds_path;
  run["iterations"] = args.iterations;
  run["seed"] = args.seed;
  run["threads"] = threads;
  write_run_json(args.common.out_dir, run);

  const BootstrapResult result =
      bootstrap_f1(table, artifact, args.iterations, args.seed, threads);
  std::ostringstream samples;
  write_bootstrap_samples_csv(samples, result);
  write_text_file(fs::path(args.common.out_dir) / "bootstrap_samples.csv",
                  samples.str());
  write_text_file(fs::path(args.common.out_dir) / "bootstrap_summary.json",
                  bootstrap_summary_json(result));
  return 0;
}

int cmd_riskcov(const CalibrateArgs& args) {
  ensure_out_dir(args.common.out_dir);
  const CalibrationConfig config = make_config(args);
  const ScoreTable table = load_table(args.common, args.theta);

  ordered_json run = common_json("riskcov", args.common);
  run.update(config_json(args));
  write_run_json(args.common.out_dir, run);

  const auto sweep = risk_coverage_sweep(table, config);
  std::ostringstream csv;
  write_sweep_csv(csv, sweep, table.schema.class_names);
  write_text_file(fs::path(args.common.out_dir) / "risk_coverage.csv",
                  csv.str());
  return 0;
}

struct CompareArgs {
  CommonArgs common;
  std::string entropy_path;
  std::string interval_path;
};

int cmd_compare(const CompareArgs& args) {
  ensure_out_dir(args.common.out_dir);
  const ThresholdArtifact entropy = read_artifact(args.entropy_path);
  const ThresholdArtifact interval = read_artifact(args.interval_path);
  if (entropy.theta != interval.theta)
    throw Error(ErrorCode::schema_mismatch,
                "artifacts disagree on the decision boundary");
  const ScoreTable table = load_table(args.common, entropy.theta);

  ordered_json run = common_json("compare", args.common);
  run["entropy_thresholds"] = args.entropy_path;
  run["interval_thresholds"] = args.interval_path;
  write_run_json(args.common.out_dir, run);

  const MechanismComparison cmp = compare_mechanisms(table, entropy, interval);
  std::ostringstream csv;
  write_comparison_csv(csv, cmp);
  write_text_file(fs::path(args.common.out_dir) / "comparison.csv", csv.str());
  if (args.common.pretty) {
    std::printf("%-16s %8s %12s %12s\n", "class", "baseline", "interval",
                "entropy");
    auto line = [](const MechanismComparisonRow& r) {
      std::printf("%-16s %8s %12s %12s\n", r.class_name.c_str(),
                  fmt_opt(r.auc_baseline).c_str(),
                  fmt_opt(r.auc_interval).c_str(),
                  fmt_opt(r.auc_entropy).c_str());
    };
    for (const auto& r : cmp.rows) line(r);
    line(cmp.average);
  }
  return 0;
}

void add_common(CLI::App* cmd, CommonArgs& args, bool with_scores = true) {
  cmd->add_option("--out", args.out_dir, "output directory")->required();
  if (with_scores) {
    cmd->add_option("--scores", args.scores, "score file")->required();
    cmd->add_option("--format", args.format, "score file format (csv|jsonl)");
    cmd->add_option("--split", args.split_manifest,
                    "split manifest to filter the score file through");
    cmd->add_option("--subset", args.subset,
                    "which side of the split to keep (train|cal|eval)");
  }
  cmd->add_option("--threads", args.threads,
                  "worker threads (REJECTKIT_THREADS as fallback; output is "
                  "identical for any value)");
  cmd->add_flag("--pretty", args.pretty, "print a human-readable table");
}

void add_grid(CLI::App* cmd, CalibrateArgs& args) {
  cmd->add_option("--mechanism", args.mechanism, "entropy|interval");
  cmd->add_option("--scope", args.scope, "global|class-specific");
  cmd->add_option("--mode", args.mode, "image-level|per-class");
  cmd->add_option("--theta", args.theta, "decision boundary");
  cmd->add_option("--budget", args.budget, "rejection budget in (0,1]");
  cmd->add_option("--grid-start", args.grid_start, "first percentile");
  cmd->add_option("--grid-end", args.grid_end, "last percentile");
  cmd->add_option("--grid-step", args.grid_step, "percentile step");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "rejectkit: selective-prediction calibration and evaluation for "
      "multi-label classifier scores"};
  app.require_subcommand(1);

  SimulateArgs simulate_args;
  auto* simulate_cmd =
      app.add_subcommand("simulate", "generate a synthetic score file");
  add_common(simulate_cmd, simulate_args.common, /*with_scores=*/false);
  simulate_cmd->add_option("--spec", simulate_args.spec_path,
                           "generator spec JSON (defaults used if omitted)");
  simulate_cmd->add_option("--format", simulate_args.common.format,
                           "output format (csv|jsonl)");
  std::uint64_t simulate_seed = 0;
  auto* simulate_seed_opt = simulate_cmd->add_option(
      "--seed", simulate_seed, "override the spec seed");

  SplitArgs split_args;
  auto* split_cmd =
      app.add_subcommand("split", "write a train/cal/eval split manifest");
  add_common(split_cmd, split_args.common);
  split_cmd->add_option("--strategy", split_args.strategy, "intra|inter");
  split_cmd->add_option("--train-frac", split_args.train_frac,
                        "train fraction (intra)");
  split_cmd->add_option("--cal-frac", split_args.cal_frac,
                        "calibration fraction (intra, optional)");
  split_cmd->add_option("--held-out", split_args.held_out,
                        "held-out sources (inter)")
      ->delimiter(',');
  split_cmd->add_option("--seed", split_args.seed, "shuffle seed");
  split_cmd->add_option("--theta", split_args.theta, "decision boundary");

  CalibrateArgs calibrate_args;
  auto* calibrate_cmd =
      app.add_subcommand("calibrate", "choose rejection thresholds");
  add_common(calibrate_cmd, calibrate_args.common);
  add_grid(calibrate_cmd, calibrate_args);

  ArtifactArgs apply_args;
  auto* apply_cmd =
      app.add_subcommand("apply", "write the accept/reject mask");
  add_common(apply_cmd, apply_args.common);
  apply_cmd->add_option("--thresholds", apply_args.thresholds_path,
                        "threshold artifact JSON")
      ->required();

  ArtifactArgs evaluate_args;
  auto* evaluate_cmd = app.add_subcommand(
      "evaluate", "before/after metrics per source and class");
  add_common(evaluate_cmd, evaluate_args.common);
  evaluate_cmd->add_option("--thresholds", evaluate_args.thresholds_path,
                           "threshold artifact JSON")
      ->required();

  ArtifactArgs bootstrap_args;
  auto* bootstrap_cmd =
      app.add_subcommand("bootstrap", "bootstrap F1 distributions");
  add_common(bootstrap_cmd, bootstrap_args.common);
  bootstrap_cmd->add_option("--thresholds", bootstrap_args.thresholds_path,
                            "threshold artifact JSON")
      ->required();
  bootstrap_cmd->add_option("--iterations", bootstrap_args.iterations,
                            "bootstrap iterations");
  bootstrap_cmd->add_option("--seed", bootstrap_args.seed, "bootstrap seed");

  CalibrateArgs riskcov_args;
  auto* riskcov_cmd = app.add_subcommand(
      "riskcov", "risk/coverage sweep over the percentile grid");
  add_common(riskcov_cmd, riskcov_args.common);
  add_grid(riskcov_cmd, riskcov_args);

  CompareArgs compare_args;
  auto* compare_cmd = app.add_subcommand(
      "compare", "entropy vs interval selective AUC per class");
  add_common(compare_cmd, compare_args.common);
  compare_cmd
      ->add_option("--entropy-thresholds", compare_args.entropy_path,
                   "entropy artifact JSON")
      ->required();
  compare_cmd
      ->add_option("--interval-thresholds", compare_args.interval_path,
                   "interval artifact JSON")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints usage/help
    return code == 0 ? 0 : kExitInputError;
  }

  try {
    if (app.got_subcommand(simulate_cmd)) {
      if (simulate_seed_opt->count() > 0) simulate_args.seed = simulate_seed;
      return cmd_simulate(simulate_args);
    }
    if (app.got_subcommand(split_cmd)) return cmd_split(split_args);
    if (app.got_subcommand(calibrate_cmd)) return cmd_calibrate(calibrate_args);
    if (app.got_subcommand(apply_cmd)) return cmd_apply(apply_args);
    if (app.got_subcommand(evaluate_cmd)) return cmd_evaluate(evaluate_args);
    if (app.got_subcommand(bootstrap_cmd)) return cmd_bootstrap(bootstrap_args);
    if (app.got_subcommand(riskcov_cmd)) return cmd_riskcov(riskcov_args);
    if (app.got_subcommand(compare_cmd)) return cmd_compare(compare_args);
  } catch (const Error& e) {
    ordered_json err;
    err["error"] = e.code_name();
    err["message"] = e.what();
    std::cerr << err.dump() << "\n";
    return e.code() == ErrorCode::calibration_degenerate
               ? kExitCalibrationDegenerate
               : kExitInputError;
  } catch (const std::exception& e) {
    ordered_json err;
    err["error"] = "internal";
    err["message"] = e.what();
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}
