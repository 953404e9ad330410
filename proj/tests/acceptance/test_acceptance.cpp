// Acceptance suite. Each criterion prints one [PASS]/[FAIL] line with the
// numbers it measured; the binary fails if any criterion fails.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "rejectkit/calibration.hpp"
#include "rejectkit/evaluation.hpp"
#include "rejectkit/io.hpp"
#include "rejectkit/metrics.hpp"
#include "rejectkit/parallel.hpp"
#include "rejectkit/rejection.hpp"
#include "rejectkit/rng.hpp"
#include "rejectkit/synthgen.hpp"
#include "support/cli_harness.hpp"
#include "support/oracles.hpp"

using namespace rejectkit;
namespace fs = std::filesystem;

namespace {

unsigned worker_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 4 : std::min(hw, 8u);
}

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion,
              detail.c_str());
  std::fflush(stdout);
}

}  // namespace

TEST_CASE("criterion 1: entropy kernel") {
  const auto t0 = std::chrono::steady_clock::now();
  bool pass = std::abs(binary_entropy(0.5) - std::numbers::ln2) < 1e-12;
  for (int i = 0; i <= 1000 && pass; ++i) {
    const double p = i * 1e-3;
    pass = std::abs(binary_entropy(p) - binary_entropy(1.0 - p)) < 1e-12;
  }
  // the published operating range of entropy thresholds must fit in nats
  pass = pass && 0.0 <= 0.58 && 0.69 <= std::numbers::ln2;
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  pass = pass && secs < 1.0;
  std::ostringstream detail;
  detail << "H(0.5)=ln2, symmetric on the 1e-3 grid, [0.58,0.69] in [0,ln2], "
         << secs << "s";
  report(1, pass, detail.str());
  CHECK(pass);
}

TEST_CASE("criterion 2: AUC equals the pair-count oracle on 1000 instances") {
  const auto t0 = std::chrono::steady_clock::now();
  std::atomic<int> failures{0};
  std::vector<double> max_err(1000, 0.0);
  parallel_for(1000, worker_threads(), [&](std::size_t trial) {
    SplitMix64 rng(trial * 2654435761u + 17);
    const std::size_t n = 1 + rng.bounded(200);
    const bool ties = trial % 2 == 0;
    std::vector<double> scores(n);
    std::vector<std::uint8_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = ties ? double(rng.bounded(9)) / 8.0 : rng.uniform01();
      labels[i] = rng.uniform01() < 0.4 ? 1 : 0;
    }
    const auto fast = auc(scores, labels);
    const auto slow = testing::auc_pair_oracle(scores, labels);
    if (fast.has_value() != slow.has_value()) {
      ++failures;
      return;
    }
    if (fast) {
      max_err[trial] = std::abs(*fast - *slow);
      if (max_err[trial] >= 1e-12) ++failures;
    }
  });
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  const double worst = *std::max_element(max_err.begin(), max_err.end());
  const bool pass = failures == 0 && secs < 30.0;
  std::ostringstream detail;
  detail << "1000 instances (n<=200, ties injected), max |fast-oracle| = "
         << worst << ", " << secs << "s";
  report(2, pass, detail.str());
  CHECK(pass);
}

TEST_CASE("criterion 3: coverage monotone over a 50-point threshold grid") {
  std::atomic<int> violations{0};
  parallel_for(100, worker_threads(), [&](std::size_t t) {
    auto table = testing::random_table(120, 3, t * 31 + 7);
    auto ent = score_uncertainty(table, Mechanism::entropy);
    auto inv = score_uncertainty(table, Mechanism::interval);
    ThresholdArtifact artifact;
    artifact.scope = Scope::global;
    artifact.percentiles = {0.0};
    auto accepted = [](const SelectionMask& m) {
      std::size_t n = 0;
      for (auto v : m.accepted) n += v;
      return n;
    };
    std::size_t prev_ent = 0, prev_inv = SIZE_MAX;
    for (int step = 0; step <= 50; ++step) {
      artifact.mechanism = Mechanism::entropy;
      artifact.thresholds = {std::numbers::ln2 * step / 50.0};
      const auto a = accepted(build_mask(ent, artifact, Mode::per_class));
      artifact.mechanism = Mechanism::interval;
      artifact.thresholds = {0.5 * step / 50.0};
      const auto b = accepted(build_mask(inv, artifact, Mode::per_class));
      if (a < prev_ent) ++violations;
      if (b > prev_inv) ++violations;
      prev_ent = a;
      prev_inv = b;
    }
  });
  const bool pass = violations == 0;
  std::ostringstream detail;
  detail << "100 tables x 50 thresholds x 2 mechanisms, " << violations
         << " violations";
  report(3, pass, detail.str());
  CHECK(pass);
}

TEST_CASE("criterion 4: interval mask equals the two-endpoint test") {
  std::atomic<int> mismatches{0};
  parallel_for(20, worker_threads(), [&](std::size_t t) {
    auto table = testing::random_table(500, 4, t * 97 + 3);
    SplitMix64 rng(t);
    std::vector<double> deltas;
    for (std::size_t c = 0; c < 4; ++c)
      deltas.push_back(rng.uniform01() * 0.5);
    ThresholdArtifact artifact;
    artifact.mechanism = Mechanism::interval;
    artifact.scope = Scope::class_specific;
    artifact.thresholds = deltas;
    artifact.percentiles.assign(4, 0.0);
    auto mask = build_mask(score_uncertainty(table, Mechanism::interval),
                           artifact, Mode::per_class);
    for (std::size_t i = 0; i < table.n_samples(); ++i) {
      for (std::size_t c = 0; c < 4; ++c) {
        const double p = table.records[i].probs[c];
        const bool direct = (p - deltas[c] > 0.5) || (p + deltas[c] < 0.5);
        if (mask.cell(i, c) != direct) ++mismatches;
      }
    }
  });
  const bool pass = mismatches == 0;
  std::ostringstream detail;
  detail << "20 tables x 500 samples x 4 classes, " << mismatches
         << " mismatching cells";
  report(4, pass, detail.str());
  CHECK(pass);
}

namespace {

struct TrialOutcome {
  bool budget_cal = false;   // per-class rejection <= 0.25 on the cal split
  bool budget_eval = false;  // per-class rejection <= 0.30 on the eval split
  bool improved_all = false; // selective AUC > baseline for every class
  double mean_improvement = 0.0;
};

TrialOutcome run_budget_trial(std::uint64_t seed) {
  GeneratorSpec spec;  // defaults: n=20000, imbalanced prevalences, w=0.3
  spec.seed = derive_seed(0xACCE97, seed);
  auto table = generate(spec).table;
  auto manifest = make_split(table, SplitStrategy::intra_source, 0.8, 0.0, {},
                             derive_seed(0x59717, seed));
  auto cal = filter_by_assignment(table, manifest, Assignment::train);
  auto eval_side = filter_by_assignment(table, manifest, Assignment::eval);

  CalibrationConfig config;  // entropy, class_specific, per_class, eps=0.25
  auto artifact = calibrate(cal, config).artifact;

  TrialOutcome out;
  if (artifact.has_flag("BUDGET_INFEASIBLE")) return out;

  auto rates_on = [&](const ScoreTable& t) {
    auto mask = build_mask(score_uncertainty(t, artifact.mechanism), artifact,
                           artifact.mode);
    return per_class_rejection_rates(mask);
  };
  const auto cal_rates = rates_on(cal);
  const auto eval_rates = rates_on(eval_side);
  out.budget_cal = std::all_of(cal_rates.begin(), cal_rates.end(),
                               [](double r) { return r <= 0.25; });
  out.budget_eval = std::all_of(eval_rates.begin(), eval_rates.end(),
                                [](double r) { return r <= 0.30; });

  auto report_eval = evaluate(eval_side, artifact);
  out.improved_all = true;
  double gain = 0.0;
  std::size_t defined = 0;
  for (const auto& cell : report_eval.per_class) {
    if (!cell.auc_selective || !cell.auc_baseline) {
      out.improved_all = false;
      continue;
    }
    out.improved_all &= *cell.auc_selective > *cell.auc_baseline;
    gain += *cell.auc_selective - *cell.auc_baseline;
    ++defined;
  }
  if (defined > 0) out.mean_improvement = gain / double(defined);
  return out;
}

std::vector<TrialOutcome> budget_trials() {
  static std::vector<TrialOutcome> cached = [] {
    std::vector<TrialOutcome> outcomes(100);
    parallel_for(100, worker_threads(),
                 [&](std::size_t t) { outcomes[t] = run_budget_trial(t); });
    return outcomes;
  }();
  return cached;
}

}  // namespace

TEST_CASE("criterion 5: class-specific calibration respects the budget") {
  const auto outcomes = budget_trials();
  int ok = 0;
  for (const auto& o : outcomes) ok += o.budget_cal && o.budget_eval;
  const bool pass = ok >= 95;
  std::ostringstream detail;
  detail << ok << "/100 trials with per-class rejection <= 0.25 (cal) and "
            "<= 0.30 (eval) at eps=0.25, n=20000";
  report(5, pass, detail.str());
  CHECK(pass);
}

TEST_CASE("criterion 6: selective AUC beats baseline at the operating point") {
  const auto outcomes = budget_trials();
  int ok = 0;
  double mean_gain = 0.0;
  for (const auto& o : outcomes) {
    ok += o.improved_all;
    mean_gain += o.mean_improvement;
  }
  mean_gain /= outcomes.size();
  const bool pass = ok >= 95 && mean_gain >= 0.01;
  std::ostringstream detail;
  detail << ok << "/100 trials improved every class (w=0.3); mean AUC gain "
         << mean_gain;
  report(6, pass, detail.str());
  CHECK(pass);
}

TEST_CASE("criterion 7: comparison fixture re-aggregation") {
  const std::string fixture =
      "class,auc_baseline,auc_interval,auc_entropy\n"
      "Cardiomegaly,0.76,0.76,0.79\n"
      "Effusion,0.79,0.87,0.86\n"
      "Edema,0.73,0.73,0.79\n"
      "Consolidation,0.87,0.81,0.77\n";
  std::istringstream in(fixture);
  const auto rows = read_comparison_csv(in);
  std::vector<std::optional<double>> base, inv, ent;
  for (const auto& r : rows) {
    base.push_back(r.auc_baseline);
    inv.push_back(r.auc_interval);
    ent.push_back(r.auc_entropy);
  }
  const double mean_base = *mean_defined(base);
  const double mean_inv = *mean_defined(inv);
  const double mean_ent = *mean_defined(ent);
  const bool pass = std::abs(mean_base - 0.79) <= 0.005 &&
                    std::abs(mean_inv - 0.81) <= 0.005 &&
                    std::abs(mean_ent - 0.83) <= 0.005;
  std::ostringstream detail;
  detail << "recomputed means " << mean_base << " / " << mean_inv << " / "
         << mean_ent << " vs published 0.79 / 0.81 / 0.83 (tolerance 0.005)";
  report(7, pass, detail.str());
  CHECK(pass);
}

namespace {

// Stratified single-class population with an exactly known selective-vs-
// baseline F1 gap. Accepted cells are p in {0.9, 0.1}; p = 0.55 has entropy
// above the tau=0.5 threshold and is rejected.
//
//   stratum               weight   baseline role   selective role
//   p=0.90, label=1        0.33    TP              TP
//   p=0.90, label=0        0.03    FP              FP
//   p=0.10, label=0        0.32    TN              TN
//   p=0.10, label=1        0.02    FN              FN
//   p=0.55, label=1        0.10    TP              rejected
//   p=0.55, label=0        0.20    FP              rejected
//
// F1_base = 2(.43)/(2(.43)+.23+.02) = 86/111, F1_sel = 66/71.
constexpr double kTrueGap = 66.0 / 71.0 - 86.0 / 111.0;

ScoreTable gap_population_sample(std::size_t n, std::uint64_t seed) {
  ClassSchema schema{{"finding"}, 0.5};
  std::vector<PredictionRecord> records;
  records.reserve(n);
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform01();
    double p;
    std::uint8_t label;
    if (u < 0.33) {
      p = 0.9; label = 1;
    } else if (u < 0.36) {
      p = 0.9; label = 0;
    } else if (u < 0.68) {
      p = 0.1; label = 0;
    } else if (u < 0.70) {
      p = 0.1; label = 1;
    } else if (u < 0.80) {
      p = 0.55; label = 1;
    } else {
      p = 0.55; label = 0;
    }
    records.push_back({"s" + std::to_string(i), "synthetic", {p}, {label}});
  }
  return make_table(std::move(records), schema);
}

ThresholdArtifact gap_artifact(const ScoreTable& table) {
  ThresholdArtifact a;
  a.mechanism = Mechanism::entropy;
  a.scope = Scope::global;
  a.mode = Mode::per_class;
  a.theta = 0.5;
  a.class_names = table.schema.class_names;
  a.thresholds = {0.5};
  a.percentiles = {90.0};
  a.schema_hash = table.schema.hash();
  a.n_calibration_records = table.n_samples();
  return a;
}

}  // namespace

TEST_CASE("criterion 8: bootstrap determinism and CI coverage") {
  const auto t0 = std::chrono::steady_clock::now();

  // determinism at the stated size
  auto table = gap_population_sample(5000, 1234);
  auto artifact = gap_artifact(table);
  auto a = bootstrap_f1(table, artifact, 1000, 7, worker_threads());
  auto b = bootstrap_f1(table, artifact, 1000, 7, 1);
  std::ostringstream ca, cb;
  write_bootstrap_samples_csv(ca, a);
  write_bootstrap_samples_csv(cb, b);
  const bool deterministic = ca.str() == cb.str() &&
                             bootstrap_summary_json(a) ==
                                 bootstrap_summary_json(b);

  // CI coverage of the known gap across fresh draws
  std::vector<std::uint8_t> covered(100, 0);
  parallel_for(100, worker_threads(), [&](std::size_t t) {
    auto sample = gap_population_sample(5000, derive_seed(0xB007, t));
    auto result =
        bootstrap_f1(sample, gap_artifact(sample), 1000, derive_seed(7, t), 1);
    const auto& cell = result.cells[0];
    if (cell.ci_gap_lo && cell.ci_gap_hi)
      covered[t] = *cell.ci_gap_lo <= kTrueGap && kTrueGap <= *cell.ci_gap_hi;
  });
  int coverage = 0;
  for (auto c : covered) coverage += c;

  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  const bool pass = deterministic && coverage >= 90 && secs < 300.0;
  std::ostringstream detail;
  detail << "same seed byte-identical: " << (deterministic ? "yes" : "NO")
         << "; 95% CI covered the true gap " << kTrueGap << " in " << coverage
         << "/100 meta-trials; " << secs << "s";
  report(8, pass, detail.str());
  CHECK(pass);
}

TEST_CASE("criterion 9: round-trip identity and split integrity") {
  GeneratorSpec spec;
  spec.n_samples = 10000;
  spec.seed = 424242;
  auto table = generate(spec, worker_threads()).table;

  bool round_trip_ok = true;
  for (auto format : {FileFormat::csv, FileFormat::jsonl}) {
    std::ostringstream out;
    write_scores(out, table, format);
    std::istringstream in(out.str());
    auto back = read_scores(in, format, table.schema);
    round_trip_ok &= back.n_samples() == table.n_samples();
    for (std::size_t i = 0; i < table.n_samples() && round_trip_ok; ++i) {
      round_trip_ok = back.records[i].sample_id == table.records[i].sample_id &&
                      back.records[i].source == table.records[i].source &&
                      back.records[i].probs == table.records[i].probs &&
                      back.records[i].labels == table.records[i].labels;
    }
  }

  bool split_ok = true;
  double worst_eval_gap = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto manifest =
        make_split(table, SplitStrategy::intra_source, 0.8, 0.0, {}, seed);
    split_ok &= manifest.assignments.size() == table.n_samples();
    std::unordered_map<std::string, Assignment> by_id;
    for (const auto& [id, assignment] : manifest.assignments) {
      split_ok &= by_id.emplace(id, assignment).second;  // no duplicates
    }
    std::unordered_map<std::string, std::pair<std::size_t, std::size_t>> counts;
    for (const auto& rec : table.records) {
      const auto it = by_id.find(rec.sample_id);
      if (it == by_id.end()) {
        split_ok = false;
        continue;
      }
      auto& [total, n_eval] = counts[rec.source];
      ++total;
      n_eval += it->second == Assignment::eval;
    }
    for (const auto& [source, c] : counts) {
      (void)source;
      const double gap = std::abs(double(c.second) - 0.2 * double(c.first));
      worst_eval_gap = std::max(worst_eval_gap, gap);
      split_ok &= gap <= 1.0;
    }
  }

  const bool pass = round_trip_ok && split_ok;
  std::ostringstream detail;
  detail << "10000-record CSV+JSONL round-trip "
         << (round_trip_ok ? "exact" : "BROKEN")
         << "; 10 seeded splits partition exactly, worst per-source eval "
            "deviation "
         << worst_eval_gap << " samples";
  report(9, pass, detail.str());
  CHECK(pass);
}

TEST_CASE("criterion 10: end-to-end byte reproducibility") {
  testing::TempDir tmp("acceptance_e2e");
  const std::vector<std::string> pipeline = {
      "simulate --out sim --seed 21 --threads 1",
      "split --scores sim/scores.csv --strategy intra --train-frac 0.8 "
      "--seed 3 --out split",
      "calibrate --scores sim/scores.csv --split split/manifest.csv --subset "
      "train --mechanism entropy --scope class-specific --budget 0.25 --out "
      "cal",
      "calibrate --scores sim/scores.csv --split split/manifest.csv --subset "
      "train --mechanism interval --scope class-specific --budget 0.25 --out "
      "cal_iv",
      "apply --scores sim/scores.csv --split split/manifest.csv --subset eval "
      "--thresholds cal/thresholds.json --out mask",
      "evaluate --scores sim/scores.csv --split split/manifest.csv --subset "
      "eval --thresholds cal/thresholds.json --out eval",
      "bootstrap --scores sim/scores.csv --split split/manifest.csv --subset "
      "eval --thresholds cal/thresholds.json --iterations 300 --seed 9 "
      "--threads 1 --out boot",
      "riskcov --scores sim/scores.csv --split split/manifest.csv --subset "
      "eval --out riskcov",
      "compare --scores sim/scores.csv --split split/manifest.csv --subset "
      "eval --entropy-thresholds cal/thresholds.json --interval-thresholds "
      "cal_iv/thresholds.json --out cmp",
  };

  auto run_pipeline = [&](const std::string& root, unsigned threads) {
    fs::create_directories(tmp.path() / root);
    for (auto cmd : pipeline) {
      if (threads != 1) {
        // swap every --threads 1 for the requested count
        std::string needle = "--threads 1";
        for (auto pos = cmd.find(needle); pos != std::string::npos;
             pos = cmd.find(needle, pos))
          cmd.replace(pos, needle.size(),
                      "--threads " + std::to_string(threads));
      }
      if (testing::run_cli_in(tmp.path() / root, cmd) != 0) return false;
    }
    return true;
  };

  bool pass = run_pipeline("a", 1) && run_pipeline("b", 1) &&
              run_pipeline("c", 8);

  std::size_t files_compared = 0;
  std::string first_difference;
  if (pass) {
    for (auto& entry : fs::recursive_directory_iterator(tmp.path() / "a")) {
      if (!entry.is_regular_file()) continue;
      const auto rel = fs::relative(entry.path(), tmp.path() / "a");
      const auto bytes = testing::slurp(entry.path());
      // identical command lines: everything matches, run.json included
      if (bytes != testing::slurp(tmp.path() / "b" / rel)) {
        pass = false;
        first_difference = (fs::path("b") / rel).string();
        break;
      }
      // different --threads: artifacts match, run.json records the flag
      if (rel.filename() != "run.json" &&
          bytes != testing::slurp(tmp.path() / "c" / rel)) {
        pass = false;
        first_difference = (fs::path("c") / rel).string();
        break;
      }
      ++files_compared;
    }
    pass = pass && files_compared >= 15;
  }
  std::ostringstream detail;
  if (first_difference.empty())
    detail << "two identical runs and a --threads 8 run agree byte-for-byte "
              "across "
           << files_compared << " artifacts";
  else
    detail << "first divergent artifact: " << first_difference;
  report(10, pass, detail.str());
  CHECK(pass);
}
