#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rejectkit/calibration.hpp"
#include "rejectkit/core.hpp"
#include "rejectkit/metrics.hpp"

namespace rejectkit {

// Before/after metrics for one (source, class) pair. Baseline covers every
// cell of the pair, selective only the retained ones. Undefined metrics stay
// null; they are never reported as zero.
struct CellReport {
  double threshold = 0.0;
  std::optional<double> auc_baseline;
  std::optional<double> auc_selective;
  std::optional<double> f1_baseline;
  std::optional<double> f1_selective;
  double rejection_rate = 0.0;
  std::size_t n_total = 0;
  std::size_t n_retained = 0;
};

struct EvaluationReport {
  ClassSchema schema;
  std::vector<std::string> sources;            // first-appearance order
  std::vector<std::vector<CellReport>> cells;  // [source][class]
  std::vector<CellReport> per_class;           // pooled across sources
  CellReport average;  // unweighted mean over defined per-class values
};

EvaluationReport evaluate(const ScoreTable& table,
                          const ThresholdArtifact& artifact);

struct BootstrapCell {
  std::string source;
  std::string class_name;
  std::vector<std::optional<double>> f1_baseline;   // one entry per iteration
  std::vector<std::optional<double>> f1_selective;
  std::size_t null_baseline = 0;
  std::size_t null_selective = 0;
  std::optional<double> ci_baseline_lo, ci_baseline_hi;
  std::optional<double> ci_selective_lo, ci_selective_hi;
  std::optional<double> ci_gap_lo, ci_gap_hi;  // selective - baseline, paired
  // Share of iterations where both F1s are defined and selective > baseline.
  double exceed_fraction = 0.0;
};

struct BootstrapResult {
  std::uint64_t iterations = 1000;
  std::uint64_t seed = 0;
  std::vector<BootstrapCell> cells;  // source-major, class-minor
};

// Non-parametric bootstrap of baseline and selective F1. Samples are redrawn
// with replacement within each source, keeping per-source counts; the mask is
// fixed and looked up per resampled sample. Iteration i draws from the stream
// seeded by derive_seed(seed, i) mixed with the source name, so results do
// not depend on execution order. threads only changes wall time.
BootstrapResult bootstrap_f1(const ScoreTable& table,
                             const ThresholdArtifact& artifact,
                             std::uint64_t iterations, std::uint64_t seed,
                             unsigned threads = 1);

// Percentile-grid sweep on the given table: thresholds are re-derived from
// this table's correct-prediction pools at every grid point.
std::vector<RiskCoveragePoint> risk_coverage_sweep(
    const ScoreTable& table, const CalibrationConfig& config);

struct MechanismComparisonRow {
  std::string class_name;
  std::optional<double> auc_baseline;
  std::optional<double> auc_interval;
  std::optional<double> auc_entropy;
};

struct MechanismComparison {
  std::vector<MechanismComparisonRow> rows;  // schema order
  MechanismComparisonRow average;            // unweighted mean of defined rows
};

// Side-by-side per-class AUC of the same table under no rejection and under
// each artifact. Both artifacts must match the table schema.
MechanismComparison compare_mechanisms(const ScoreTable& table,
                                       const ThresholdArtifact& entropy,
                                       const ThresholdArtifact& interval);

// Mean of defined values; nullopt when none are defined.
std::optional<double> mean_defined(
    const std::vector<std::optional<double>>& values);

}  // namespace rejectkit
