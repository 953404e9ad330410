#pragma once

#include <optional>
#include <span>
#include <vector>

#include "rejectkit/core.hpp"

namespace rejectkit {

struct PercentileGrid {
  double start = 75.0;
  double end = 95.0;
  double step = 2.5;

  // start, start+step, ... up to end inclusive.
  std::vector<double> points() const;
  void validate() const;
};

struct CalibrationConfig {
  Mechanism mechanism = Mechanism::entropy;
  Scope scope = Scope::class_specific;
  Mode mode = Mode::per_class;
  PercentileGrid grid;
  double epsilon = 0.25;  // rejection budget
  double theta = 0.5;

  void validate() const;
};

// One grid point of the accuracy/coverage sweep. The baseline endpoint row
// (accept everything) carries no percentile and unit coverage so plots have
// an anchor at full coverage.
struct RiskCoveragePoint {
  std::optional<double> percentile;  // nullopt on the baseline endpoint
  std::vector<double> thresholds;    // empty on the baseline endpoint
  double coverage = 1.0;             // 1 - mean per-class rejection rate
  double rejection_rate = 0.0;
  std::vector<double> class_rejection_rates;
  std::vector<std::optional<double>> auc_per_class;
  std::vector<std::optional<double>> f1_per_class;
  std::optional<double> mean_auc;  // unweighted over defined classes
  std::size_t n_excluded_classes = 0;
};

struct CalibrationResult {
  ThresholdArtifact artifact;
  std::vector<RiskCoveragePoint> sweep;
};

// Per-class uncertainty values of the samples whose thresholded prediction
// (p >= theta) matches the label for that class. Empty pools are returned
// empty; calibrate() applies the global-pool fallback.
std::vector<std::vector<double>> correct_prediction_pools(
    const ScoreTable& table, Mechanism mechanism);

// Linear-interpolation percentile: q=0 gives the minimum, q=100 the maximum,
// interior q interpolates order statistics at rank (n-1)*q/100.
double quantile(std::span<const double> values, double q);

// Candidate thresholds at percentile q. Entropy takes the q-th percentile of
// each pool (acceptance region is low entropy); interval takes the mirrored
// (100-q)-th percentile (acceptance region is high margin). Global scope
// pools every class together first and yields a single value.
std::vector<double> threshold_from_percentile(
    const std::vector<std::vector<double>>& pools, double q,
    Mechanism mechanism, Scope scope);

// Grid sweep without winner selection; also the engine behind calibrate and
// the evaluation-side risk/coverage export. Appends the baseline endpoint.
std::vector<RiskCoveragePoint> sweep_percentile_grid(
    const ScoreTable& table, const CalibrationConfig& config);

// Quantile calibration: sweeps the grid, keeps percentiles whose measured
// rejection rate fits the budget, and picks the AUC-maximizing one (each
// class independently under class_specific scope). Ties prefer higher
// coverage, then the lower percentile. An infeasible budget falls back to
// the lowest-rejection point and flags BUDGET_INFEASIBLE.
CalibrationResult calibrate(const ScoreTable& table,
                            const CalibrationConfig& config);

}  // namespace rejectkit
