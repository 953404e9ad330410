#include "rejectkit/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rejectkit/metrics.hpp"
#include "rejectkit/rejection.hpp"

namespace rejectkit {

std::vector<double> PercentileGrid::points() const {
  validate();
  std::vector<double> out;
  const auto count =
      static_cast<std::size_t>(std::floor((end - start) / step + 1e-9)) + 1;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(start + step * i);
  return out;
}

void PercentileGrid::validate() const {
  if (!(start > 0.0 && start <= end && end <= 100.0 && step > 0.0))
    throw Error(ErrorCode::invalid_config,
                "percentile grid must satisfy 0 < start <= end <= 100, step > 0");
}

void CalibrationConfig::validate() const {
  grid.validate();
  if (!(epsilon > 0.0 && epsilon <= 1.0))
    throw Error(ErrorCode::invalid_config, "rejection budget outside (0,1]");
  if (!(theta > 0.0 && theta < 1.0))
    throw Error(ErrorCode::invalid_config, "decision boundary outside (0,1)");
}

std::vector<std::vector<double>> correct_prediction_pools(
    const ScoreTable& table, Mechanism mechanism) {
  const double theta = table.schema.theta;
  const std::size_t k = table.n_classes();
  std::vector<std::vector<double>> pools(k);
  const UncertaintyMatrix unc = score_uncertainty(table, mechanism);
  for (std::size_t i = 0; i < table.n_samples(); ++i) {
    const auto& rec = table.records[i];
    for (std::size_t c = 0; c < k; ++c) {
      const bool pred = rec.probs[c] >= theta;
      if (pred == (rec.labels[c] != 0)) pools[c].push_back(unc.cell(i, c));
    }
  }
  return pools;
}

double quantile(std::span<const double> values, double q) {
  if (values.empty())
    throw Error(ErrorCode::empty_input, "quantile of an empty list");
  if (!(q >= 0.0 && q <= 100.0))
    throw Error(ErrorCode::domain, "percentile outside [0,100]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<double> threshold_from_percentile(
    const std::vector<std::vector<double>>& pools, double q,
    Mechanism mechanism, Scope scope) {
  const double eff_q = mechanism == Mechanism::entropy ? q : 100.0 - q;
  if (scope == Scope::global) {
    std::vector<double> merged;
    for (const auto& pool : pools)
      merged.insert(merged.end(), pool.begin(), pool.end());
    if (merged.empty())
      throw Error(ErrorCode::empty_pool, "no correct predictions to pool");
    return {quantile(merged, eff_q)};
  }
  std::vector<double> out;
  out.reserve(pools.size());
  for (const auto& pool : pools) {
    if (pool.empty())
      throw Error(ErrorCode::empty_pool, "empty per-class pool");
    out.push_back(quantile(pool, eff_q));
  }
  return out;
}

namespace {

// Pools with the global fallback already applied; remembers which classes
// needed it.
struct ResolvedPools {
  std::vector<std::vector<double>> per_class;
  std::vector<double> global_pool;
  std::vector<std::size_t> fell_back;
};

ResolvedPools resolve_pools(const ScoreTable& table, Mechanism mechanism) {
  ResolvedPools out;
  out.per_class = correct_prediction_pools(table, mechanism);
  for (const auto& pool : out.per_class)
    out.global_pool.insert(out.global_pool.end(), pool.begin(), pool.end());
  if (out.global_pool.empty())
    throw Error(ErrorCode::empty_pool,
                "table has no correctly classified cells to calibrate on");
  for (std::size_t c = 0; c < out.per_class.size(); ++c) {
    if (out.per_class[c].empty()) {
      out.fell_back.push_back(c);
      out.per_class[c] = out.global_pool;
    }
  }
  return out;
}

std::vector<double> thresholds_at(const ResolvedPools& pools, double q,
                                  Mechanism mechanism, Scope scope) {
  const double eff_q = mechanism == Mechanism::entropy ? q : 100.0 - q;
  if (scope == Scope::global) return {quantile(pools.global_pool, eff_q)};
  std::vector<double> out;
  out.reserve(pools.per_class.size());
  for (const auto& pool : pools.per_class)
    out.push_back(quantile(pool, eff_q));
  return out;
}

RiskCoveragePoint evaluate_point(const ScoreTable& table,
                                 const UncertaintyMatrix& unc,
                                 const CalibrationConfig& config,
                                 std::vector<double> thresholds, double q) {
  ThresholdArtifact candidate;
  candidate.mechanism = config.mechanism;
  candidate.scope = config.scope;
  candidate.mode = config.mode;
  candidate.theta = config.theta;
  candidate.epsilon = config.epsilon;
  candidate.thresholds = thresholds;

  const SelectionMask mask = build_mask(unc, candidate, config.mode);

  RiskCoveragePoint point;
  point.percentile = q;
  point.thresholds = std::move(thresholds);
  point.class_rejection_rates = per_class_rejection_rates(mask);

  const std::size_t k = table.n_classes();
  point.auc_per_class.resize(k);
  point.f1_per_class.resize(k);
  double auc_sum = 0.0;
  std::size_t auc_defined = 0;
  std::vector<double> probs;
  std::vector<std::uint8_t> labels;
  for (std::size_t c = 0; c < k; ++c) {
    probs.clear();
    labels.clear();
    for (std::size_t i = 0; i < table.n_samples(); ++i) {
      if (!mask.cell(i, c)) continue;
      probs.push_back(table.records[i].probs[c]);
      labels.push_back(table.records[i].labels[c]);
    }
    point.auc_per_class[c] = probs.empty() ? std::nullopt : auc(probs, labels);
    point.f1_per_class[c] =
        probs.empty() ? std::nullopt
                      : f1_at_boundary(probs, labels, config.theta);
    if (point.auc_per_class[c]) {
      auc_sum += *point.auc_per_class[c];
      ++auc_defined;
    } else {
      ++point.n_excluded_classes;
    }
  }
  if (auc_defined > 0)
    point.mean_auc = auc_sum / static_cast<double>(auc_defined);

  double rate_sum = 0.0;
  for (double r : point.class_rejection_rates) rate_sum += r;
  point.rejection_rate = rate_sum / static_cast<double>(k);
  point.coverage = 1.0 - point.rejection_rate;
  return point;
}

RiskCoveragePoint baseline_endpoint(const ScoreTable& table, double theta) {
  RiskCoveragePoint point;
  const std::size_t k = table.n_classes();
  point.auc_per_class.resize(k);
  point.f1_per_class.resize(k);
  point.class_rejection_rates.assign(k, 0.0);
  double auc_sum = 0.0;
  std::size_t auc_defined = 0;
  std::vector<double> probs(table.n_samples());
  std::vector<std::uint8_t> labels(table.n_samples());
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < table.n_samples(); ++i) {
      probs[i] = table.records[i].probs[c];
      labels[i] = table.records[i].labels[c];
    }
    point.auc_per_class[c] = auc(probs, labels);
    point.f1_per_class[c] = f1_at_boundary(probs, labels, theta);
    if (point.auc_per_class[c]) {
      auc_sum += *point.auc_per_class[c];
      ++auc_defined;
    } else {
      ++point.n_excluded_classes;
    }
  }
  if (auc_defined > 0)
    point.mean_auc = auc_sum / static_cast<double>(auc_defined);
  return point;
}

// Total order used for winner selection: AUC, then coverage, then the lower
// percentile index. Undefined AUC loses to anything defined.
bool better(const std::optional<double>& auc_a, double coverage_a,
            std::size_t idx_a, const std::optional<double>& auc_b,
            double coverage_b, std::size_t idx_b) {
  const double a = auc_a.value_or(-std::numeric_limits<double>::infinity());
  const double b = auc_b.value_or(-std::numeric_limits<double>::infinity());
  if (a != b) return a > b;
  if (coverage_a != coverage_b) return coverage_a > coverage_b;
  return idx_a < idx_b;
}

}  // namespace

std::vector<RiskCoveragePoint> sweep_percentile_grid(
    const ScoreTable& table, const CalibrationConfig& config) {
  config.validate();
  if (table.records.empty())
    throw Error(ErrorCode::empty_table, "cannot sweep an empty table");
  if (table.schema.theta != config.theta)
    throw Error(ErrorCode::invalid_config,
                "config boundary does not match table schema boundary");

  const ResolvedPools pools = resolve_pools(table, config.mechanism);
  const UncertaintyMatrix unc = score_uncertainty(table, config.mechanism);

  std::vector<RiskCoveragePoint> sweep;
  const auto grid = config.grid.points();
  sweep.reserve(grid.size() + 1);
  for (double q : grid) {
    sweep.push_back(evaluate_point(
        table, unc, config,
        thresholds_at(pools, q, config.mechanism, config.scope), q));
  }
  sweep.push_back(baseline_endpoint(table, config.theta));
  return sweep;
}

CalibrationResult calibrate(const ScoreTable& table,
                            const CalibrationConfig& config) {
  config.validate();
  if (table.records.empty())
    throw Error(ErrorCode::empty_table, "cannot calibrate on an empty table");
  if (table.schema.theta != config.theta)
    throw Error(ErrorCode::invalid_config,
                "config boundary does not match table schema boundary");

  const std::size_t k = table.n_classes();

  // Classes whose baseline AUC is undefined cannot contribute to the
  // objective; they still receive thresholds via budget-only selection.
  std::vector<bool> scoreable(k, false);
  std::size_t n_scoreable = 0;
  for (std::size_t c = 0; c < k; ++c) {
    bool has_pos = false, has_neg = false;
    for (const auto& rec : table.records) {
      (rec.labels[c] ? has_pos : has_neg) = true;
      if (has_pos && has_neg) break;
    }
    scoreable[c] = has_pos && has_neg;
    n_scoreable += scoreable[c] ? 1 : 0;
  }
  if (n_scoreable == 0)
    throw Error(ErrorCode::calibration_degenerate,
                "no class has both a positive and a negative label");

  const ResolvedPools pools = resolve_pools(table, config.mechanism);
  const UncertaintyMatrix unc = score_uncertainty(table, config.mechanism);

  const auto grid = config.grid.points();
  std::vector<RiskCoveragePoint> sweep;
  sweep.reserve(grid.size() + 1);
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    sweep.push_back(evaluate_point(
        table, unc, config,
        thresholds_at(pools, grid[gi], config.mechanism, config.scope),
        grid[gi]));
  }

  ThresholdArtifact artifact;
  artifact.mechanism = config.mechanism;
  artifact.scope = config.scope;
  artifact.mode = config.mode;
  artifact.theta = config.theta;
  artifact.epsilon = config.epsilon;
  artifact.class_names = table.schema.class_names;
  artifact.n_calibration_records = table.n_samples();
  artifact.schema_hash = table.schema.hash();
  for (std::size_t c : pools.fell_back)
    artifact.flags.push_back("EMPTY_POOL_FALLBACK:" +
                             table.schema.class_names[c]);
  for (std::size_t c = 0; c < k; ++c) {
    if (!scoreable[c])
      artifact.flags.push_back("AUC_UNDEFINED:" + table.schema.class_names[c]);
  }

  bool budget_infeasible = false;

  if (config.scope == Scope::global) {
    // Mean selective AUC subject to the mean per-class rejection rate.
    std::size_t winner = grid.size();
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
      if (sweep[gi].rejection_rate > config.epsilon) continue;
      if (winner == grid.size() ||
          better(sweep[gi].mean_auc, sweep[gi].coverage, gi,
                 sweep[winner].mean_auc, sweep[winner].coverage, winner))
        winner = gi;
    }
    if (winner == grid.size()) {
      budget_infeasible = true;
      winner = 0;
      for (std::size_t gi = 1; gi < grid.size(); ++gi) {
        if (sweep[gi].rejection_rate < sweep[winner].rejection_rate)
          winner = gi;
      }
    }
    artifact.thresholds = {sweep[winner].thresholds.at(0)};
    artifact.percentiles = {grid[winner]};
  } else {
    // Each class picks its own percentile on its own AUC and rate.
    artifact.thresholds.resize(k);
    artifact.percentiles.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
      std::size_t winner = grid.size();
      for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        if (sweep[gi].class_rejection_rates[c] > config.epsilon) continue;
        const auto cand_auc =
            scoreable[c] ? sweep[gi].auc_per_class[c] : std::nullopt;
        const double cand_cov = 1.0 - sweep[gi].class_rejection_rates[c];
        if (winner == grid.size()) {
          winner = gi;
          continue;
        }
        const auto best_auc =
            scoreable[c] ? sweep[winner].auc_per_class[c] : std::nullopt;
        const double best_cov = 1.0 - sweep[winner].class_rejection_rates[c];
        if (better(cand_auc, cand_cov, gi, best_auc, best_cov, winner))
          winner = gi;
      }
      if (winner == grid.size()) {
        budget_infeasible = true;
        winner = 0;
        for (std::size_t gi = 1; gi < grid.size(); ++gi) {
          if (sweep[gi].class_rejection_rates[c] <
              sweep[winner].class_rejection_rates[c])
            winner = gi;
        }
        artifact.flags.push_back("BUDGET_INFEASIBLE:" +
                                 table.schema.class_names[c]);
      }
      artifact.thresholds[c] = sweep[winner].thresholds[c];
      artifact.percentiles[c] = grid[winner];
    }
  }

  if (budget_infeasible) artifact.flags.push_back("BUDGET_INFEASIBLE");
  artifact.validate();

  sweep.push_back(baseline_endpoint(table, config.theta));
  return CalibrationResult{std::move(artifact), std::move(sweep)};
}

}  // namespace rejectkit
