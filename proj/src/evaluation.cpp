#include "rejectkit/evaluation.hpp"

#include <algorithm>
#include <unordered_map>

#include "rejectkit/parallel.hpp"
#include "rejectkit/rejection.hpp"
#include "rejectkit/rng.hpp"

namespace rejectkit {

namespace {

void check_schema(const ScoreTable& table, const ThresholdArtifact& artifact) {
  if (artifact.schema_hash != table.schema.hash())
    throw Error(ErrorCode::schema_mismatch,
                "artifact was calibrated against a different schema "
                "(fingerprint " +
                    artifact.schema_hash + " vs " + table.schema.hash() + ")");
}

CellReport cell_report(const ScoreTable& table, const SelectionMask& mask,
                       const std::vector<std::size_t>& rows, std::size_t c,
                       double threshold) {
  std::vector<double> probs;
  std::vector<std::uint8_t> labels, accepted;
  probs.reserve(rows.size());
  labels.reserve(rows.size());
  accepted.reserve(rows.size());
  for (std::size_t i : rows) {
    probs.push_back(table.records[i].probs[c]);
    labels.push_back(table.records[i].labels[c]);
    accepted.push_back(mask.cell(i, c) ? 1 : 0);
  }
  const ClassMetrics baseline =
      class_metrics(probs, labels, {}, table.schema.theta);
  const ClassMetrics selective =
      class_metrics(probs, labels, accepted, table.schema.theta);

  CellReport out;
  out.threshold = threshold;
  out.n_total = selective.n_total;
  out.n_retained = selective.n_retained;
  out.rejection_rate = selective.rejection_rate;
  out.auc_baseline = baseline.auc;
  out.f1_baseline = baseline.f1;
  out.auc_selective = selective.auc;
  out.f1_selective = selective.f1;
  return out;
}

}  // namespace

std::optional<double> mean_defined(
    const std::vector<std::optional<double>>& values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

EvaluationReport evaluate(const ScoreTable& table,
                          const ThresholdArtifact& artifact) {
  check_schema(table, artifact);
  if (table.records.empty())
    throw Error(ErrorCode::empty_table, "cannot evaluate an empty table");

  const UncertaintyMatrix unc = score_uncertainty(table, artifact.mechanism);
  const SelectionMask mask = build_mask(unc, artifact, artifact.mode);

  EvaluationReport report;
  report.schema = table.schema;
  report.sources = table.sources();

  std::unordered_map<std::string, std::vector<std::size_t>> rows_by_source;
  for (std::size_t i = 0; i < table.n_samples(); ++i)
    rows_by_source[table.records[i].source].push_back(i);

  const std::size_t k = table.n_classes();
  std::vector<std::size_t> all_rows(table.n_samples());
  for (std::size_t i = 0; i < all_rows.size(); ++i) all_rows[i] = i;

  report.cells.resize(report.sources.size());
  for (std::size_t s = 0; s < report.sources.size(); ++s) {
    const auto& rows = rows_by_source[report.sources[s]];
    report.cells[s].reserve(k);
    for (std::size_t c = 0; c < k; ++c)
      report.cells[s].push_back(
          cell_report(table, mask, rows, c, artifact.threshold_for(c)));
  }
  report.per_class.reserve(k);
  for (std::size_t c = 0; c < k; ++c)
    report.per_class.push_back(
        cell_report(table, mask, all_rows, c, artifact.threshold_for(c)));

  // Average row: unweighted mean over classes where the metric is defined.
  auto collect = [&](auto field) {
    std::vector<std::optional<double>> vals;
    for (const auto& cell : report.per_class) vals.push_back(cell.*field);
    return mean_defined(vals);
  };
  report.average.auc_baseline = collect(&CellReport::auc_baseline);
  report.average.auc_selective = collect(&CellReport::auc_selective);
  report.average.f1_baseline = collect(&CellReport::f1_baseline);
  report.average.f1_selective = collect(&CellReport::f1_selective);
  double rej = 0.0;
  std::size_t totals = 0, retained = 0;
  for (const auto& cell : report.per_class) {
    rej += cell.rejection_rate;
    totals += cell.n_total;
    retained += cell.n_retained;
  }
  report.average.rejection_rate = rej / static_cast<double>(k);
  report.average.n_total = totals;
  report.average.n_retained = retained;
  return report;
}

BootstrapResult bootstrap_f1(const ScoreTable& table,
                             const ThresholdArtifact& artifact,
                             std::uint64_t iterations, std::uint64_t seed,
                             unsigned threads) {
  check_schema(table, artifact);
  if (iterations < 1)
    throw Error(ErrorCode::invalid_config, "bootstrap needs iterations >= 1");
  if (table.records.empty())
    throw Error(ErrorCode::empty_table, "cannot bootstrap an empty table");

  const UncertaintyMatrix unc = score_uncertainty(table, artifact.mechanism);
  const SelectionMask mask = build_mask(unc, artifact, artifact.mode);
  const double theta = table.schema.theta;
  const std::size_t k = table.n_classes();
  const auto sources = table.sources();

  std::unordered_map<std::string, std::vector<std::size_t>> rows_by_source;
  for (std::size_t i = 0; i < table.n_samples(); ++i)
    rows_by_source[table.records[i].source].push_back(i);

  BootstrapResult result;
  result.iterations = iterations;
  result.seed = seed;
  result.cells.resize(sources.size() * k);
  for (std::size_t s = 0; s < sources.size(); ++s) {
    for (std::size_t c = 0; c < k; ++c) {
      auto& cell = result.cells[s * k + c];
      cell.source = sources[s];
      cell.class_name = table.schema.class_names[c];
      cell.f1_baseline.resize(iterations);
      cell.f1_selective.resize(iterations);
    }
  }

  // Confusion counts are additive over the resampled multiset, so each
  // iteration is one pass over the drawn rows per source.
  parallel_for(iterations, threads, [&](std::size_t it) {
    const std::uint64_t iter_seed = derive_seed(seed, it);
    for (std::size_t s = 0; s < sources.size(); ++s) {
      SplitMix64 rng(derive_seed(iter_seed, fnv1a64(sources[s])));
      const auto& rows = rows_by_source[sources[s]];
      const std::size_t m = rows.size();

      std::vector<std::size_t> tp_all(k, 0), fp_all(k, 0), fn_all(k, 0);
      std::vector<std::size_t> tp_kept(k, 0), fp_kept(k, 0), fn_kept(k, 0);
      std::vector<std::size_t> kept(k, 0);
      for (std::size_t draw = 0; draw < m; ++draw) {
        const std::size_t i = rows[rng.bounded(m)];
        const auto& rec = table.records[i];
        for (std::size_t c = 0; c < k; ++c) {
          const bool pred = rec.probs[c] >= theta;
          const bool truth = rec.labels[c] != 0;
          const bool accept = mask.cell(i, c);
          if (pred && truth) {
            ++tp_all[c];
            if (accept) ++tp_kept[c];
          } else if (pred) {
            ++fp_all[c];
            if (accept) ++fp_kept[c];
          } else if (truth) {
            ++fn_all[c];
            if (accept) ++fn_kept[c];
          }
          if (accept) ++kept[c];
        }
      }
      for (std::size_t c = 0; c < k; ++c) {
        auto f1_of = [](std::size_t tp, std::size_t fp,
                        std::size_t fn) -> std::optional<double> {
          if (tp == 0 && fp == 0 && fn == 0) return std::nullopt;
          return 2.0 * static_cast<double>(tp) /
                 static_cast<double>(2 * tp + fp + fn);
        };
        auto& cell = result.cells[s * k + c];
        cell.f1_baseline[it] = f1_of(tp_all[c], fp_all[c], fn_all[c]);
        cell.f1_selective[it] = kept[c] == 0
                                    ? std::nullopt
                                    : f1_of(tp_kept[c], fp_kept[c], fn_kept[c]);
      }
    }
  });

  for (auto& cell : result.cells) {
    std::vector<double> base, sel, gap;
    std::size_t exceed = 0;
    for (std::uint64_t it = 0; it < iterations; ++it) {
      const auto& b = cell.f1_baseline[it];
      const auto& s = cell.f1_selective[it];
      if (b) base.push_back(*b); else ++cell.null_baseline;
      if (s) sel.push_back(*s); else ++cell.null_selective;
      if (b && s) {
        gap.push_back(*s - *b);
        if (*s > *b) ++exceed;
      }
    }
    if (!base.empty()) {
      cell.ci_baseline_lo = quantile(base, 2.5);
      cell.ci_baseline_hi = quantile(base, 97.5);
    }
    if (!sel.empty()) {
      cell.ci_selective_lo = quantile(sel, 2.5);
      cell.ci_selective_hi = quantile(sel, 97.5);
    }
    if (!gap.empty()) {
      cell.ci_gap_lo = quantile(gap, 2.5);
      cell.ci_gap_hi = quantile(gap, 97.5);
    }
    cell.exceed_fraction =
        static_cast<double>(exceed) / static_cast<double>(iterations);
  }
  return result;
}

std::vector<RiskCoveragePoint> risk_coverage_sweep(
    const ScoreTable& table, const CalibrationConfig& config) {
  return sweep_percentile_grid(table, config);
}

MechanismComparison compare_mechanisms(const ScoreTable& table,
                                       const ThresholdArtifact& entropy,
                                       const ThresholdArtifact& interval) {
  if (entropy.mechanism != Mechanism::entropy ||
      interval.mechanism != Mechanism::interval)
    throw Error(ErrorCode::mechanism_mismatch,
                "compare_mechanisms expects one entropy and one interval "
                "artifact");
  check_schema(table, entropy);
  check_schema(table, interval);

  const EvaluationReport ent = evaluate(table, entropy);
  const EvaluationReport inv = evaluate(table, interval);

  MechanismComparison out;
  const std::size_t k = table.n_classes();
  std::vector<std::optional<double>> base(k), e(k), v(k);
  for (std::size_t c = 0; c < k; ++c) {
    MechanismComparisonRow row;
    row.class_name = table.schema.class_names[c];
    row.auc_baseline = ent.per_class[c].auc_baseline;
    row.auc_interval = inv.per_class[c].auc_selective;
    row.auc_entropy = ent.per_class[c].auc_selective;
    base[c] = row.auc_baseline;
    v[c] = row.auc_interval;
    e[c] = row.auc_entropy;
    out.rows.push_back(std::move(row));
  }
  out.average.class_name = "average";
  out.average.auc_baseline = mean_defined(base);
  out.average.auc_interval = mean_defined(v);
  out.average.auc_entropy = mean_defined(e);
  return out;
}

}  // namespace rejectkit
