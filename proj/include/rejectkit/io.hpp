#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rejectkit/calibration.hpp"
#include "rejectkit/core.hpp"
#include "rejectkit/evaluation.hpp"

namespace rejectkit {

enum class FileFormat : std::uint8_t { csv, jsonl };
FileFormat format_from_string(const std::string& s);

// ---- score files ----
//
// CSV header: sample_id,source,prob_<class>...,label_<class>...
// JSONL: one object per line: {"id", "source", "probs": {...}, "labels": {...}}
// Probabilities are written with 17 significant digits so parsing them back
// recovers the exact double.

ScoreTable read_scores(const std::string& path, FileFormat format,
                       const ClassSchema& schema);
ScoreTable read_scores(std::istream& in, FileFormat format,
                       const ClassSchema& schema);

// Class names recovered from the file itself (prob_* columns / first-record
// probs keys, in file order).
ClassSchema infer_schema(const std::string& path, FileFormat format,
                         double theta);

void write_scores(std::ostream& out, const ScoreTable& table,
                  FileFormat format);
void write_scores(const std::string& path, const ScoreTable& table,
                  FileFormat format);

// ---- selection masks ----
// sample_id, one accept_<class> 0/1 column per class, image_accepted.
void write_mask_csv(std::ostream& out, const ScoreTable& table,
                    const SelectionMask& mask);

// ---- threshold artifacts ----
std::string artifact_to_json(const ThresholdArtifact& artifact);
ThresholdArtifact artifact_from_json(const std::string& text);
void write_artifact(const std::string& path, const ThresholdArtifact& a);
ThresholdArtifact read_artifact(const std::string& path);

// ---- risk/coverage sweeps ----
void write_sweep_csv(std::ostream& out,
                     const std::vector<RiskCoveragePoint>& sweep,
                     const std::vector<std::string>& class_names);

// ---- evaluation reports ----
std::string report_to_json(const EvaluationReport& report);
void write_report_csv(std::ostream& out, const EvaluationReport& report);

// ---- bootstrap results ----
void write_bootstrap_samples_csv(std::ostream& out, const BootstrapResult& r);
std::string bootstrap_summary_json(const BootstrapResult& r);

// ---- mechanism comparisons ----
void write_comparison_csv(std::ostream& out, const MechanismComparison& cmp);
// Reads per-class rows (an `average` row, if present, is skipped so the
// caller can re-aggregate).
std::vector<MechanismComparisonRow> read_comparison_csv(std::istream& in);

// ---- splits ----

enum class SplitStrategy : std::uint8_t { intra_source, inter_source };
enum class Assignment : std::uint8_t { train, cal, eval };
SplitStrategy split_strategy_from_string(const std::string& s);
const char* to_string(SplitStrategy s);
const char* to_string(Assignment a);

struct SplitManifest {
  SplitStrategy strategy = SplitStrategy::intra_source;
  // (sample_id, assignment) in table order; partitions the table exactly.
  std::vector<std::pair<std::string, Assignment>> assignments;
  std::vector<std::string> held_out_sources;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  double cal_fraction = 0.0;
};

// intra_source: seeded per-source permutation, floor(n*train_fraction) to
// train, then floor(n*cal_fraction) to cal, remainder to eval. inter_source:
// records from held_out_sources go to eval, everything else to train; the
// seed is unused.
SplitManifest make_split(const ScoreTable& table, SplitStrategy strategy,
                         double train_fraction, double cal_fraction,
                         const std::vector<std::string>& held_out_sources,
                         std::uint64_t seed);

ScoreTable filter_by_assignment(const ScoreTable& table,
                                const SplitManifest& manifest, Assignment which);

void write_manifest_csv(std::ostream& out, const SplitManifest& manifest);
SplitManifest read_manifest_csv(std::istream& in);

// Shortest decimal that parses back to the same double.
std::string format_double(double v);
// Fixed 17 significant digits; used for score files.
std::string format_double_17(double v);

}  // namespace rejectkit
