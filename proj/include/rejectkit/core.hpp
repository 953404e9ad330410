#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rejectkit/error.hpp"

namespace rejectkit {

enum class Mechanism : std::uint8_t { entropy, interval };
enum class Scope : std::uint8_t { global, class_specific };
enum class Mode : std::uint8_t { image_level, per_class };

const char* to_string(Mechanism m);
const char* to_string(Scope s);
const char* to_string(Mode m);
Mechanism mechanism_from_string(const std::string& s);
Scope scope_from_string(const std::string& s);
Mode mode_from_string(const std::string& s);

// Ordered class list plus the decision boundary. Class order is fixed by
// declaration, never sorted; report columns follow it.
struct ClassSchema {
  std::vector<std::string> class_names;
  double theta = 0.5;

  std::size_t n_classes() const { return class_names.size(); }

  // FNV-1a over class names and the boundary bits, hex-encoded.
  std::string hash() const;

  // Throws Error(invalid_config) unless names are non-empty and distinct
  // and 0 < theta < 1.
  void validate() const;
};

// One sample's per-class probabilities and binary labels. `source` is a
// free-form dataset tag; empty means "unspecified source".
struct PredictionRecord {
  std::string sample_id;
  std::string source;
  std::vector<double> probs;
  std::vector<std::uint8_t> labels;
};

struct ValidationIssue {
  ErrorCode code;
  std::string sample_id;
  std::string field;
  std::string detail;

  std::string to_string() const;
};

// Immutable after construction; share freely across threads.
struct ScoreTable {
  ClassSchema schema;
  std::vector<PredictionRecord> records;

  std::size_t n_samples() const { return records.size(); }
  std::size_t n_classes() const { return schema.n_classes(); }

  // Sources in first-appearance order.
  std::vector<std::string> sources() const;
};

// Reports every violation; an empty result means the records form a valid
// table under the schema. Idempotent on valid input.
std::vector<ValidationIssue> validate_table(
    const std::vector<PredictionRecord>& records, const ClassSchema& schema);

// validate_table + construction. Throws Error(code of the first issue) with
// all issues joined into the message.
ScoreTable make_table(std::vector<PredictionRecord> records,
                      ClassSchema schema);

// Per-(sample, class) accept decisions. Row-major. In image_level mode every
// row is uniform (all accepted or all rejected).
struct SelectionMask {
  Mode mode = Mode::per_class;
  std::size_t n_samples = 0;
  std::size_t n_classes = 0;
  std::vector<std::uint8_t> accepted;  // n_samples * n_classes

  bool cell(std::size_t i, std::size_t c) const {
    return accepted[i * n_classes + c] != 0;
  }
  // An image counts as accepted when any of its cells is.
  bool image_accepted(std::size_t i) const;
};

// Calibrated thresholds plus provenance. thresholds/percentiles hold exactly
// one entry for global scope, one per class otherwise.
struct ThresholdArtifact {
  Mechanism mechanism = Mechanism::entropy;
  Scope scope = Scope::class_specific;
  Mode mode = Mode::per_class;
  double theta = 0.5;
  double epsilon = 0.25;
  std::vector<std::string> class_names;
  std::vector<double> thresholds;
  std::vector<double> percentiles;
  std::vector<std::string> flags;
  std::uint64_t n_calibration_records = 0;
  std::string schema_hash;

  double threshold_for(std::size_t c) const {
    return scope == Scope::global ? thresholds.at(0) : thresholds.at(c);
  }
  double percentile_for(std::size_t c) const {
    return scope == Scope::global ? percentiles.at(0) : percentiles.at(c);
  }
  bool has_flag(const std::string& name) const;

  // Threshold ranges ([0, ln 2] for entropy, [0, max(theta, 1-theta)] for
  // interval), shape per scope. Throws Error(invalid_config).
  void validate() const;
};

}  // namespace rejectkit
