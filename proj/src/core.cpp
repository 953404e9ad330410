#include "rejectkit/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <sstream>
#include <unordered_set>

#include "rejectkit/rng.hpp"

namespace rejectkit {

const char* to_string(Mechanism m) {
  return m == Mechanism::entropy ? "entropy" : "interval";
}

const char* to_string(Scope s) {
  return s == Scope::global ? "global" : "class_specific";
}

const char* to_string(Mode m) {
  return m == Mode::image_level ? "image_level" : "per_class";
}

Mechanism mechanism_from_string(const std::string& s) {
  if (s == "entropy") return Mechanism::entropy;
  if (s == "interval") return Mechanism::interval;
  throw Error(ErrorCode::invalid_config, "unknown mechanism: " + s);
}

Scope scope_from_string(const std::string& s) {
  if (s == "global") return Scope::global;
  if (s == "class_specific" || s == "class-specific")
    return Scope::class_specific;
  throw Error(ErrorCode::invalid_config, "unknown scope: " + s);
}

Mode mode_from_string(const std::string& s) {
  if (s == "image_level" || s == "image-level") return Mode::image_level;
  if (s == "per_class" || s == "per-class") return Mode::per_class;
  throw Error(ErrorCode::invalid_config, "unknown mode: " + s);
}

std::string ClassSchema::hash() const {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const auto& name : class_names) {
    h = fnv1a64(name, h);
    h = fnv1a64(std::string_view("\0", 1), h);
  }
  std::uint64_t bits;
  static_assert(sizeof(bits) == sizeof(theta));
  std::memcpy(&bits, &theta, sizeof(bits));
  h = fnv1a64(std::string_view(reinterpret_cast<const char*>(&bits),
                               sizeof(bits)),
              h);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

void ClassSchema::validate() const {
  if (class_names.empty())
    throw Error(ErrorCode::invalid_config, "schema has no classes");
  std::unordered_set<std::string> seen;
  for (const auto& name : class_names) {
    if (name.empty())
      throw Error(ErrorCode::invalid_config, "schema has an empty class name");
    if (!seen.insert(name).second)
      throw Error(ErrorCode::invalid_config,
                  "duplicate class name: " + name);
  }
  if (!(theta > 0.0 && theta < 1.0))
    throw Error(ErrorCode::invalid_config,
                "decision boundary must lie in (0,1)");
}

std::string ValidationIssue::to_string() const {
  std::ostringstream out;
  out << error_code_name(code) << " sample_id=" << sample_id;
  if (!field.empty()) out << " field=" << field;
  if (!detail.empty()) out << " (" << detail << ")";
  return out.str();
}

std::vector<std::string> ScoreTable::sources() const {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& r : records) {
    if (seen.insert(r.source).second) out.push_back(r.source);
  }
  return out;
}

std::vector<ValidationIssue> validate_table(
    const std::vector<PredictionRecord>& records, const ClassSchema& schema) {
  schema.validate();
  std::vector<ValidationIssue> issues;
  std::unordered_set<std::string> ids;
  const std::size_t k = schema.n_classes();

  for (const auto& rec : records) {
    if (!ids.insert(rec.sample_id).second) {
      issues.push_back({ErrorCode::duplicate_id, rec.sample_id, "sample_id",
                        "id appears more than once"});
    }
    if (rec.probs.size() != k || rec.labels.size() != k) {
      std::ostringstream d;
      d << "expected " << k << " classes, got " << rec.probs.size()
        << " probs / " << rec.labels.size() << " labels";
      issues.push_back({ErrorCode::length_mismatch, rec.sample_id,
                        rec.probs.size() != k ? "probs" : "labels", d.str()});
      continue;  // per-cell checks need aligned lengths
    }
    for (std::size_t c = 0; c < k; ++c) {
      const double p = rec.probs[c];
      if (!(p >= 0.0 && p <= 1.0)) {  // rejects NaN as well
        issues.push_back({ErrorCode::prob_out_of_range, rec.sample_id,
                          "prob_" + schema.class_names[c],
                          "value " + std::to_string(p)});
      }
      if (rec.labels[c] != 0 && rec.labels[c] != 1) {
        issues.push_back({ErrorCode::label_not_binary, rec.sample_id,
                          "label_" + schema.class_names[c],
                          "value " + std::to_string(int(rec.labels[c]))});
      }
    }
  }
  return issues;
}

ScoreTable make_table(std::vector<PredictionRecord> records,
                      ClassSchema schema) {
  auto issues = validate_table(records, schema);
  if (!issues.empty()) {
    std::ostringstream msg;
    msg << issues.size() << " validation issue(s): ";
    for (std::size_t i = 0; i < issues.size(); ++i) {
      if (i) msg << "; ";
      msg << issues[i].to_string();
      if (i == 9 && issues.size() > 10) {
        msg << "; ... (" << issues.size() - 10 << " more)";
        break;
      }
    }
    throw Error(issues.front().code, msg.str());
  }
  return ScoreTable{std::move(schema), std::move(records)};
}

bool SelectionMask::image_accepted(std::size_t i) const {
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (cell(i, c)) return true;
  }
  return false;
}

bool ThresholdArtifact::has_flag(const std::string& name) const {
  return std::find(flags.begin(), flags.end(), name) != flags.end();
}

void ThresholdArtifact::validate() const {
  const std::size_t expected =
      scope == Scope::global ? 1 : class_names.size();
  if (thresholds.size() != expected || percentiles.size() != expected)
    throw Error(ErrorCode::invalid_config,
                "threshold artifact shape does not match its scope");
  const double hi = mechanism == Mechanism::entropy
                        ? std::numbers::ln2
                        : std::max(theta, 1.0 - theta);
  for (double t : thresholds) {
    if (!(t >= 0.0 && t <= hi))
      throw Error(ErrorCode::invalid_config,
                  "threshold " + std::to_string(t) + " outside [0, " +
                      std::to_string(hi) + "]");
  }
  if (!(theta > 0.0 && theta < 1.0))
    throw Error(ErrorCode::invalid_config, "artifact boundary outside (0,1)");
  if (!(epsilon > 0.0 && epsilon <= 1.0))
    throw Error(ErrorCode::invalid_config,
                "rejection budget outside (0,1]");
}

}  // namespace rejectkit
