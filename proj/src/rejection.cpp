#include "rejectkit/rejection.hpp"

#include "rejectkit/metrics.hpp"

namespace rejectkit {

UncertaintyMatrix score_uncertainty(const ScoreTable& table,
                                    Mechanism mechanism) {
  UncertaintyMatrix out;
  out.mechanism = mechanism;
  out.theta = table.schema.theta;
  out.n_samples = table.n_samples();
  out.n_classes = table.n_classes();
  out.values.resize(out.n_samples * out.n_classes);
  for (std::size_t i = 0; i < out.n_samples; ++i) {
    const auto& probs = table.records[i].probs;
    for (std::size_t c = 0; c < out.n_classes; ++c) {
      out.values[i * out.n_classes + c] =
          mechanism == Mechanism::entropy ? binary_entropy(probs[c])
                                          : margin(probs[c], out.theta);
    }
  }
  return out;
}

bool class_confident(double value, double threshold, Mechanism mechanism) {
  return mechanism == Mechanism::entropy ? value < threshold
                                         : value > threshold;
}

SelectionMask build_mask(const UncertaintyMatrix& uncertainty,
                         const ThresholdArtifact& thresholds, Mode mode) {
  if (thresholds.mechanism != uncertainty.mechanism)
    throw Error(ErrorCode::mechanism_mismatch,
                "artifact mechanism does not match uncertainty mechanism");
  if (thresholds.scope == Scope::class_specific &&
      thresholds.thresholds.size() != uncertainty.n_classes)
    throw Error(ErrorCode::shape_mismatch,
                "artifact holds " + std::to_string(thresholds.thresholds.size()) +
                    " thresholds for " + std::to_string(uncertainty.n_classes) +
                    " classes");

  SelectionMask mask;
  mask.mode = mode;
  mask.n_samples = uncertainty.n_samples;
  mask.n_classes = uncertainty.n_classes;
  mask.accepted.assign(mask.n_samples * mask.n_classes, 0);

  for (std::size_t i = 0; i < mask.n_samples; ++i) {
    bool any_confident = false;
    for (std::size_t c = 0; c < mask.n_classes; ++c) {
      const bool confident =
          class_confident(uncertainty.cell(i, c), thresholds.threshold_for(c),
                          uncertainty.mechanism);
      any_confident |= confident;
      if (mode == Mode::per_class)
        mask.accepted[i * mask.n_classes + c] = confident ? 1 : 0;
    }
    if (mode == Mode::image_level && any_confident) {
      for (std::size_t c = 0; c < mask.n_classes; ++c)
        mask.accepted[i * mask.n_classes + c] = 1;
    }
  }
  return mask;
}

std::vector<double> per_class_rejection_rates(const SelectionMask& mask) {
  if (mask.n_samples == 0 || mask.n_classes == 0)
    throw Error(ErrorCode::empty_mask, "rejection rate of an empty mask");
  std::vector<double> rates(mask.n_classes, 0.0);
  for (std::size_t c = 0; c < mask.n_classes; ++c) {
    std::size_t rejected = 0;
    for (std::size_t i = 0; i < mask.n_samples; ++i) {
      if (!mask.cell(i, c)) ++rejected;
    }
    rates[c] = static_cast<double>(rejected) /
               static_cast<double>(mask.n_samples);
  }
  return rates;
}

double image_rejection_rate(const SelectionMask& mask) {
  if (mask.n_samples == 0 || mask.n_classes == 0)
    throw Error(ErrorCode::empty_mask, "rejection rate of an empty mask");
  std::size_t rejected = 0;
  for (std::size_t i = 0; i < mask.n_samples; ++i) {
    if (!mask.image_accepted(i)) ++rejected;
  }
  return static_cast<double>(rejected) / static_cast<double>(mask.n_samples);
}

}  // namespace rejectkit
