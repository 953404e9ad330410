#pragma once

#include <vector>

#include "rejectkit/core.hpp"

namespace rejectkit {

// Per-cell uncertainty. For entropy the value is H(p) in nats; for interval
// it is the margin |p - theta|, which is a confidence dual: the interval
// [p - d, p + d] clears the boundary exactly when margin > d.
struct UncertaintyMatrix {
  Mechanism mechanism = Mechanism::entropy;
  double theta = 0.5;
  std::size_t n_samples = 0;
  std::size_t n_classes = 0;
  std::vector<double> values;  // row-major

  double cell(std::size_t i, std::size_t c) const {
    return values[i * n_classes + c];
  }
};

UncertaintyMatrix score_uncertainty(const ScoreTable& table,
                                    Mechanism mechanism);

// Strict comparisons on both sides: entropy confident iff value < threshold,
// interval confident iff value > threshold. Equality rejects.
bool class_confident(double value, double threshold, Mechanism mechanism);

// per_class: each cell decided independently. image_level: a row with any
// confident class is accepted whole, otherwise rejected whole.
SelectionMask build_mask(const UncertaintyMatrix& uncertainty,
                         const ThresholdArtifact& thresholds, Mode mode);

// Fraction of rejected cells per class column. Throws Error(empty_mask).
std::vector<double> per_class_rejection_rates(const SelectionMask& mask);

// Fraction of rows with every cell rejected.
double image_rejection_rate(const SelectionMask& mask);

}  // namespace rejectkit
