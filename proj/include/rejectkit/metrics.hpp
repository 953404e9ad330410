#pragma once

#include <cstdint>
#include <optional>
#include <span>

namespace rejectkit {

// Binary entropy in nats, 0*log(0) taken as 0, arguments clamped to
// [1e-12, 1-1e-12] before any log. Maximum is ln 2 at p = 0.5.
// Throws Error(domain) outside [0, 1].
double binary_entropy(double p);

// |p - theta|, the distance from the decision boundary.
double margin(double p, double theta);

// Mann-Whitney AUC with 0.5 credit per tied pair. nullopt when the labels
// lack a positive or a negative. O(n log n).
std::optional<double> auc(std::span<const double> scores,
                          std::span<const std::uint8_t> labels);

// F1 of the thresholded prediction p >= theta. 0 when TP = 0 with errors
// present; nullopt when TP = FP = FN = 0.
std::optional<double> f1_at_boundary(std::span<const double> probs,
                                     std::span<const std::uint8_t> labels,
                                     double theta);

// Retained-set bookkeeping for one (source, class) cell group.
struct ClassMetrics {
  std::optional<double> auc;
  std::optional<double> f1;
  std::size_t n_retained = 0;
  std::size_t n_total = 0;
  double rejection_rate = 0.0;
};

// Metrics over the retained subset of one class column. An empty `accepted`
// span means everything is retained (the baseline case).
ClassMetrics class_metrics(std::span<const double> probs,
                           std::span<const std::uint8_t> labels,
                           std::span<const std::uint8_t> accepted,
                           double theta);

}  // namespace rejectkit
