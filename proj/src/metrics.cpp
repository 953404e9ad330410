#include "rejectkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "rejectkit/error.hpp"

namespace rejectkit {

namespace {
constexpr double kLogClamp = 1e-12;

double entropy_term(double weight) {
  // -w * log(w) with w clamped away from 0; exact 0 short-circuits so the
  // 0*log(0) = 0 convention holds without the clamp leaking in.
  if (weight <= 0.0) return 0.0;
  return -weight * std::log(std::max(weight, kLogClamp));
}
}  // namespace

double binary_entropy(double p) {
  if (!(p >= 0.0 && p <= 1.0))
    throw Error(ErrorCode::domain, "probability outside [0,1]");
  const double h = entropy_term(p) + entropy_term(1.0 - p);
  return std::clamp(h, 0.0, std::numbers::ln2);
}

double margin(double p, double theta) {
  if (!(p >= 0.0 && p <= 1.0))
    throw Error(ErrorCode::domain, "probability outside [0,1]");
  if (!(theta > 0.0 && theta < 1.0))
    throw Error(ErrorCode::domain, "boundary outside (0,1)");
  return std::abs(p - theta);
}

std::optional<double> auc(std::span<const double> scores,
                          std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size())
    throw Error(ErrorCode::length_mismatch,
                "auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (auto l : labels) n_pos += l ? 1 : 0;
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;

  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return scores[a] < scores[b];
  });

  // Rank sum of positives, ties averaged. U = R_pos - n_pos(n_pos+1)/2.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]]) rank_sum_pos += avg_rank;
    }
    i = j + 1;
  }
  const double u =
      rank_sum_pos -
      0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

ClassMetrics class_metrics(std::span<const double> probs,
                           std::span<const std::uint8_t> labels,
                           std::span<const std::uint8_t> accepted,
                           double theta) {
  if (probs.size() != labels.size() ||
      (!accepted.empty() && accepted.size() != probs.size()))
    throw Error(ErrorCode::length_mismatch,
                "class_metrics: inputs differ in length");
  ClassMetrics out;
  out.n_total = probs.size();
  std::vector<double> kept_probs;
  std::vector<std::uint8_t> kept_labels;
  if (accepted.empty()) {
    kept_probs.assign(probs.begin(), probs.end());
    kept_labels.assign(labels.begin(), labels.end());
  } else {
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (!accepted[i]) continue;
      kept_probs.push_back(probs[i]);
      kept_labels.push_back(labels[i]);
    }
  }
  out.n_retained = kept_probs.size();
  out.rejection_rate =
      out.n_total == 0
          ? 0.0
          : 1.0 - static_cast<double>(out.n_retained) /
                      static_cast<double>(out.n_total);
  if (out.n_retained > 0) {
    out.auc = auc(kept_probs, kept_labels);
    out.f1 = f1_at_boundary(kept_probs, kept_labels, theta);
  }
  return out;
}

std::optional<double> f1_at_boundary(std::span<const double> probs,
                                     std::span<const std::uint8_t> labels,
                                     double theta) {
  if (probs.size() != labels.size())
    throw Error(ErrorCode::length_mismatch,
                "f1: probs and labels differ in length");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const bool pred = probs[i] >= theta;  // boundary counts as positive
    const bool truth = labels[i] != 0;
    if (pred && truth)
      ++tp;
    else if (pred && !truth)
      ++fp;
    else if (!pred && truth)
      ++fn;
  }
  if (tp == 0 && fp == 0 && fn == 0) return std::nullopt;
  return 2.0 * static_cast<double>(tp) /
         static_cast<double>(2 * tp + fp + fn);
}

}  // namespace rejectkit
