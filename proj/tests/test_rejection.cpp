#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "rejectkit/io.hpp"
#include "rejectkit/metrics.hpp"
#include "rejectkit/rejection.hpp"
#include "support/oracles.hpp"

using namespace rejectkit;

namespace {

ThresholdArtifact entropy_artifact(std::vector<double> thresholds,
                                   Scope scope = Scope::global) {
  ThresholdArtifact a;
  a.mechanism = Mechanism::entropy;
  a.scope = scope;
  a.thresholds = std::move(thresholds);
  a.percentiles.assign(a.thresholds.size(), 90.0);
  return a;
}

ThresholdArtifact interval_artifact(std::vector<double> thresholds,
                                    Scope scope = Scope::global) {
  ThresholdArtifact a;
  a.mechanism = Mechanism::interval;
  a.scope = scope;
  a.thresholds = std::move(thresholds);
  a.percentiles.assign(a.thresholds.size(), 90.0);
  return a;
}

UncertaintyMatrix entropy_row(std::vector<double> values) {
  UncertaintyMatrix m;
  m.mechanism = Mechanism::entropy;
  m.n_samples = 1;
  m.n_classes = values.size();
  m.values = std::move(values);
  return m;
}

}  // namespace

TEST_CASE("score_uncertainty fills entropy or margin per cell") {
  ClassSchema schema{{"a", "b"}, 0.5};
  auto table = make_table(
      {PredictionRecord{"s1", "", {0.5, 0.8}, {1, 0}}}, schema);

  auto ent = score_uncertainty(table, Mechanism::entropy);
  CHECK(ent.cell(0, 0) == std::numbers::ln2);
  CHECK(ent.cell(0, 1) == doctest::Approx(binary_entropy(0.8)));

  auto inv = score_uncertainty(table, Mechanism::interval);
  CHECK(inv.cell(0, 0) == 0.0);  // p on the boundary has zero margin
  CHECK(inv.cell(0, 1) == doctest::Approx(0.3));
}

TEST_CASE("class_confident uses strict inequalities") {
  CHECK_FALSE(class_confident(0.58, 0.58, Mechanism::entropy));
  CHECK(class_confident(0.30, 0.58, Mechanism::entropy));
  CHECK_FALSE(class_confident(0.59, 0.58, Mechanism::entropy));
  CHECK_FALSE(class_confident(0.25, 0.25, Mechanism::interval));
  CHECK(class_confident(0.26, 0.25, Mechanism::interval));
}

TEST_CASE("interval acceptance: p=0.8, theta=0.5, delta=0.2 is confident") {
  // both endpoints: 0.8 - 0.2 = 0.6 > 0.5, so the interval clears theta
  CHECK(class_confident(margin(0.8, 0.5), 0.2, Mechanism::interval));
}

TEST_CASE("build_mask per_class vs image_level") {
  auto unc = entropy_row({0.68, 0.30, 0.69, 0.65});
  auto artifact = entropy_artifact({0.58});

  auto per_class = build_mask(unc, artifact, Mode::per_class);
  CHECK_FALSE(per_class.cell(0, 0));
  CHECK(per_class.cell(0, 1));
  CHECK_FALSE(per_class.cell(0, 2));
  CHECK_FALSE(per_class.cell(0, 3));

  auto image = build_mask(unc, artifact, Mode::image_level);
  for (std::size_t c = 0; c < 4; ++c) CHECK(image.cell(0, c));
}

TEST_CASE("nothing confident rejects the row in both modes") {
  auto unc = entropy_row({std::numbers::ln2, std::numbers::ln2});
  auto artifact = entropy_artifact({std::numbers::ln2});
  for (auto mode : {Mode::per_class, Mode::image_level}) {
    auto mask = build_mask(unc, artifact, mode);
    CHECK_FALSE(mask.cell(0, 0));
    CHECK_FALSE(mask.cell(0, 1));
  }
}

TEST_CASE("build_mask rejects mismatched inputs") {
  auto unc = entropy_row({0.5, 0.5});
  CHECK_THROWS_AS(build_mask(unc, interval_artifact({0.2}), Mode::per_class),
                  Error);
  CHECK_THROWS_AS(
      build_mask(unc, entropy_artifact({0.5, 0.5, 0.5}, Scope::class_specific),
                 Mode::per_class),
      Error);
}

TEST_CASE("rejection rates") {
  SelectionMask mask;
  mask.mode = Mode::per_class;
  mask.n_samples = 2;
  mask.n_classes = 1;
  mask.accepted = {1, 0};
  CHECK(per_class_rejection_rates(mask)[0] == 0.5);
  CHECK(image_rejection_rate(mask) == 0.5);

  mask.accepted = {1, 1};
  CHECK(per_class_rejection_rates(mask)[0] == 0.0);
  mask.accepted = {0, 0};
  CHECK(per_class_rejection_rates(mask)[0] == 1.0);
  CHECK(image_rejection_rate(mask) == 1.0);

  SelectionMask empty;
  CHECK_THROWS_AS(per_class_rejection_rates(empty), Error);
  CHECK_THROWS_AS(image_rejection_rate(empty), Error);
}

TEST_CASE("coverage is monotone in the threshold") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto table = testing::random_table(200, 3, seed);
    auto ent = score_uncertainty(table, Mechanism::entropy);
    auto inv = score_uncertainty(table, Mechanism::interval);

    std::size_t prev_ent = 0;
    std::size_t prev_inv = ent.values.size() + 1;
    for (int step = 0; step <= 50; ++step) {
      const double tau = std::numbers::ln2 * step / 50.0;
      const double delta = 0.5 * step / 50.0;
      auto accepted_cells = [](const SelectionMask& m) {
        std::size_t n = 0;
        for (auto v : m.accepted) n += v;
        return n;
      };
      const auto ent_count = accepted_cells(
          build_mask(ent, entropy_artifact({tau}), Mode::per_class));
      const auto inv_count = accepted_cells(
          build_mask(inv, interval_artifact({delta}), Mode::per_class));
      CHECK(ent_count >= prev_ent);   // raising tau never loses coverage
      CHECK(inv_count <= prev_inv);   // raising delta never gains coverage
      prev_ent = ent_count;
      prev_inv = inv_count;
    }
  }
}

TEST_CASE("image_level dominates per_class row-wise") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto table = testing::random_table(300, 4, seed + 40);
    auto unc = score_uncertainty(table, Mechanism::entropy);
    auto artifact = entropy_artifact({0.6});
    auto per_class = build_mask(unc, artifact, Mode::per_class);
    auto image = build_mask(unc, artifact, Mode::image_level);
    for (std::size_t i = 0; i < table.n_samples(); ++i) {
      for (std::size_t c = 0; c < table.n_classes(); ++c) {
        if (per_class.cell(i, c)) CHECK(image.cell(i, c));
      }
      // image rows are uniform
      bool first = image.cell(i, 0);
      for (std::size_t c = 1; c < table.n_classes(); ++c)
        CHECK(image.cell(i, c) == first);
    }
  }
}

TEST_CASE("interval mask equals the direct two-endpoint test") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto table = testing::random_table(500, 3, seed + 99);
    SplitMix64 rng(seed);
    const double theta = table.schema.theta;
    std::vector<double> deltas = {rng.uniform01() * 0.5,
                                  rng.uniform01() * 0.5,
                                  rng.uniform01() * 0.5};
    auto unc = score_uncertainty(table, Mechanism::interval);
    auto mask = build_mask(unc, interval_artifact(deltas, Scope::class_specific),
                           Mode::per_class);
    for (std::size_t i = 0; i < table.n_samples(); ++i) {
      for (std::size_t c = 0; c < table.n_classes(); ++c) {
        const double p = table.records[i].probs[c];
        const bool direct =
            (p - deltas[c] > theta) || (p + deltas[c] < theta);
        CHECK(mask.cell(i, c) == direct);
      }
    }
  }
}

TEST_CASE("masks are bit-for-bit deterministic") {
  auto table = testing::random_table(100, 4, 7);
  auto unc = score_uncertainty(table, Mechanism::entropy);
  auto artifact = entropy_artifact({0.6});
  auto a = build_mask(unc, artifact, Mode::per_class);
  auto b = build_mask(unc, artifact, Mode::per_class);
  CHECK(a.accepted == b.accepted);
}

TEST_CASE("mask CSV layout") {
  ClassSchema schema{{"a", "b"}, 0.5};
  auto table = make_table(
      {PredictionRecord{"s1", "", {0.9, 0.5}, {1, 0}},
       PredictionRecord{"s2", "", {0.5, 0.5}, {0, 0}}},
      schema);
  auto mask = build_mask(score_uncertainty(table, Mechanism::entropy),
                         entropy_artifact({0.6}), Mode::per_class);
  std::ostringstream out;
  write_mask_csv(out, table, mask);
  CHECK(out.str() ==
        "sample_id,accept_a,accept_b,image_accepted\n"
        "s1,1,0,1\n"
        "s2,0,0,0\n");
}
