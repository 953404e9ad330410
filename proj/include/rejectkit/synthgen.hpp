#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rejectkit/core.hpp"

namespace rejectkit {

// Synthetic score generator. Each (sample, class) cell draws its probability
// from a two-component mixture: with weight (1 - w) a confident Beta
// concentrated on the label's side of the boundary, with weight w a
// boundary-hugging Beta centered on theta that ignores the label. The
// boundary component is where high entropy and errors coincide, which is the
// structure threshold calibration exploits. Sources shift the boundary
// weight to mimic domain variability.
struct GeneratorClass {
  std::string name;
  double prevalence = 0.1;
};

struct GeneratorSpec {
  std::vector<GeneratorClass> classes = {{"Cardiomegaly", 0.097},
                                         {"Effusion", 0.076},
                                         {"Edema", 0.016},
                                         {"Consolidation", 0.021}};
  double theta = 0.5;
  // Confident component: Beta(confident_alpha, confident_beta) for positive
  // labels, mirrored for negatives.
  double confident_alpha = 8.0;
  double confident_beta = 1.6;
  // Boundary component: Beta(kappa, kappa), concentrated near 0.5.
  double boundary_concentration = 36.0;
  double boundary_weight = 0.3;  // w
  std::size_t n_samples = 20000;
  std::size_t n_sources = 3;
  // Source s draws its boundary weight as clamp(w + source_shift * s, 0, 1).
  double source_shift = 0.05;
  std::uint64_t seed = 1;

  void validate() const;  // throws Error(spec_invalid)
  ClassSchema schema() const;

  std::string to_json() const;
  static GeneratorSpec from_json(const std::string& text);
};

struct GeneratedTable {
  ScoreTable table;
  // Row-major [n_samples x n_classes]; 1 where the cell came from the
  // boundary-hugging component.
  std::vector<std::uint8_t> boundary_cells;
};

// Deterministic in the seed: sample i draws from its own stream derived from
// (seed, i), so generation order (and thread count) cannot change the output.
GeneratedTable generate(const GeneratorSpec& spec, unsigned threads = 1);

}  // namespace rejectkit
