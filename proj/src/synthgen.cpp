#include "rejectkit/synthgen.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "rejectkit/parallel.hpp"
#include "rejectkit/rng.hpp"

namespace rejectkit {

namespace {

// Uniform in (0,1), never exactly 0 or 1, safe under log.
double uniform_open(SplitMix64& rng) {
  return (static_cast<double>(rng() >> 12) + 0.5) * 0x1.0p-52;
}

double standard_normal(SplitMix64& rng) {
  // Marsaglia polar method.
  while (true) {
    const double u = 2.0 * uniform_open(rng) - 1.0;
    const double v = 2.0 * uniform_open(rng) - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
  }
}

// Marsaglia-Tsang; the alpha < 1 case boosts through alpha + 1.
double gamma_draw(SplitMix64& rng, double alpha) {
  if (alpha < 1.0) {
    const double u = uniform_open(rng);
    return gamma_draw(rng, alpha + 1.0) * std::pow(u, 1.0 / alpha);
  }
  const double d = alpha - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    const double x = standard_normal(rng);
    const double t = 1.0 + c * x;
    if (t <= 0.0) continue;
    const double v = t * t * t;
    const double u = uniform_open(rng);
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

double beta_draw(SplitMix64& rng, double alpha, double beta) {
  const double x = gamma_draw(rng, alpha);
  const double y = gamma_draw(rng, beta);
  return x / (x + y);
}

}  // namespace

void GeneratorSpec::validate() const {
  if (classes.empty())
    throw Error(ErrorCode::spec_invalid, "generator needs at least one class");
  for (const auto& cls : classes) {
    if (cls.name.empty())
      throw Error(ErrorCode::spec_invalid, "class name must be non-empty");
    if (!(cls.prevalence > 0.0 && cls.prevalence < 1.0))
      throw Error(ErrorCode::spec_invalid,
                  "prevalence of " + cls.name + " outside (0,1)");
  }
  if (!(theta > 0.0 && theta < 1.0))
    throw Error(ErrorCode::spec_invalid, "theta outside (0,1)");
  if (!(boundary_weight >= 0.0 && boundary_weight <= 1.0))
    throw Error(ErrorCode::spec_invalid, "boundary weight outside [0,1]");
  if (!(confident_alpha > 0.0 && confident_beta > 0.0 &&
        boundary_concentration > 0.0))
    throw Error(ErrorCode::spec_invalid,
                "concentration parameters must be positive");
  if (n_samples == 0)
    throw Error(ErrorCode::spec_invalid, "n_samples must be positive");
  if (n_sources == 0)
    throw Error(ErrorCode::spec_invalid, "n_sources must be positive");
}

ClassSchema GeneratorSpec::schema() const {
  ClassSchema s;
  s.theta = theta;
  for (const auto& cls : classes) s.class_names.push_back(cls.name);
  return s;
}

std::string GeneratorSpec::to_json() const {
  nlohmann::ordered_json j;
  nlohmann::ordered_json cls = nlohmann::ordered_json::array();
  for (const auto& c : classes)
    cls.push_back({{"name", c.name}, {"prevalence", c.prevalence}});
  j["classes"] = std::move(cls);
  j["theta"] = theta;
  j["confident_alpha"] = confident_alpha;
  j["confident_beta"] = confident_beta;
  j["boundary_concentration"] = boundary_concentration;
  j["boundary_weight"] = boundary_weight;
  j["n_samples"] = n_samples;
  j["n_sources"] = n_sources;
  j["source_shift"] = source_shift;
  j["seed"] = seed;
  return j.dump(2) + "\n";
}

GeneratorSpec GeneratorSpec::from_json(const std::string& text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error,
                std::string("bad generator spec JSON: ") + e.what());
  }
  GeneratorSpec spec;
  try {
    if (j.contains("classes")) {
      spec.classes.clear();
      for (const auto& c : j["classes"]) {
        spec.classes.push_back({c.at("name").get<std::string>(),
                                c.at("prevalence").get<double>()});
      }
    }
    auto load = [&](const char* key, auto& into) {
      if (j.contains(key)) into = j[key].get<std::decay_t<decltype(into)>>();
    };
    load("theta", spec.theta);
    load("confident_alpha", spec.confident_alpha);
    load("confident_beta", spec.confident_beta);
    load("boundary_concentration", spec.boundary_concentration);
    load("boundary_weight", spec.boundary_weight);
    load("n_samples", spec.n_samples);
    load("n_sources", spec.n_sources);
    load("source_shift", spec.source_shift);
    load("seed", spec.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::spec_invalid,
                std::string("bad generator spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

GeneratedTable generate(const GeneratorSpec& spec, unsigned threads) {
  spec.validate();
  const std::size_t n = spec.n_samples;
  const std::size_t k = spec.classes.size();

  GeneratedTable out;
  out.table.schema = spec.schema();
  out.table.records.resize(n);
  out.boundary_cells.assign(n * k, 0);

  // Pad ids so lexicographic order matches generation order.
  int width = 1;
  for (std::size_t v = n > 0 ? n - 1 : 0; v >= 10; v /= 10) ++width;

  parallel_for(n, threads, [&](std::size_t i) {
    SplitMix64 rng(derive_seed(spec.seed, i));
    const std::size_t source_idx = i % spec.n_sources;
    const double w = std::clamp(
        spec.boundary_weight +
            spec.source_shift * static_cast<double>(source_idx),
        0.0, 1.0);

    PredictionRecord rec;
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "s%0*zu", width, i);
    rec.sample_id = idbuf;
    rec.source = "source_" + std::to_string(source_idx);
    rec.probs.resize(k);
    rec.labels.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
      const bool positive = uniform_open(rng) < spec.classes[c].prevalence;
      const bool boundary = uniform_open(rng) < w;
      double p;
      if (boundary) {
        p = beta_draw(rng, spec.boundary_concentration,
                      spec.boundary_concentration);
        // Recenter on theta when the boundary is not 0.5.
        p = std::clamp(p - 0.5 + spec.theta, 0.0, 1.0);
        out.boundary_cells[i * k + c] = 1;
      } else if (positive) {
        p = beta_draw(rng, spec.confident_alpha, spec.confident_beta);
      } else {
        p = beta_draw(rng, spec.confident_beta, spec.confident_alpha);
      }
      rec.probs[c] = p;
      rec.labels[c] = positive ? 1 : 0;
    }
    out.table.records[i] = std::move(rec);
  });
  return out;
}

}  // namespace rejectkit
