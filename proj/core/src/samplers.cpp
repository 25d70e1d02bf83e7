#include "semcex/samplers.hpp"

#include <cmath>
#include <limits>

#include "semcex/error.hpp"
#include "semcex/parallel.hpp"
#include "semcex/rng.hpp"

namespace semcex {

double halton(std::uint64_t index, unsigned base) {
  if (index < 1) throw DomainError("Halton index must be at least 1");
  if (base < 2) throw DomainError("Halton base must be at least 2");
  double result = 0.0;
  double f = 1.0 / base;
  while (index > 0) {
    result += f * static_cast<double>(index % base);
    index /= base;
    f /= base;
  }
  return result;
}

std::string to_string(SamplerKind kind) { return kind == SamplerKind::random ? "random" : "halton"; }
std::string to_string(RangePreset range) { return range == RangePreset::large ? "large" : "small"; }

SamplerKind parse_sampler_kind(const std::string& text) {
  if (text == "random") return SamplerKind::random;
  if (text == "halton") return SamplerKind::halton;
  throw ConfigError("unknown sampler '" + text + "'");
}

RangePreset parse_range_preset(const std::string& text) {
  if (text == "large") return RangePreset::large;
  if (text == "small") return RangePreset::small;
  throw ConfigError("unknown range preset '" + text + "'");
}

double range_half_width(RangePreset range) { return range == RangePreset::large ? 0.75 : 0.3; }

void SamplerConfig::validate() const {
  if (candidates < 0) throw ConfigError("candidate count must be non-negative");
  if (halton_start < 1) throw ConfigError("Halton start index must be at least 1");
}

std::string SamplerConfig::tag() const {
  const std::string k = kind == SamplerKind::random ? "Random" : "Halton";
  return k + " (" + to_string(range) + ")";
}

std::vector<SampledCoordinate> sampled_coordinates(const ParamSpace& space, const SamplerConfig& config) {
  const double h = range_half_width(config.range);
  std::vector<SampledCoordinate> coords;
  if (config.groups.empty()) {
    const auto g = space.find(group::pose);
    if (g == ParamSpace::npos) throw ConfigError("rotation sampling needs a pose group");
    coords.push_back({g, kRotation, h * space[g].scale[kRotation]});
    return coords;
  }
  for (const auto& name : config.groups) {
    const auto g = space.find(name);
    if (g == ParamSpace::npos) throw ConfigError("sampler group '" + name + "' not in the space");
    for (std::size_t i = 0; i < space[g].dim(); ++i) coords.push_back({g, i, h * space[g].scale[i]});
  }
  return coords;
}

namespace {

unsigned nth_prime(std::size_t n) {
  static const unsigned primes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41,
                                    43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97};
  if (n >= std::size(primes)) throw ConfigError("too many Halton dimensions");
  return primes[n];
}

}  // namespace

CounterexampleRecord sample_best_of_n(const Classifier& model, const SceneTemplate& scene,
                                      const SemanticParams& theta0, int label,
                                      const SamplerConfig& config, const AttackEnv& env,
                                      std::uint64_t point_index) {
  config.validate();
  if (!theta0.is_feasible()) throw DomainError("sampler starting point is not feasible");
  const auto coords = sampled_coordinates(theta0.space(), config);

  CounterexampleRecord rec;
  rec.label = label;
  rec.method = config.tag();
  rec.theta_original = theta0;
  rec.x_original = render(scene, theta0, env.render);
  rec.pred_original = predict(model, rec.x_original);

  Rng rng(derive_seed(config.seed, point_index));
  const auto n = static_cast<std::uint64_t>(config.candidates);
  double best_confidence = -1.0;
  SemanticParams chosen = theta0;
  Image chosen_image = rec.x_original;
  std::vector<double> chosen_softmax;
  for (std::uint64_t j = 0; j < n; ++j) {
    auto delta = SemanticParams::zeros(theta0.space_ptr());
    for (std::size_t d = 0; d < coords.size(); ++d) {
      const auto& c = coords[d];
      const double u = config.kind == SamplerKind::random
                           ? uniform(rng, 0.0, 1.0)
                           : halton(config.halton_start + point_index * n + j, nth_prime(d));
      delta.values(c.group)[c.index] = -c.half_width + 2.0 * c.half_width * u;
    }
    auto theta = add(theta0, delta);
    Image x = render(scene, theta, env.render);
    const auto probs = softmax(forward(model, x));
    ++rec.queries;
    const int pred = argmax(probs);
    const bool misclassified = pred != label && pred != rec.pred_original;
    const double confidence = probs[static_cast<std::size_t>(pred)];
    if (misclassified && confidence > best_confidence) {
      best_confidence = confidence;
      chosen = std::move(theta);
      chosen_image = std::move(x);
      chosen_softmax = probs;
    } else if (best_confidence < 0.0) {
      chosen = std::move(theta);  // last candidate when nothing misclassifies
      chosen_image = std::move(x);
      chosen_softmax = probs;
    }
  }
  rec.theta_perturbed = std::move(chosen);
  rec.x_perturbed = std::move(chosen_image);
  if (chosen_softmax.empty()) chosen_softmax = softmax(forward(model, rec.x_perturbed));
  rec.softmax_perturbed = std::move(chosen_softmax);
  rec.pred_perturbed = argmax(rec.softmax_perturbed);
  rec.realism = realism(rec.x_perturbed, rec.x_original, env.realism);
  // Only a misclassifying candidate counts; the fallback may differ from
  // pred_original by restoring the true label.
  rec.success = best_confidence >= 0.0;
  return rec;
}

SamplerBatchResult sampler_batch(const Classifier& model, std::span<const SceneTemplate> templates,
                                 std::span<const ManifestEntry* const> points,
                                 const SamplerConfig& config, const AttackEnv& env, int workers) {
  config.validate();
  std::vector<CounterexampleRecord> records(points.size());
  parallel_for(points.size(), workers, [&](std::size_t i) {
    const ManifestEntry& e = *points[i];
    if (e.template_id < 0 || e.template_id >= static_cast<int>(templates.size())) {
      throw DomainError("sample " + std::to_string(e.sample_id) + " references a missing template");
    }
    auto rec = sample_best_of_n(model, templates[static_cast<std::size_t>(e.template_id)], e.theta,
                                e.class_id, config, env, i);
    rec.sample_id = e.sample_id;
    rec.template_id = e.template_id;
    records[i] = std::move(rec);
  });
  SamplerBatchResult out;
  out.batch = summarize(std::move(records), model.class_count());
  out.queries_per_success = out.batch.successes > 0
                                ? static_cast<double>(out.batch.total_queries) / out.batch.successes
                                : std::numeric_limits<double>::infinity();
  return out;
}

}  // namespace semcex
