#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "semcex/attacks.hpp"

namespace semcex {

/// Radical inverse of `index` in `base`: the digits of index reversed behind
/// the radix point. index >= 1, base >= 2.
double halton(std::uint64_t index, unsigned base);

enum class SamplerKind { random, halton };
enum class RangePreset { large, small };

std::string to_string(SamplerKind kind);
std::string to_string(RangePreset range);
SamplerKind parse_sampler_kind(const std::string& text);
RangePreset parse_range_preset(const std::string& text);

/// Half-width of the rotation range in radians: 0.75 (large) or 0.3 (small).
double range_half_width(RangePreset range);

struct SamplerConfig {
  SamplerKind kind = SamplerKind::random;
  RangePreset range = RangePreset::large;
  /// Candidates drawn per point; 0 disables sampling (benign record).
  int candidates = 5;
  /// Empty: rotation only. Otherwise every coordinate of the listed groups is
  /// sampled with half-width range_half_width * coordinate scale.
  std::vector<std::string> groups;
  std::uint64_t seed = 0;
  /// First Halton index; point p uses indices start + p*N ... start + p*N + N-1.
  std::uint64_t halton_start = 1;

  void validate() const;
  std::string tag() const;  ///< e.g. "Random (large)"
};

/// One sampled coordinate: (group index, coordinate index, half-width).
struct SampledCoordinate {
  std::size_t group = 0;
  std::size_t index = 0;
  double half_width = 0.0;
};

std::vector<SampledCoordinate> sampled_coordinates(const ParamSpace& space, const SamplerConfig& config);

/// Draws N candidates around theta0 (uniform i.i.d. or Halton points mapped
/// affinely into theta0 +- half-width, then clamped to the feasible box).
/// Among misclassifying candidates returns the one with the highest softmax on
/// its predicted class; otherwise the last candidate with success = false.
/// `point_index` selects the Halton block and the random stream.
CounterexampleRecord sample_best_of_n(const Classifier& model, const SceneTemplate& scene,
                                      const SemanticParams& theta0, int label,
                                      const SamplerConfig& config, const AttackEnv& env,
                                      std::uint64_t point_index);

struct SamplerBatchResult {
  BatchResult batch;
  /// Mean queries per successful counterexample (infinity when none).
  double queries_per_success = 0.0;
};

SamplerBatchResult sampler_batch(const Classifier& model, std::span<const SceneTemplate> templates,
                                 std::span<const ManifestEntry* const> points,
                                 const SamplerConfig& config, const AttackEnv& env, int workers = 1);

}  // namespace semcex
