#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semcex/param_space.hpp"
#include "semcex/scene.hpp"

namespace semcex {

enum class Split { train, validation, test };

std::string to_string(Split split);
Split parse_split(const std::string& text);

struct ManifestEntry {
  int sample_id = 0;
  int class_id = 0;
  int template_id = 0;
  SemanticParams theta;
  Split split = Split::train;
};

struct DatasetManifest {
  int class_count = 0;
  double train_fraction = 0.0;
  double validation_fraction = 0.0;
  double test_fraction = 0.0;
  std::vector<ManifestEntry> entries;

  /// Throws ConfigError on duplicate ids or out-of-range classes.
  void validate() const;
  std::vector<const ManifestEntry*> split(Split which) const;
};

/// Half-widths of the uniform jitter applied around the neutral pose.
struct JitterRanges {
  double rotation = 0.8;
  double translation = 0.04;
  double scale = 0.08;
  double color = 0.1;
  double lighting = 0.12;
  double vertex = 0.0;
};

struct DatasetConfig {
  int class_count = 4;
  int per_class = 600;
  double train_fraction = 0.7;
  double validation_fraction = 0.1;
  double test_fraction = 0.2;
  JitterRanges jitter;
  Rgb object_color{0.85, 0.6, 0.25};
  Rgb background_color{0.12, 0.14, 0.18};
  std::uint64_t seed = 7;

  void validate() const;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<SceneTemplate> templates;
  /// Parameter space of each template, indexed like `templates`.
  std::vector<SpacePtr> spaces;
};

/// Procedural dataset: one template per class, per-sample jitter drawn from a
/// generator seeded by config.seed. Splits are stratified per class.
Dataset make_dataset(const DatasetConfig& config);

}  // namespace semcex
