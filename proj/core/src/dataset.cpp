#include "semcex/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "semcex/error.hpp"
#include "semcex/rng.hpp"

namespace semcex {

std::string to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(const std::string& text) {
  if (text == "train") return Split::train;
  if (text == "validation") return Split::validation;
  if (text == "test") return Split::test;
  throw ConfigError("unknown split '" + text + "'");
}

void DatasetManifest::validate() const {
  std::set<int> ids;
  for (const auto& e : entries) {
    if (!ids.insert(e.sample_id).second) {
      throw ConfigError("duplicate sample id " + std::to_string(e.sample_id));
    }
    if (e.class_id < 0 || e.class_id >= class_count) {
      throw ConfigError("sample " + std::to_string(e.sample_id) + " has class outside [0, L)");
    }
  }
}

std::vector<const ManifestEntry*> DatasetManifest::split(Split which) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries) {
    if (e.split == which) out.push_back(&e);
  }
  return out;
}

void DatasetConfig::validate() const {
  if (class_count < 2) throw ConfigError("class count must be at least 2");
  if (class_count > static_cast<int>(shape_families().size())) {
    throw ConfigError("class count " + std::to_string(class_count) + " exceeds the " +
                      std::to_string(shape_families().size()) + " available shape families");
  }
  if (per_class < 1) throw ConfigError("per-class count must be at least 1");
  const double fractions[] = {train_fraction, validation_fraction, test_fraction};
  for (double f : fractions) {
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("split fraction outside [0,1]");
  }
  if (std::abs(train_fraction + validation_fraction + test_fraction - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
  const double j[] = {jitter.rotation, jitter.translation, jitter.scale,
                      jitter.color,    jitter.lighting,    jitter.vertex};
  for (double v : j) {
    if (!(v >= 0.0)) throw ConfigError("jitter half-widths must be non-negative");
  }
  const SceneBounds b;
  if (jitter.rotation > b.rotation || jitter.translation > b.translation ||
      1.0 - jitter.scale < b.scale_lo || 1.0 + jitter.scale > b.scale_hi ||
      jitter.color > b.color_offset || 1.0 - jitter.lighting < b.lighting_lo ||
      1.0 + jitter.lighting > b.lighting_hi || jitter.vertex > b.vertex_offset) {
    throw ConfigError("jitter ranges exceed the feasible bounds");
  }
}

namespace {

double jitter_draw(Rng& rng, double center, double half_width) {
  return half_width > 0.0 ? uniform(rng, center - half_width, center + half_width) : center;
}

}  // namespace

Dataset make_dataset(const DatasetConfig& config) {
  config.validate();
  Dataset ds;
  ds.manifest.class_count = config.class_count;
  ds.manifest.train_fraction = config.train_fraction;
  ds.manifest.validation_fraction = config.validation_fraction;
  ds.manifest.test_fraction = config.test_fraction;

  for (int c = 0; c < config.class_count; ++c) {
    SceneTemplate t;
    t.class_id = c;
    t.family = shape_families()[static_cast<std::size_t>(c)];
    t.base_polygon = family_polygon(t.family);
    t.base_color = config.object_color;
    t.background_color = config.background_color;
    t.validate();
    ds.spaces.push_back(make_scene_space(t.base_polygon.size()));
    ds.templates.push_back(std::move(t));
  }

  const int n = config.per_class;
  const auto n_train = static_cast<int>(std::lround(config.train_fraction * n));
  const auto n_val = std::min(n - n_train, static_cast<int>(std::lround(config.validation_fraction * n)));

  Rng rng(config.seed);
  const auto& j = config.jitter;
  int next_id = 0;
  for (int c = 0; c < config.class_count; ++c) {
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Split> split_of(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
      const int rank = order[static_cast<std::size_t>(k)];
      split_of[static_cast<std::size_t>(k)] =
          rank < n_train ? Split::train : (rank < n_train + n_val ? Split::validation : Split::test);
    }
    const auto& space = ds.spaces[static_cast<std::size_t>(c)];
    for (int k = 0; k < n; ++k) {
      auto theta = neutral_params(space);
      for (double& v : theta.group(group::vertex)) v = jitter_draw(rng, 0.0, j.vertex);
      auto pose = theta.group(group::pose);
      pose[kRotation] = jitter_draw(rng, 0.0, j.rotation);
      pose[kTranslateX] = jitter_draw(rng, 0.0, j.translation);
      pose[kTranslateY] = jitter_draw(rng, 0.0, j.translation);
      pose[kScale] = jitter_draw(rng, 1.0, j.scale);
      for (double& v : theta.group(group::color)) v = jitter_draw(rng, 0.0, j.color);
      theta.group(group::lighting)[0] = jitter_draw(rng, 1.0, j.lighting);
      ds.manifest.entries.push_back(
          {next_id++, c, c, std::move(theta), split_of[static_cast<std::size_t>(k)]});
    }
  }
  ds.manifest.validate();
  return ds;
}

}  // namespace semcex
