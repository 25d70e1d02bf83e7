#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <semcex/attacks.hpp>
#include <semcex/augment.hpp>
#include <semcex/classifier.hpp>
#include <semcex/dataset.hpp>
#include <semcex/metrics.hpp>
#include <semcex/renderer.hpp>
#include <semcex/samplers.hpp>

namespace semcex::cli {

inline constexpr int kSchemaVersion = 1;

/// Everything a run depends on. Loaded from a JSON document whose keys mirror
/// these fields; absent keys keep the defaults below.
struct RunConfig {
  int schema_version = kSchemaVersion;
  std::string experiment = "default";
  /// Dataset seed; every artifact downstream inherits it through the dataset.
  std::uint64_t seed = 7;
  DatasetConfig dataset;
  RenderConfig render;
  int realism_levels = 3;
  Membership membership = Membership::binary;

  /// Architecture under attack ("A") and the transfer target ("B").
  std::vector<int> hidden{128, 64};
  std::uint64_t model_seed = 1;
  std::vector<int> transfer_hidden{128};
  std::uint64_t transfer_model_seed = 2;
  TrainConfig train;
  /// Reused as-is for the augmentation retraining.
  TrainConfig retrain;

  std::map<std::string, AttackConfig> attacks;  ///< keyed by short method name
  SamplerConfig sampler;
  AugmentPlan augment{0.5, 3};

  /// Test points attacked or sampled; 0 means the whole test split.
  int test_points = 0;
  int gallery_pairs = 8;
  int gradcheck_trials = 200;

  RunConfig();
  void validate() const;
  /// Dataset config with `seed` applied.
  DatasetConfig dataset_config() const;
  AttackEnv attack_env() const;
  const AttackConfig& attack(AttackMethod method) const;
};

/// Parses a config document. Unknown keys and a schema version other than
/// kSchemaVersion are ConfigErrors.
RunConfig config_from_json(const std::string& text);
/// Full effective config, keys in a fixed order.
std::string config_to_json(const RunConfig& config);
/// 16 hex digits of FNV-1a over config_to_json.
std::string config_hash(const RunConfig& config);

std::vector<std::string> split_list(const std::string& csv);
std::vector<int> parse_int_list(const std::string& csv);

}  // namespace semcex::cli
