#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "semcex/attacks.hpp"
#include "semcex/classifier.hpp"
#include "semcex/metrics.hpp"

namespace semcex {

/// Indices of floor(fraction * size) training points chosen uniformly without
/// replacement, in increasing order. fraction must lie in (0, 1].
std::vector<std::size_t> select_replacements(std::size_t size, double fraction, std::uint64_t seed);

struct AugmentPlan {
  double fraction = 0.5;
  std::uint64_t seed = 0;
};

/// Copy of `train` in which the selected points' images are replaced by the
/// perturbed image of the record with the same sample id, quantized to 8 bits
/// like the PNG round trip. Labels are kept.
/// `sample_ids[i]` is the sample id of train point i. Throws DomainError if a
/// selected point has no record.
LabeledSet build_augmented_dataset(const LabeledSet& train, std::span<const int> sample_ids,
                                   std::span<const CounterexampleRecord> records,
                                   const AugmentPlan& plan);

/// Warm-started copy of `benign` trained further on `augmented`.
Classifier retrain(const Classifier& benign, const LabeledSet& augmented, const TrainConfig& config);

/// 64-bit FNV-1a over the model's widths and parameter bytes.
std::uint64_t model_fingerprint(const Classifier& model);

enum class MatrixMode { fixed, regenerated };

std::string to_string(MatrixMode mode);
MatrixMode parse_matrix_mode(const std::string& text);

struct NamedModel {
  std::string name;
  const Classifier* model = nullptr;
};

struct NamedAttack {
  std::string name;
  AttackConfig config;
};

/// Rows = training method (first row must be the benign model), columns =
/// "benign" followed by one column per attack. Fixed mode attacks the benign
/// model once per method and evaluates every model on those images;
/// regenerated mode attacks each evaluated model.
Table robustness_matrix(std::span<const NamedModel> models, std::span<const NamedAttack> attacks,
                        std::span<const SceneTemplate> templates,
                        std::span<const ManifestEntry* const> test_points, MatrixMode mode,
                        const AttackEnv& env, int workers = 1);

/// Accuracy of `model` on the perturbed images of `records` (true labels).
EvalReport evaluate_on_records(const Classifier& model, std::span<const CounterexampleRecord> records);

/// Evaluates model B on counterexamples generated against model A.
EvalReport transfer_eval(std::span<const CounterexampleRecord> records_from_a, const Classifier& model_b);

}  // namespace semcex
