#include "semcex/augment.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "semcex/error.hpp"
#include "semcex/rng.hpp"

namespace semcex {

std::vector<std::size_t> select_replacements(std::size_t size, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("replacement fraction must lie in (0, 1]");
  const auto count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(size)));
  std::vector<std::size_t> all(size);
  std::iota(all.begin(), all.end(), std::size_t{0});
  Rng rng(seed);
  std::vector<std::size_t> picked;
  picked.reserve(count);
  std::sample(all.begin(), all.end(), std::back_inserter(picked), count, rng);
  std::sort(picked.begin(), picked.end());
  return picked;
}

LabeledSet build_augmented_dataset(const LabeledSet& train, std::span<const int> sample_ids,
                                   std::span<const CounterexampleRecord> records,
                                   const AugmentPlan& plan) {
  if (sample_ids.size() != train.size()) throw DimensionError("sample ids and training set differ in size");
  std::unordered_map<int, const CounterexampleRecord*> by_id;
  for (const auto& r : records) by_id[r.sample_id] = &r;
  LabeledSet out = train;
  for (std::size_t i : select_replacements(train.size(), plan.fraction, plan.seed)) {
    const auto it = by_id.find(sample_ids[i]);
    if (it == by_id.end()) {
      throw DomainError("no counterexample record for training sample " + std::to_string(sample_ids[i]));
    }
    const Image& x = it->second->x_perturbed;
    if (x.size() != out.images[i].size()) throw DimensionError("record image has the wrong size");
    out.images[i] = quantize(x);
  }
  return out;
}

Classifier retrain(const Classifier& benign, const LabeledSet& augmented, const TrainConfig& config) {
  Classifier robust = benign;
  train(robust, augmented, config);
  return robust;
}

std::uint64_t model_fingerprint(const Classifier& model) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (int w : model.widths()) mix(static_cast<std::uint64_t>(w));
  for (double v : model.flat_parameters()) mix(std::bit_cast<std::uint64_t>(v));
  return h;
}

std::string to_string(MatrixMode mode) { return mode == MatrixMode::fixed ? "fixed" : "regenerated"; }

MatrixMode parse_matrix_mode(const std::string& text) {
  if (text == "fixed") return MatrixMode::fixed;
  if (text == "regenerated") return MatrixMode::regenerated;
  throw ConfigError("unknown matrix mode '" + text + "'");
}

EvalReport evaluate_on_records(const Classifier& model, std::span<const CounterexampleRecord> records) {
  std::vector<int> preds, labels;
  preds.reserve(records.size());
  labels.reserve(records.size());
  for (const auto& r : records) {
    preds.push_back(predict(model, r.x_perturbed));
    labels.push_back(r.label);
  }
  return evaluate_predictions(preds, labels, model.class_count());
}

EvalReport transfer_eval(std::span<const CounterexampleRecord> records_from_a, const Classifier& model_b) {
  for (const auto& r : records_from_a) {
    if (r.label < 0 || r.label >= model_b.class_count()) {
      throw DomainError("record label outside the class set of the evaluated model");
    }
    if (static_cast<int>(r.softmax_perturbed.size()) != model_b.class_count()) {
      throw DomainError("records come from a model with a different class set");
    }
  }
  return evaluate_on_records(model_b, records_from_a);
}

Table robustness_matrix(std::span<const NamedModel> models, std::span<const NamedAttack> attacks,
                        std::span<const SceneTemplate> templates,
                        std::span<const ManifestEntry* const> test_points, MatrixMode mode,
                        const AttackEnv& env, int workers) {
  if (models.empty()) throw ConfigError("robustness matrix needs at least the benign model");
  const Classifier& benign = *models.front().model;
  for (const auto& m : models) {
    if (m.model->widths() != benign.widths()) {
      throw ConfigError("model '" + m.name + "' has a different architecture");
    }
  }
  Table t;
  t.title = "Robustness matrix (" + to_string(mode) + ")";
  t.row_header = "train";
  t.columns.emplace_back("benign");
  for (const auto& a : attacks) t.columns.push_back(a.name);
  t.meta.emplace_back("mode", to_string(mode));

  LabeledSet clean;
  for (const auto* e : test_points) {
    clean.images.push_back(render(templates[static_cast<std::size_t>(e->template_id)], e->theta, env.render));
    clean.labels.push_back(e->class_id);
  }

  std::vector<BatchResult> fixed_sets;
  if (mode == MatrixMode::fixed) {
    for (const auto& a : attacks) {
      fixed_sets.push_back(attack_batch(benign, templates, test_points, a.config, env, workers));
    }
  }
  for (const auto& m : models) {
    t.row_names.push_back(m.name);
    std::vector<double> row{evaluate(*m.model, clean).overall};
    for (std::size_t k = 0; k < attacks.size(); ++k) {
      if (mode == MatrixMode::fixed) {
        row.push_back(evaluate_on_records(*m.model, fixed_sets[k].records).overall);
      } else {
        row.push_back(attack_batch(*m.model, templates, test_points, attacks[k].config, env, workers)
                          .summary.overall);
      }
    }
    t.values.push_back(std::move(row));
  }
  return t;
}

}  // namespace semcex
