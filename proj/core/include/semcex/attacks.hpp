#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "semcex/classifier.hpp"
#include "semcex/dataset.hpp"
#include "semcex/metrics.hpp"
#include "semcex/param_space.hpp"
#include "semcex/renderer.hpp"

namespace semcex {

enum class AttackMethod { sifgsm, sgd, scw };

std::string to_string(AttackMethod method);       ///< "si-FGSM", "sGD", "sCW"
std::string short_name(AttackMethod method);      ///< "sifgsm", "sgd", "scw"
AttackMethod parse_attack_method(const std::string& text);

/// Hyperparameters of one semantic attack. Per-group scalars are multiplied by
/// each coordinate's ParamGroup::scale.
struct AttackConfig {
  AttackMethod method = AttackMethod::sifgsm;
  std::vector<std::string> active_groups{"pose", "vertex"};
  GroupScalars step;           ///< alpha_g (si-FGSM, sGD)
  GroupScalars epsilon;        ///< projection radius eps_g (sGD)
  GroupScalars learning_rate;  ///< Adam eta_g (sCW)
  int iterations = 5;          ///< K; 0 is a no-op attack
  double tradeoff = 0.1;       ///< c (sCW)
  NormOrder norm = NormOrder::l1;
  LossKind loss = LossKind::raw_score;
  /// sGD only: take sign(gradient) like PGD instead of the raw gradient.
  bool signed_step = false;
  std::uint64_t seed = 0;

  void validate() const;
  bool is_active(std::string_view group) const;
};

/// Presets calibrated for the 32x32 soft rasterizer (see docs/calibration.md).
AttackConfig default_attack_config(AttackMethod method);
/// Unscaled presets sized for a large mesh renderer; see docs/calibration.md.
AttackConfig reference_attack_config(AttackMethod method);

/// Radius within which every perturbation produced by `config` lies, per group
/// of `space`: eps_g for sGD, K * alpha_g for si-FGSM, the feasible width for
/// sCW (unbounded), 0 for inactive groups.
GroupScalars effective_epsilon(const AttackConfig& config, const ParamSpace& space);

struct CounterexampleRecord {
  int sample_id = -1;
  int template_id = 0;
  int label = 0;
  std::string method;
  SemanticParams theta_original;
  SemanticParams theta_perturbed;
  Image x_original;
  Image x_perturbed;
  int pred_original = 0;
  int pred_perturbed = 0;
  std::vector<double> softmax_perturbed;
  double realism = 1.0;
  bool success = false;
  long queries = 0;
};

/// Shared rendering/realism settings for attacks and samplers.
struct AttackEnv {
  RenderConfig render;
  RealismConfig realism;
};

struct SemanticGradient {
  SemanticParams gradient;  ///< zero outside the active groups
  std::vector<double> logits;
};

/// Maps the logits at the current image to a logit cotangent.
using LogitCotangent = std::function<std::vector<double>(std::span<const double>)>;

/// [dR/dtheta]^T [dPhi/dx]^T cot(Phi), restricted to `active_groups`.
SemanticGradient semantic_logit_gradient(const Classifier& model, const SceneTemplate& scene,
                                         const SemanticParams& theta, const RenderConfig& render,
                                         const LogitCotangent& cotangent,
                                         std::span<const std::string> active_groups);

/// Gradient of loss(render(theta), label) with respect to theta.
SemanticGradient semantic_gradient(const Classifier& model, const SceneTemplate& scene,
                                   const SemanticParams& theta, const RenderConfig& render,
                                   LossKind kind, int label,
                                   std::span<const std::string> active_groups);

/// f = max(max_{i != t} Phi_i - Phi_t, 0): zero while class t wins.
double cw_hinge(std::span<const double> logits, int t);

/// Objective minimized by the untargeted sCW attack with true label t:
/// max(Phi_t - max_{i != t} Phi_i, 0), zero once the true class is beaten.
double cw_untargeted_objective(std::span<const double> logits, int t);

/// Fills images, predictions, softmax, realism and success of a record whose
/// thetas are set. Counts two queries (original and final prediction).
void finalize_record(CounterexampleRecord& record, const Classifier& model,
                     const SceneTemplate& scene, const AttackEnv& env);

CounterexampleRecord attack_sifgsm(const Classifier& model, const SceneTemplate& scene,
                                   const SemanticParams& theta0, int label,
                                   const AttackConfig& config, const AttackEnv& env);
CounterexampleRecord attack_sgd(const Classifier& model, const SceneTemplate& scene,
                                const SemanticParams& theta0, int label,
                                const AttackConfig& config, const AttackEnv& env);
CounterexampleRecord attack_scw(const Classifier& model, const SceneTemplate& scene,
                                const SemanticParams& theta0, int label,
                                const AttackConfig& config, const AttackEnv& env);

/// Dispatches on config.method.
CounterexampleRecord run_attack(const Classifier& model, const SceneTemplate& scene,
                                const SemanticParams& theta0, int label,
                                const AttackConfig& config, const AttackEnv& env);

/// Label flipped and every group within its radius (missing groups: radius 0).
bool is_counterexample(const CounterexampleRecord& record, const GroupScalars& epsilon);

struct BatchResult {
  std::vector<CounterexampleRecord> records;
  /// Accuracy of the perturbed predictions against the true labels.
  EvalReport summary;
  long total_queries = 0;
  int successes = 0;
};

/// Accuracy of perturbed predictions plus query/success totals.
BatchResult summarize(std::vector<CounterexampleRecord> records, int class_count);

/// Runs the configured attack on every point.
BatchResult attack_batch(const Classifier& model, std::span<const SceneTemplate> templates,
                         std::span<const ManifestEntry* const> points,
                         const AttackConfig& config, const AttackEnv& env, int workers = 1);

}  // namespace semcex
