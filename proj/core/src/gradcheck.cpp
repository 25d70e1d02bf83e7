#include "semcex/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "semcex/attacks.hpp"
#include "semcex/rng.hpp"
#include "semcex/scene.hpp"

namespace semcex {

double relative_error(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  return scale > 0.0 ? std::abs(analytic - numeric) / scale : 0.0;
}

namespace {

struct Trial {
  SceneTemplate scene;
  SemanticParams theta;
  SemanticParams direction;
};

// Random scene and parameters at least a step away from every clamp: colors
// stay in (0, 1), color * lighting stays below 1.
Trial random_trial(Rng& rng) {
  const auto& families = shape_families();
  Trial t;
  t.scene.family = families[std::uniform_int_distribution<std::size_t>(0, families.size() - 1)(rng)];
  t.scene.base_polygon = family_polygon(t.scene.family);
  for (int c = 0; c < 3; ++c) {
    t.scene.base_color[c] = uniform(rng, 0.25, 0.75);
    t.scene.background_color[c] = uniform(rng, 0.0, 0.3);
  }
  const auto space = make_scene_space(t.scene.base_polygon.size());
  t.theta = neutral_params(space);
  for (double& v : t.theta.group(group::vertex)) v = uniform(rng, -0.04, 0.04);
  auto pose = t.theta.group(group::pose);
  pose[kRotation] = uniform(rng, -1.0, 1.0);
  pose[kTranslateX] = uniform(rng, -0.1, 0.1);
  pose[kTranslateY] = uniform(rng, -0.1, 0.1);
  pose[kScale] = uniform(rng, 0.85, 1.15);
  for (double& v : t.theta.group(group::color)) v = uniform(rng, -0.08, 0.08);
  t.theta.group(group::lighting)[0] = uniform(rng, 0.6, 1.15);

  t.direction = SemanticParams::zeros(space);
  for (std::size_t g = 0; g < space->size(); ++g) {
    auto d = t.direction.values(g);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = uniform(rng, -1.0, 1.0) * (*space)[g].scale[i];
  }
  // Unit length, so no coordinate moves by more than h.
  const auto flat = t.direction.flatten();
  const double norm = std::sqrt(std::inner_product(flat.begin(), flat.end(), flat.begin(), 0.0));
  for (std::size_t g = 0; g < space->size(); ++g) {
    for (double& v : t.direction.values(g)) v /= norm;
  }
  return t;
}

SemanticParams offset(const SemanticParams& theta, const SemanticParams& direction, double h) {
  auto flat = theta.flatten();
  const auto d = direction.flatten();
  for (std::size_t i = 0; i < flat.size(); ++i) flat[i] += h * d[i];
  return SemanticParams::unflatten(theta.space_ptr(), flat);
}

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

void finish(GradcheckResult& r, std::vector<double>& errors) {
  r.trials = static_cast<int>(errors.size());
  if (errors.empty()) return;
  r.max_error = *std::max_element(errors.begin(), errors.end());
  std::nth_element(errors.begin(), errors.begin() + errors.size() / 2, errors.end());
  r.median_error = errors[errors.size() / 2];
}

void record(GradcheckResult& r, std::vector<double>& errors, double analytic, double numeric) {
  const double err = relative_error(analytic, numeric);
  errors.push_back(err);
  if (err < r.tolerance || (std::abs(analytic) < r.abs_floor && std::abs(numeric) < r.abs_floor)) ++r.passed;
}

Classifier random_model(std::vector<int> widths, Rng& rng) {
  Classifier model(std::move(widths), rng());
  // Nonzero biases so ReLU kinks do not all sit at the origin.
  for (auto& layer : model.layers()) {
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = uniform(rng, -0.2, 0.2);
  }
  return model;
}

}  // namespace

GradcheckResult gradcheck_renderer(int trials, std::uint64_t seed, const RenderConfig& config) {
  GradcheckResult r{"renderer_vjp", 0, 0, 1e-2, 1e-7, 0.95};
  const double h = 1e-4;
  std::vector<double> errors;
  Rng rng(seed);
  for (int k = 0; k < trials; ++k) {
    const auto t = random_trial(rng);
    Image cot(config.height, config.width);
    for (double& v : cot.data) v = uniform(rng, -1.0, 1.0);
    const auto grad = render_vjp(t.scene, t.theta, config, cot);
    const double analytic = dot(grad.flatten(), t.direction.flatten());
    const double plus = dot(cot.data, render(t.scene, offset(t.theta, t.direction, h), config).data);
    const double minus = dot(cot.data, render(t.scene, offset(t.theta, t.direction, -h), config).data);
    record(r, errors, analytic, (plus - minus) / (2.0 * h));
  }
  finish(r, errors);
  return r;
}

GradcheckResult gradcheck_semantic(const Classifier& model, int trials, std::uint64_t seed,
                                   const RenderConfig& config) {
  GradcheckResult r{"semantic_gradient", 0, 0, 1e-2, 1e-7, 0.95};
  const double h = 1e-4;
  const std::vector<std::string> all{"vertex", "pose", "color", "lighting"};
  std::vector<double> errors;
  Rng rng(seed);
  for (int k = 0; k < trials; ++k) {
    const auto t = random_trial(rng);
    const int label = std::uniform_int_distribution<int>(0, model.class_count() - 1)(rng);
    const auto kind = k % 2 == 0 ? LossKind::cross_entropy : LossKind::raw_score;
    const auto g = semantic_gradient(model, t.scene, t.theta, config, kind, label, all);
    const double analytic = dot(g.gradient.flatten(), t.direction.flatten());
    const double plus = loss(model, render(t.scene, offset(t.theta, t.direction, h), config), label, kind);
    const double minus = loss(model, render(t.scene, offset(t.theta, t.direction, -h), config), label, kind);
    record(r, errors, analytic, (plus - minus) / (2.0 * h));
  }
  finish(r, errors);
  return r;
}

GradcheckResult gradcheck_classifier_input(int trials, std::uint64_t seed) {
  GradcheckResult r{"classifier_input", 0, 0, 1e-4, 1e-9, 1.0};
  const double h = 1e-5;
  std::vector<double> errors;
  Rng rng(seed);
  for (int k = 0; k < trials; ++k) {
    const auto model = random_model({12, 6, 5, 3}, rng);
    Image x(2, 2);
    for (double& v : x.data) v = uniform(rng, 0.0, 1.0);
    std::vector<double> dir(x.size());
    for (double& v : dir) v = uniform(rng, -1.0, 1.0);
    const int label = std::uniform_int_distribution<int>(0, 2)(rng);
    const auto kind = k % 2 == 0 ? LossKind::cross_entropy : LossKind::raw_score;
    const double analytic = dot(input_gradient(model, x, label, kind).data, dir);
    Image xp = x, xm = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
      xp.data[i] += h * dir[i];
      xm.data[i] -= h * dir[i];
    }
    record(r, errors, analytic, (loss(model, xp, label, kind) - loss(model, xm, label, kind)) / (2.0 * h));
  }
  finish(r, errors);
  return r;
}

GradcheckResult gradcheck_classifier_weights(int trials, std::uint64_t seed) {
  GradcheckResult r{"classifier_weights", 0, 0, 1e-4, 1e-9, 1.0};
  const double h = 1e-5;
  std::vector<double> errors;
  Rng rng(seed);
  for (int k = 0; k < trials; ++k) {
    auto model = random_model({8, 5, 4, 3}, rng);
    std::vector<double> input(8);
    for (double& v : input) v = uniform(rng, 0.0, 1.0);
    const int label = std::uniform_int_distribution<int>(0, 2)(rng);
    const auto kind = k % 2 == 0 ? LossKind::cross_entropy : LossKind::raw_score;
    const auto params = model.flat_parameters();
    std::vector<double> dir(params.size());
    for (double& v : dir) v = uniform(rng, -1.0, 1.0);
    const double analytic = dot(parameter_gradient(model, input, label, kind), dir);

    auto eval_at = [&](double step) {
      auto p = params;
      for (std::size_t i = 0; i < p.size(); ++i) p[i] += step * dir[i];
      model.set_flat_parameters(p);
      const auto logits = forward(model, input);
      const auto probs = softmax(logits);
      return kind == LossKind::cross_entropy ? -std::log(probs[static_cast<std::size_t>(label)])
                                             : -logits[static_cast<std::size_t>(label)];
    };
    const double numeric = (eval_at(h) - eval_at(-h)) / (2.0 * h);
    record(r, errors, analytic, numeric);
  }
  finish(r, errors);
  return r;
}

std::vector<GradcheckResult> run_all_gradchecks(std::uint64_t seed, const RenderConfig& config,
                                                const Classifier* model) {
  std::vector<GradcheckResult> out;
  out.push_back(gradcheck_renderer(200, derive_seed(seed, 0), config));
  if (model != nullptr) {
    out.push_back(gradcheck_semantic(*model, 100, derive_seed(seed, 1), config));
  } else {
    Rng rng(derive_seed(seed, 1));
    const auto probe = random_model(mlp_widths(config.height, config.width, {32}, 4), rng);
    out.push_back(gradcheck_semantic(probe, 100, derive_seed(seed, 1), config));
  }
  out.push_back(gradcheck_classifier_input(50, derive_seed(seed, 2)));
  out.push_back(gradcheck_classifier_weights(50, derive_seed(seed, 3)));
  return out;
}

}  // namespace semcex
