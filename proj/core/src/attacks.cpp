#include "semcex/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "semcex/error.hpp"
#include "semcex/parallel.hpp"

namespace semcex {

std::string to_string(AttackMethod method) {
  switch (method) {
    case AttackMethod::sifgsm: return "si-FGSM";
    case AttackMethod::sgd: return "sGD";
    case AttackMethod::scw: return "sCW";
  }
  return "si-FGSM";
}

std::string short_name(AttackMethod method) {
  switch (method) {
    case AttackMethod::sifgsm: return "sifgsm";
    case AttackMethod::sgd: return "sgd";
    case AttackMethod::scw: return "scw";
  }
  return "sifgsm";
}

AttackMethod parse_attack_method(const std::string& text) {
  if (text == "sifgsm" || text == "si-FGSM") return AttackMethod::sifgsm;
  if (text == "sgd" || text == "sGD") return AttackMethod::sgd;
  if (text == "scw" || text == "sCW") return AttackMethod::scw;
  throw ConfigError("unknown attack method '" + text + "'");
}

bool AttackConfig::is_active(std::string_view group) const {
  return std::find(active_groups.begin(), active_groups.end(), group) != active_groups.end();
}

void AttackConfig::validate() const {
  if (iterations < 0) throw ConfigError("attack iterations must be non-negative");
  if (active_groups.empty()) throw ConfigError("attack needs at least one active group");
  auto require = [&](const GroupScalars& values, const char* what) {
    for (const auto& g : active_groups) {
      const auto it = values.find(g);
      if (it == values.end() || !(it->second > 0.0)) {
        throw ConfigError(std::string(what) + " for active group '" + g + "' must be positive");
      }
    }
  };
  switch (method) {
    case AttackMethod::sifgsm: require(step, "step size"); break;
    case AttackMethod::sgd:
      require(step, "step size");
      require(epsilon, "projection bound");
      break;
    case AttackMethod::scw:
      require(learning_rate, "learning rate");
      if (!(tradeoff > 0.0)) throw ConfigError("sCW tradeoff c must be positive");
      if (norm == NormOrder::linf) throw ConfigError("sCW supports the l1 and l2 norms");
      break;
  }
}

AttackConfig default_attack_config(AttackMethod method) {
  AttackConfig cfg;
  cfg.method = method;
  cfg.iterations = 5;
  switch (method) {
    case AttackMethod::sifgsm:
      cfg.step = {{"vertex", 0.0013}, {"pose", 0.02}, {"color", 0.0013}, {"lighting", 0.0013}};
      break;
    case AttackMethod::sgd:
      cfg.step = {{"vertex", 0.0011}, {"pose", 0.022}, {"color", 0.0011}, {"lighting", 0.0011}};
      cfg.epsilon = {{"vertex", 0.0055}, {"pose", 0.11}, {"color", 0.011}, {"lighting", 0.011}};
      break;
    case AttackMethod::scw:
      cfg.learning_rate = {{"vertex", 0.00096}, {"pose", 0.0288}, {"color", 0.00096}, {"lighting", 0.00096}};
      cfg.tradeoff = 0.1;
      cfg.norm = NormOrder::l1;
      break;
  }
  return cfg;
}

AttackConfig reference_attack_config(AttackMethod method) {
  AttackConfig cfg;
  cfg.method = method;
  cfg.iterations = 5;
  switch (method) {
    case AttackMethod::sifgsm:
      cfg.step = {{"vertex", 0.002}, {"pose", 0.15}};
      break;
    case AttackMethod::sgd:
      cfg.step = {{"vertex", 0.01}, {"pose", 0.20}};
      cfg.epsilon = {{"vertex", 0.05}, {"pose", 1.0}};
      break;
    case AttackMethod::scw:
      cfg.learning_rate = {{"vertex", 0.01}, {"pose", 0.30}};
      cfg.tradeoff = 0.1;
      cfg.norm = NormOrder::l1;
      break;
  }
  return cfg;
}

GroupScalars effective_epsilon(const AttackConfig& config, const ParamSpace& space) {
  GroupScalars eps;
  for (const auto& g : space.groups()) {
    double r = 0.0;
    if (config.is_active(g.name)) {
      switch (config.method) {
        case AttackMethod::sifgsm: r = config.iterations * config.step.at(g.name); break;
        case AttackMethod::sgd: r = config.epsilon.at(g.name); break;
        case AttackMethod::scw:
          for (std::size_t i = 0; i < g.dim(); ++i) r = std::max(r, g.upper[i] - g.lower[i]);
          break;
      }
    }
    eps[g.name] = r;
  }
  return eps;
}

namespace {

SemanticParams restrict_to(SemanticParams grad, std::span<const std::string> active) {
  for (std::size_t g = 0; g < grad.group_count(); ++g) {
    const auto& name = grad.space()[g].name;
    if (std::find(active.begin(), active.end(), name) == active.end()) {
      std::fill(grad.values(g).begin(), grad.values(g).end(), 0.0);
    }
  }
  return grad;
}

/// Per-coordinate value of a per-group scalar times the coordinate scale;
/// zero for inactive groups.
SemanticParams coordinate_rates(const SpacePtr& space, const GroupScalars& rates,
                                const AttackConfig& config) {
  auto out = SemanticParams::zeros(space);
  for (std::size_t g = 0; g < out.group_count(); ++g) {
    const auto& spec = (*space)[g];
    if (!config.is_active(spec.name)) continue;
    const double r = rates.at(spec.name);
    for (std::size_t i = 0; i < spec.dim(); ++i) out.values(g)[i] = r * spec.scale[i];
  }
  return out;
}

double sign(double v) { return (v > 0.0) - (v < 0.0); }

GroupScalars active_only(const GroupScalars& values, const AttackConfig& config) {
  GroupScalars out;
  for (const auto& g : config.active_groups) out[g] = values.at(g);
  return out;
}

void check_method(const AttackConfig& config, AttackMethod expected) {
  if (config.method != expected) {
    throw ConfigError("attack config is for " + to_string(config.method) + ", not " +
                      to_string(expected));
  }
  config.validate();
}

CounterexampleRecord start_record(const SemanticParams& theta0, int label, const AttackConfig& config) {
  if (!theta0.is_feasible()) throw DomainError("attack starting point is not feasible");
  CounterexampleRecord rec;
  rec.label = label;
  rec.method = to_string(config.method);
  rec.theta_original = theta0;
  rec.theta_perturbed = theta0;
  return rec;
}

/// Subgradient of the chosen norm at pi; zero for coordinates with |pi_i|
/// at or below 1e-12 (the origin).
std::vector<double> norm_subgradient(std::span<const double> pi, NormOrder norm) {
  constexpr double kOrigin = 1e-12;
  std::vector<double> g(pi.size(), 0.0);
  if (norm == NormOrder::l1) {
    for (std::size_t i = 0; i < pi.size(); ++i) g[i] = std::abs(pi[i]) > kOrigin ? sign(pi[i]) : 0.0;
  } else {
    double n2 = 0.0;
    for (double v : pi) n2 += v * v;
    const double n = std::sqrt(n2);
    if (n > kOrigin) {
      for (std::size_t i = 0; i < pi.size(); ++i) g[i] = pi[i] / n;
    }
  }
  return g;
}

double norm_value(std::span<const double> pi, NormOrder norm) {
  double n = 0.0;
  for (double v : pi) n += norm == NormOrder::l1 ? std::abs(v) : v * v;
  return norm == NormOrder::l1 ? n : std::sqrt(n);
}

}  // namespace

SemanticGradient semantic_logit_gradient(const Classifier& model, const SceneTemplate& scene,
                                         const SemanticParams& theta, const RenderConfig& render_cfg,
                                         const LogitCotangent& cotangent,
                                         std::span<const std::string> active_groups) {
  const Image x = render(scene, theta, render_cfg);
  SemanticGradient out;
  out.logits = forward(model, x);
  const auto cot = cotangent(out.logits);
  if (std::all_of(cot.begin(), cot.end(), [](double v) { return v == 0.0; })) {
    out.gradient = SemanticParams::zeros(theta.space_ptr());
    return out;
  }
  Image pixel_grad(x.height, x.width);
  pixel_grad.data = logits_vjp(model, x.pixels(), cot);
  out.gradient = restrict_to(render_vjp(scene, theta, render_cfg, pixel_grad), active_groups);
  return out;
}

SemanticGradient semantic_gradient(const Classifier& model, const SceneTemplate& scene,
                                   const SemanticParams& theta, const RenderConfig& render_cfg,
                                   LossKind kind, int label,
                                   std::span<const std::string> active_groups) {
  if (label < 0 || label >= model.class_count()) throw DomainError("label outside [0, L)");
  const auto cot = [&](std::span<const double> logits) {
    std::vector<double> c(logits.size(), 0.0);
    if (kind == LossKind::cross_entropy) {
      c = softmax(logits);
      c[static_cast<std::size_t>(label)] -= 1.0;
    } else {
      c[static_cast<std::size_t>(label)] = -1.0;
    }
    return c;
  };
  return semantic_logit_gradient(model, scene, theta, render_cfg, cot, active_groups);
}

namespace {

int runner_up(std::span<const double> logits, int t) {
  int best = -1;
  for (int i = 0; i < static_cast<int>(logits.size()); ++i) {
    if (i == t) continue;
    if (best < 0 || logits[static_cast<std::size_t>(i)] > logits[static_cast<std::size_t>(best)]) best = i;
  }
  return best;
}

}  // namespace

double cw_hinge(std::span<const double> logits, int t) {
  const int j = runner_up(logits, t);
  return std::max(logits[static_cast<std::size_t>(j)] - logits[static_cast<std::size_t>(t)], 0.0);
}

double cw_untargeted_objective(std::span<const double> logits, int t) {
  const int j = runner_up(logits, t);
  return std::max(logits[static_cast<std::size_t>(t)] - logits[static_cast<std::size_t>(j)], 0.0);
}

void finalize_record(CounterexampleRecord& rec, const Classifier& model, const SceneTemplate& scene,
                     const AttackEnv& env) {
  rec.x_original = render(scene, rec.theta_original, env.render);
  rec.x_perturbed = render(scene, rec.theta_perturbed, env.render);
  rec.pred_original = predict(model, rec.x_original);
  const auto logits = forward(model, rec.x_perturbed);
  rec.pred_perturbed = argmax(logits);
  rec.softmax_perturbed = softmax(logits);
  rec.realism = realism(rec.x_perturbed, rec.x_original, env.realism);
  rec.success = rec.pred_perturbed != rec.pred_original;
  rec.queries += 2;
}

CounterexampleRecord attack_sifgsm(const Classifier& model, const SceneTemplate& scene,
                                   const SemanticParams& theta0, int label,
                                   const AttackConfig& config, const AttackEnv& env) {
  check_method(config, AttackMethod::sifgsm);
  auto rec = start_record(theta0, label, config);
  const auto alpha = coordinate_rates(theta0.space_ptr(), config.step, config);
  SemanticParams theta = theta0;
  for (int k = 0; k < config.iterations; ++k) {
    const auto sg = semantic_gradient(model, scene, theta, env.render, config.loss, label,
                                      config.active_groups);
    ++rec.queries;
    auto step = sg.gradient;
    for (std::size_t g = 0; g < step.group_count(); ++g) {
      auto s = step.values(g);
      const auto a = alpha.values(g);
      for (std::size_t i = 0; i < s.size(); ++i) s[i] = a[i] * sign(s[i]);
    }
    theta = add(theta, step);
  }
  rec.theta_perturbed = theta;
  finalize_record(rec, model, scene, env);
  return rec;
}

CounterexampleRecord attack_sgd(const Classifier& model, const SceneTemplate& scene,
                                const SemanticParams& theta0, int label,
                                const AttackConfig& config, const AttackEnv& env) {
  check_method(config, AttackMethod::sgd);
  auto rec = start_record(theta0, label, config);
  const auto alpha = coordinate_rates(theta0.space_ptr(), config.step, config);
  const auto eps = active_only(config.epsilon, config);
  SemanticParams theta = theta0;
  for (int k = 0; k < config.iterations; ++k) {
    const auto sg = semantic_gradient(model, scene, theta, env.render, config.loss, label,
                                      config.active_groups);
    ++rec.queries;
    auto step = sg.gradient;
    for (std::size_t g = 0; g < step.group_count(); ++g) {
      auto s = step.values(g);
      const auto a = alpha.values(g);
      for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = a[i] * (config.signed_step ? sign(s[i]) : s[i]);
      }
    }
    theta = project(add(theta, step), theta0, eps);
  }
  rec.theta_perturbed = theta;
  finalize_record(rec, model, scene, env);
  return rec;
}

CounterexampleRecord attack_scw(const Classifier& model, const SceneTemplate& scene,
                                const SemanticParams& theta0, int label,
                                const AttackConfig& config, const AttackEnv& env) {
  check_method(config, AttackMethod::scw);
  auto rec = start_record(theta0, label, config);
  const SpacePtr& space = theta0.space_ptr();
  const auto eta = coordinate_rates(space, config.learning_rate, config).flatten();
  const auto flat0 = theta0.flatten();
  const std::size_t n = flat0.size();
  const int pred0 = predict(model, render(scene, theta0, env.render));

  // Only coordinates of active groups are optimized.
  std::vector<double> pi(n, 0.0), m(n, 0.0), v(n, 0.0);
  constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  const auto objective_cot = [&](std::span<const double> logits) {
    std::vector<double> c(logits.size(), 0.0);
    if (cw_untargeted_objective(logits, label) > 0.0) {
      c[static_cast<std::size_t>(label)] = config.tradeoff;
      c[static_cast<std::size_t>(runner_up(logits, label))] = -config.tradeoff;
    }
    return c;
  };

  SemanticParams best;
  double best_norm = std::numeric_limits<double>::infinity();
  SemanticParams theta = theta0;
  for (int k = 0; k < config.iterations; ++k) {
    const auto sg = semantic_logit_gradient(model, scene, theta, env.render, objective_cot,
                                            config.active_groups);
    ++rec.queries;
    if (k > 0) {
      const int pred = argmax(sg.logits);
      const double norm = norm_value(pi, config.norm);
      if (pred != label && pred != pred0 && norm < best_norm) {
        best_norm = norm;
        best = theta;
      }
    }
    const auto g_obj = sg.gradient.flatten();
    const auto g_norm = norm_subgradient(pi, config.norm);
    const double c1 = 1.0 - std::pow(beta1, k + 1);
    const double c2 = 1.0 - std::pow(beta2, k + 1);
    for (std::size_t i = 0; i < n; ++i) {
      if (eta[i] == 0.0) continue;
      const double g = g_norm[i] + g_obj[i];
      m[i] = beta1 * m[i] + (1.0 - beta1) * g;
      v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
      pi[i] -= eta[i] * (m[i] / c1) / (std::sqrt(v[i] / c2) + adam_eps);
    }
    // keep pi consistent with the feasible iterate actually rendered
    theta = add(theta0, SemanticParams::unflatten(space, pi));
    const auto flat = theta.flatten();
    for (std::size_t i = 0; i < n; ++i) pi[i] = flat[i] - flat0[i];
  }
  // The final iterate is judged by the prediction finalize_record makes.
  if (config.iterations > 0) {
    const int pred = predict(model, render(scene, theta, env.render));
    const double norm = norm_value(pi, config.norm);
    if (pred != label && pred != pred0 && norm < best_norm) best = theta;
    // A point misclassified at the start must not come back as a "success"
    // that restores the true label.
    if (best.group_count() == 0 && pred != pred0) best = theta0;
  }
  rec.theta_perturbed = best.group_count() > 0 ? best : theta;
  finalize_record(rec, model, scene, env);
  return rec;
}

CounterexampleRecord run_attack(const Classifier& model, const SceneTemplate& scene,
                                const SemanticParams& theta0, int label,
                                const AttackConfig& config, const AttackEnv& env) {
  switch (config.method) {
    case AttackMethod::sifgsm: return attack_sifgsm(model, scene, theta0, label, config, env);
    case AttackMethod::sgd: return attack_sgd(model, scene, theta0, label, config, env);
    case AttackMethod::scw: return attack_scw(model, scene, theta0, label, config, env);
  }
  throw ConfigError("unknown attack method");
}

bool is_counterexample(const CounterexampleRecord& record, const GroupScalars& epsilon) {
  if (record.pred_perturbed == record.pred_original) return false;
  const auto& a = record.theta_original;
  const auto& b = record.theta_perturbed;
  if (!a.same_structure(b)) return false;
  for (std::size_t g = 0; g < a.group_count(); ++g) {
    const auto it = epsilon.find(a.space()[g].name);
    const double eps = it == epsilon.end() ? 0.0 : it->second;
    const double tol = 1e-12 * std::max(1.0, eps);
    const auto va = a.values(g);
    const auto vb = b.values(g);
    for (std::size_t i = 0; i < va.size(); ++i) {
      if (std::abs(vb[i] - va[i]) > eps + tol) return false;
    }
  }
  return true;
}

BatchResult summarize(std::vector<CounterexampleRecord> records, int class_count) {
  BatchResult out;
  std::vector<int> preds, labels;
  for (const auto& r : records) {
    preds.push_back(r.pred_perturbed);
    labels.push_back(r.label);
    out.total_queries += r.queries;
    out.successes += r.success;
  }
  out.summary = evaluate_predictions(preds, labels, class_count);
  out.records = std::move(records);
  return out;
}

BatchResult attack_batch(const Classifier& model, std::span<const SceneTemplate> templates,
                         std::span<const ManifestEntry* const> points,
                         const AttackConfig& config, const AttackEnv& env, int workers) {
  config.validate();
  std::vector<CounterexampleRecord> records(points.size());
  parallel_for(points.size(), workers, [&](std::size_t i) {
    const ManifestEntry& e = *points[i];
    if (e.template_id < 0 || e.template_id >= static_cast<int>(templates.size())) {
      throw DomainError("sample " + std::to_string(e.sample_id) + " references a missing template");
    }
    const auto& scene = templates[static_cast<std::size_t>(e.template_id)];
    auto rec = run_attack(model, scene, e.theta, e.class_id, config, env);
    rec.sample_id = e.sample_id;
    rec.template_id = e.template_id;
    records[i] = std::move(rec);
  });
  return summarize(std::move(records), model.class_count());
}

}  // namespace semcex
