#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <semcex/attacks.hpp>
#include <semcex/error.hpp>
#include <semcex/rng.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace semcex;

namespace {

const std::vector<std::string> kAllGroups{"vertex", "pose", "color", "lighting"};

// n points spread evenly over the test split, so every class appears.
std::vector<const ManifestEntry*> first_points(std::size_t n) {
  const auto& t = fixture::small().test;
  n = std::min(n, t.size());
  std::vector<const ManifestEntry*> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(t[i * t.size() / n]);
  return out;
}

double dot_flat(const SemanticParams& a, const std::vector<double>& b) {
  const auto fa = a.flatten();
  double s = 0.0;
  for (std::size_t i = 0; i < fa.size(); ++i) s += fa[i] * b[i];
  return s;
}

SemanticParams shifted(const SemanticParams& theta, const std::vector<double>& dir, double h) {
  auto flat = theta.flatten();
  for (std::size_t i = 0; i < flat.size(); ++i) flat[i] += h * dir[i];
  return SemanticParams::unflatten(theta.space_ptr(), flat);
}

}  // namespace

TEST_CASE("method names round-trip") {
  for (auto m : {AttackMethod::sifgsm, AttackMethod::sgd, AttackMethod::scw}) {
    CHECK(parse_attack_method(to_string(m)) == m);
    CHECK(parse_attack_method(short_name(m)) == m);
  }
  CHECK_THROWS_AS(parse_attack_method("fgsm"), ConfigError);
}

TEST_CASE("config validation") {
  auto cfg = default_attack_config(AttackMethod::sgd);
  CHECK_NOTHROW(cfg.validate());
  cfg.iterations = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = default_attack_config(AttackMethod::sgd);
  cfg.epsilon.erase("pose");
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = default_attack_config(AttackMethod::scw);
  cfg.norm = NormOrder::linf;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = default_attack_config(AttackMethod::sifgsm);
  cfg.active_groups.clear();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = default_attack_config(AttackMethod::sifgsm);
  cfg.iterations = 0;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("a dead model gives a zero semantic gradient") {
  const auto& s = fixture::small();
  const auto dead = Classifier::zeros(s.model.widths());
  const auto* e = s.test.front();
  for (auto kind : {LossKind::raw_score, LossKind::cross_entropy}) {
    const auto g = semantic_gradient(dead, s.data.templates[e->template_id], e->theta, s.env.render,
                                     kind, e->class_id, kAllGroups);
    for (double v : g.gradient.flatten()) CHECK(v == 0.0);
  }
}

TEST_CASE("lighting gradient of a linear model has the closed form") {
  const auto& s = fixture::small();
  auto lin = Classifier::zeros({16 * 16 * 3, 4});
  Rng rng(21);
  auto& w = lin.layers()[0].weights;
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = uniform(rng, -1, 1);
  }
  const auto* e = s.test[3];
  const auto& scene = s.data.templates[e->template_id];
  auto theta = e->theta;
  // x is affine in the lighting scalar while nothing clamps, so a two-point
  // difference is its exact derivative.
  auto lo = theta, hi = theta;
  lo.group("lighting")[0] = 0.5;
  hi.group("lighting")[0] = 1.0;
  const Image xl = render(scene, lo, s.env.render), xh = render(scene, hi, s.env.render);
  theta.group("lighting")[0] = 0.8;
  const std::vector<std::string> light{"lighting"};
  for (int label = 0; label < 4; ++label) {
    double expected = 0.0;
    for (std::size_t p = 0; p < xl.size(); ++p) {
      expected -= w(label, static_cast<Eigen::Index>(p)) * (xh.data[p] - xl.data[p]) / 0.5;
    }
    const auto g = semantic_gradient(lin, scene, theta, s.env.render, LossKind::raw_score, label, light);
    CHECK(std::abs(g.gradient.group("lighting")[0] - expected) < 1e-10 * std::max(1.0, std::abs(expected)));
    for (double v : g.gradient.group("pose")) CHECK(v == 0.0);
  }
}

TEST_CASE("semantic gradient matches end-to-end finite differences") {
  const auto& s = fixture::small();
  Rng rng(8);
  int passed = 0;
  const int trials = 100;
  for (int k = 0; k < trials; ++k) {
    const auto* e = s.test[static_cast<std::size_t>(k) % s.test.size()];
    const auto& scene = s.data.templates[e->template_id];
    auto theta = e->theta;
    auto dir = theta.flatten();
    double n2 = 0.0;
    for (double& v : dir) {
      v = uniform(rng, -1, 1);
      n2 += v * v;
    }
    for (double& v : dir) v /= std::sqrt(n2);
    const auto kind = k % 2 ? LossKind::raw_score : LossKind::cross_entropy;
    const auto g = semantic_gradient(s.model, scene, theta, s.env.render, kind, e->class_id, kAllGroups);
    const double analytic = dot_flat(g.gradient, dir);
    const double h = 1e-4;
    const double numeric = oracle::central_difference(
        [&](double t) {
          return loss(s.model, render(scene, shifted(theta, dir, t), s.env.render), e->class_id, kind);
        },
        h);
    passed += oracle::rel_err(analytic, numeric) < 1e-2 || std::abs(analytic - numeric) < 1e-7;
  }
  CHECK(passed >= 95);
}

TEST_CASE("si-FGSM with K = 1 moves each coordinate by alpha * scale * sign(gradient)") {
  const auto& s = fixture::small();
  auto cfg = default_attack_config(AttackMethod::sifgsm);
  cfg.iterations = 1;
  cfg.active_groups = kAllGroups;
  for (const auto* e : first_points(10)) {
    const auto& scene = s.data.templates[e->template_id];
    const auto rec = attack_sifgsm(s.model, scene, e->theta, e->class_id, cfg, s.env);
    const auto g = semantic_gradient(s.model, scene, e->theta, s.env.render, cfg.loss, e->class_id,
                                     kAllGroups);
    for (std::size_t gi = 0; gi < g.gradient.group_count(); ++gi) {
      const auto& spec = e->theta.space()[gi];
      for (std::size_t i = 0; i < spec.dim(); ++i) {
        const double sg = (g.gradient.values(gi)[i] > 0) - (g.gradient.values(gi)[i] < 0);
        const double want = std::clamp(e->theta.values(gi)[i] + cfg.step.at(spec.name) * spec.scale[i] * sg,
                                       spec.lower[i], spec.upper[i]);
        CHECK(rec.theta_perturbed.values(gi)[i] == doctest::Approx(want).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("si-FGSM stays within K * alpha * scale") {
  const auto& s = fixture::small();
  for (int K : {1, 3, 8}) {
    auto cfg = default_attack_config(AttackMethod::sifgsm);
    cfg.iterations = K;
    cfg.active_groups = kAllGroups;
    for (const auto* e : first_points(8)) {
      const auto rec = attack_sifgsm(s.model, s.data.templates[e->template_id], e->theta, e->class_id, cfg, s.env);
      CHECK(rec.theta_perturbed.is_feasible());
      for (std::size_t gi = 0; gi < rec.theta_perturbed.group_count(); ++gi) {
        const auto& spec = e->theta.space()[gi];
        for (std::size_t i = 0; i < spec.dim(); ++i) {
          const double d = std::abs(rec.theta_perturbed.values(gi)[i] - e->theta.values(gi)[i]);
          CHECK(d <= K * cfg.step.at(spec.name) * spec.scale[i] * (1 + 1e-12));
        }
      }
    }
  }
}

TEST_CASE("sGD stays within its projection ball") {
  const auto& s = fixture::small();
  for (bool signed_step : {false, true}) {
    auto cfg = default_attack_config(AttackMethod::sgd);
    cfg.iterations = 12;
    cfg.signed_step = signed_step;
    cfg.active_groups = kAllGroups;
    for (auto& [g, a] : cfg.step) a *= 20.0;  // large steps so the ball binds
    for (const auto* e : first_points(8)) {
      const auto rec = attack_sgd(s.model, s.data.templates[e->template_id], e->theta, e->class_id, cfg, s.env);
      CHECK(rec.theta_perturbed.is_feasible());
      for (std::size_t gi = 0; gi < rec.theta_perturbed.group_count(); ++gi) {
        const auto& spec = e->theta.space()[gi];
        for (std::size_t i = 0; i < spec.dim(); ++i) {
          const double d = std::abs(rec.theta_perturbed.values(gi)[i] - e->theta.values(gi)[i]);
          CHECK(d <= cfg.epsilon.at(spec.name) * spec.scale[i]);
        }
      }
    }
  }
}

TEST_CASE("a zero gradient is a fixed point of every attack") {
  const auto& s = fixture::small();
  const auto dead = Classifier::zeros(s.model.widths());
  const auto* e = s.test.front();
  for (auto m : {AttackMethod::sifgsm, AttackMethod::sgd, AttackMethod::scw}) {
    auto cfg = default_attack_config(m);
    cfg.active_groups = kAllGroups;
    const auto rec = run_attack(dead, s.data.templates[e->template_id], e->theta, e->class_id, cfg, s.env);
    CHECK(rec.theta_perturbed == e->theta);
    CHECK_FALSE(rec.success);
  }
}

TEST_CASE("cw_hinge and the untargeted objective") {
  const std::vector<double> phi{2.0, 5.0, 1.0};
  CHECK(cw_hinge(phi, 1) == 0.0);
  CHECK(cw_hinge(phi, 0) == 3.0);
  CHECK(cw_untargeted_objective(phi, 1) == 3.0);
  CHECK(cw_untargeted_objective(phi, 0) == 0.0);
  const std::vector<double> tie{4.0, 4.0};
  CHECK(cw_hinge(tie, 0) == 0.0);
  CHECK(cw_untargeted_objective(tie, 1) == 0.0);
}

TEST_CASE("sCW success implies the true label is beaten") {
  const auto& s = fixture::small();
  auto cfg = default_attack_config(AttackMethod::scw);
  cfg.iterations = 10;
  for (auto& [g, r] : cfg.learning_rate) r *= 4.0;
  const auto res = attack_batch(s.model, s.data.templates, first_points(40), cfg, s.env);
  int successes = 0;
  for (const auto& r : res.records) {
    CHECK(r.theta_perturbed.is_feasible());
    if (r.success) {
      ++successes;
      CHECK(r.pred_perturbed != r.label);
      CHECK(r.pred_perturbed != r.pred_original);
    }
  }
  CHECK(successes > 0);
}

TEST_CASE("sCW with a vanishing tradeoff barely moves") {
  const auto& s = fixture::small();
  auto cfg = default_attack_config(AttackMethod::scw);
  cfg.tradeoff = 1e-300;
  cfg.active_groups = kAllGroups;
  for (const auto* e : first_points(5)) {
    const auto rec = attack_scw(s.model, s.data.templates[e->template_id], e->theta, e->class_id, cfg, s.env);
    const auto a = rec.theta_perturbed.flatten(), b = e->theta.flatten();
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-200);
  }
}

TEST_CASE("is_counterexample examples") {
  const auto space = oracle::box_space({{"pose", 2, -3, 3}, {"vertex", 2, -1, 1}});
  CounterexampleRecord r;
  r.theta_original = SemanticParams(space, {{0.0, 0.0}, {0.0, 0.0}});
  r.theta_perturbed = SemanticParams(space, {{0.2, -0.1}, {0.0, 0.0}});
  r.pred_original = 1;
  r.pred_perturbed = 2;
  CHECK(is_counterexample(r, {{"pose", 0.2}}));
  CHECK_FALSE(is_counterexample(r, {{"pose", 0.19}}));
  r.pred_perturbed = 1;
  CHECK_FALSE(is_counterexample(r, {{"pose", 0.2}}));
  r.pred_perturbed = 2;
  r.theta_perturbed.group("vertex")[1] = 0.01;
  CHECK_FALSE(is_counterexample(r, {{"pose", 0.2}}));
  CHECK(is_counterexample(r, {{"pose", 0.2}, {"vertex", 0.01}}));
}

TEST_CASE("query accounting is K + 2 per point") {
  const auto& s = fixture::small();
  for (auto m : {AttackMethod::sifgsm, AttackMethod::sgd, AttackMethod::scw}) {
    for (int K : {0, 1, 5}) {
      auto cfg = default_attack_config(m);
      cfg.iterations = K;
      const auto pts = first_points(6);
      const auto res = attack_batch(s.model, s.data.templates, pts, cfg, s.env);
      for (const auto& r : res.records) CHECK(r.queries == K + 2);
      CHECK(res.total_queries == static_cast<long>(pts.size()) * (K + 2));
    }
  }
}

TEST_CASE("K = 0 batch equals clean evaluation") {
  const auto& s = fixture::small();
  const auto pts = first_points(60);
  std::vector<int> preds, labels;
  for (const auto* e : pts) {
    preds.push_back(predict(s.model, render(s.data.templates[e->template_id], e->theta, s.env.render)));
    labels.push_back(e->class_id);
  }
  const auto clean = evaluate_predictions(preds, labels, 4);
  for (auto m : {AttackMethod::sifgsm, AttackMethod::sgd, AttackMethod::scw}) {
    auto cfg = default_attack_config(m);
    cfg.iterations = 0;
    const auto res = attack_batch(s.model, s.data.templates, pts, cfg, s.env);
    CHECK(res.summary.overall == clean.overall);
    CHECK(res.summary.per_class_accuracy == clean.per_class_accuracy);
    CHECK(res.successes == 0);
  }
}

TEST_CASE("batches do not depend on the worker count") {
  const auto& s = fixture::small();
  const auto pts = first_points(30);
  for (auto m : {AttackMethod::sifgsm, AttackMethod::sgd, AttackMethod::scw}) {
    const auto cfg = default_attack_config(m);
    const auto a = attack_batch(s.model, s.data.templates, pts, cfg, s.env, 1);
    const auto b = attack_batch(s.model, s.data.templates, pts, cfg, s.env, 3);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
      CHECK(a.records[i].theta_perturbed == b.records[i].theta_perturbed);
      CHECK(a.records[i].x_perturbed == b.records[i].x_perturbed);
      CHECK(a.records[i].sample_id == b.records[i].sample_id);
    }
    CHECK(a.summary.overall == b.summary.overall);
  }
}

TEST_CASE("records carry consistent predictions and realism") {
  const auto& s = fixture::small();
  const auto res = attack_batch(s.model, s.data.templates, first_points(20),
                                default_attack_config(AttackMethod::sgd), s.env);
  for (const auto& r : res.records) {
    CHECK(r.pred_perturbed == argmax(r.softmax_perturbed));
    CHECK(r.realism >= 0.0);
    CHECK(r.realism <= 1.0);
    CHECK(r.success == (r.pred_perturbed != r.pred_original));
    CHECK(r.method == "sGD");
  }
}

TEST_CASE("infeasible starting points and bad templates are rejected") {
  const auto& s = fixture::small();
  const auto* e = s.test.front();
  auto bad = e->theta;
  bad.group("lighting")[0] = 9.0;
  CHECK_THROWS_AS(run_attack(s.model, s.data.templates[e->template_id], bad, e->class_id,
                             default_attack_config(AttackMethod::sgd), s.env),
                  DomainError);
  ManifestEntry broken = *e;
  broken.template_id = 99;
  const ManifestEntry* pts[] = {&broken};
  CHECK_THROWS_AS(attack_batch(s.model, s.data.templates, pts, default_attack_config(AttackMethod::sgd), s.env),
                  DomainError);
}
