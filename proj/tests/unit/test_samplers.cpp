#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <semcex/error.hpp>
#include <semcex/samplers.hpp>

#include "fixtures.hpp"

using namespace semcex;

namespace {

// Radical inverse as an exact fraction: digits of i reversed behind the point.
std::pair<std::uint64_t, std::uint64_t> radical_fraction(std::uint64_t i, std::uint64_t b) {
  std::uint64_t num = 0, den = 1;
  while (i > 0) {
    num = num * b + i % b;
    den *= b;
    i /= b;
  }
  return {num, den};
}

double radical_inverse(std::uint64_t i, std::uint64_t b) {
  const auto [n, d] = radical_fraction(i, b);
  return static_cast<double>(n) / static_cast<double>(d);
}

std::vector<const ManifestEntry*> spread_points(std::size_t n) {
  const auto& t = fixture::small().test;
  std::vector<const ManifestEntry*> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(t[i * t.size() / n]);
  return out;
}

}  // namespace

TEST_CASE("halton base 2 gives the van der Corput sequence") {
  const std::pair<int, int> expected[] = {{1, 2},  {1, 4},   {3, 4},  {1, 8},   {5, 8},   {3, 8},
                                          {7, 8},  {1, 16},  {9, 16}, {5, 16},  {13, 16}, {3, 16},
                                          {11, 16}, {7, 16}, {15, 16}, {1, 32}};
  for (std::uint64_t i = 1; i <= 16; ++i) {
    const auto [n, d] = expected[i - 1];
    CHECK(halton(i, 2) == static_cast<double>(n) / d);
  }
  CHECK(halton(1, 3) == doctest::Approx(1.0 / 3.0));
  CHECK(halton(2, 3) == doctest::Approx(2.0 / 3.0));
  CHECK(halton(3, 3) == doctest::Approx(1.0 / 9.0));
  CHECK_THROWS_AS(halton(0, 2), DomainError);
  CHECK_THROWS_AS(halton(1, 1), DomainError);
}

TEST_CASE("halton matches an independent radical inverse and stays in (0, 1)") {
  for (unsigned b : {2u, 3u, 5u, 7u}) {
    for (std::uint64_t i = 1; i < 5000; ++i) {
      const double h = halton(i, b);
      CHECK(h > 0.0);
      CHECK(h < 1.0);
      CHECK(h == doctest::Approx(radical_inverse(i, b)).epsilon(1e-14));
    }
  }
}

TEST_CASE("256 base-2 points put exactly one point in each dyadic cell") {
  std::vector<int> cells(256, 0);
  for (std::uint64_t i = 0; i < 256; ++i) {
    ++cells[static_cast<std::size_t>(halton(i + 256, 2) * 256)];
  }
  for (int c : cells) CHECK(c == 1);
}

TEST_CASE("sampler names and presets") {
  CHECK(parse_sampler_kind("random") == SamplerKind::random);
  CHECK(parse_sampler_kind("halton") == SamplerKind::halton);
  CHECK(parse_range_preset("large") == RangePreset::large);
  CHECK(parse_range_preset("small") == RangePreset::small);
  CHECK_THROWS_AS(parse_sampler_kind("sobol"), ConfigError);
  CHECK_THROWS_AS(parse_range_preset("medium"), ConfigError);
  CHECK(range_half_width(RangePreset::large) == 0.75);
  CHECK(range_half_width(RangePreset::small) == 0.3);
  SamplerConfig cfg;
  cfg.kind = SamplerKind::halton;
  cfg.range = RangePreset::small;
  CHECK(cfg.tag() == "Halton (small)");
  cfg.candidates = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("Halton best-of-N matches a re-enumeration of the candidates") {
  const auto& s = fixture::small();
  SamplerConfig cfg;
  cfg.kind = SamplerKind::halton;
  cfg.candidates = 7;
  cfg.halton_start = 3;
  const auto pts = spread_points(40);
  int successes = 0;
  for (std::size_t p = 0; p < pts.size(); ++p) {
    const auto* e = pts[p];
    const auto& scene = s.data.templates[e->template_id];
    const auto rec = sample_best_of_n(s.model, scene, e->theta, e->class_id, cfg, s.env, p);

    const int pred0 = predict(s.model, render(scene, e->theta, s.env.render));
    const auto& pose = e->theta.space()[e->theta.space().find("pose")];
    double best = -1.0;
    SemanticParams expected = e->theta;
    for (int j = 0; j < cfg.candidates; ++j) {
      const double u = radical_inverse(cfg.halton_start + p * cfg.candidates + j, 2);
      auto theta = e->theta;
      double& rot = theta.group("pose")[0];
      rot = std::clamp(rot - 0.75 + 1.5 * u, pose.lower[0], pose.upper[0]);
      const auto probs = softmax(forward(s.model, render(scene, theta, s.env.render)));
      const int pred = argmax(probs);
      const bool wrong = pred != e->class_id && pred != pred0;
      if (wrong && probs[pred] > best) {
        best = probs[pred];
        expected = theta;
      } else if (best < 0.0) {
        expected = theta;
      }
    }
    const auto a = rec.theta_perturbed.flatten(), b = expected.flatten();
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    CHECK(rec.success == (best >= 0.0));
    CHECK(rec.queries == cfg.candidates);
    successes += rec.success;
  }
  CHECK(successes > 0);
}

TEST_CASE("one candidate, zero candidates") {
  const auto& s = fixture::small();
  const auto* e = s.test.front();
  const auto& scene = s.data.templates[e->template_id];
  SamplerConfig cfg;
  cfg.kind = SamplerKind::halton;
  cfg.candidates = 1;
  const auto one = sample_best_of_n(s.model, scene, e->theta, e->class_id, cfg, s.env, 0);
  CHECK(one.queries == 1);
  CHECK(one.theta_perturbed.group("pose")[0] == doctest::Approx(e->theta.group("pose")[0] - 0.75 + 1.5 * 0.5));

  cfg.candidates = 0;
  const auto none = sample_best_of_n(s.model, scene, e->theta, e->class_id, cfg, s.env, 0);
  CHECK(none.queries == 0);
  CHECK(none.theta_perturbed == e->theta);
  CHECK(none.x_perturbed == none.x_original);
  CHECK_FALSE(none.success);
}

TEST_CASE("candidates stay within the sampled range and the feasible box") {
  const auto& s = fixture::small();
  for (auto kind : {SamplerKind::random, SamplerKind::halton}) {
    for (auto range : {RangePreset::large, RangePreset::small}) {
      SamplerConfig cfg;
      cfg.kind = kind;
      cfg.range = range;
      cfg.groups = {"pose", "color"};
      cfg.candidates = 6;
      const auto res = sampler_batch(s.model, s.data.templates, spread_points(30), cfg, s.env);
      for (const auto& r : res.batch.records) {
        CHECK(r.theta_perturbed.is_feasible());
        CHECK(r.queries == 6);
        for (std::size_t g = 0; g < r.theta_perturbed.group_count(); ++g) {
          const auto& spec = r.theta_perturbed.space()[g];
          const bool sampled = spec.name == "pose" || spec.name == "color";
          for (std::size_t i = 0; i < spec.dim(); ++i) {
            const double d = std::abs(r.theta_perturbed.values(g)[i] - r.theta_original.values(g)[i]);
            if (sampled) {
              CHECK(d <= range_half_width(range) * spec.scale[i] + 1e-12);
            } else {
              CHECK(d == 0.0);
            }
          }
        }
      }
      CHECK(res.batch.total_queries == 30 * 6);
    }
  }
}

TEST_CASE("sampler batches are reproducible and independent of workers") {
  const auto& s = fixture::small();
  for (auto kind : {SamplerKind::random, SamplerKind::halton}) {
    SamplerConfig cfg;
    cfg.kind = kind;
    cfg.seed = 17;
    const auto pts = spread_points(40);
    const auto a = sampler_batch(s.model, s.data.templates, pts, cfg, s.env, 1);
    const auto b = sampler_batch(s.model, s.data.templates, pts, cfg, s.env, 1);
    const auto c = sampler_batch(s.model, s.data.templates, pts, cfg, s.env, 4);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      CHECK(a.batch.records[i].theta_perturbed == b.batch.records[i].theta_perturbed);
      CHECK(a.batch.records[i].theta_perturbed == c.batch.records[i].theta_perturbed);
    }
    CHECK(a.queries_per_success == c.queries_per_success);
  }
  SamplerConfig r1, r2;
  r2.seed = 1;
  const auto pts = spread_points(10);
  const auto x = sampler_batch(s.model, s.data.templates, pts, r1, s.env);
  const auto y = sampler_batch(s.model, s.data.templates, pts, r2, s.env);
  CHECK_FALSE(x.batch.records[0].theta_perturbed == y.batch.records[0].theta_perturbed);
}

TEST_CASE("queries per success") {
  const auto& s = fixture::small();
  SamplerConfig cfg;
  cfg.candidates = 0;
  const auto none = sampler_batch(s.model, s.data.templates, spread_points(5), cfg, s.env);
  CHECK(std::isinf(none.queries_per_success));
  cfg.candidates = 8;
  const auto some = sampler_batch(s.model, s.data.templates, spread_points(60), cfg, s.env);
  REQUIRE(some.batch.successes > 0);
  CHECK(some.queries_per_success == doctest::Approx(60.0 * 8 / some.batch.successes));
}

TEST_CASE("unknown sampler groups are rejected") {
  const auto& s = fixture::small();
  SamplerConfig cfg;
  cfg.groups = {"texture"};
  const auto* e = s.test.front();
  CHECK_THROWS_AS(sample_best_of_n(s.model, s.data.templates[e->template_id], e->theta, e->class_id,
                                   cfg, s.env, 0),
                  ConfigError);
}
