#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>

#include <semcex/error.hpp>
#include <semcex/renderer.hpp>

#include "oracles.hpp"

using namespace semcex;

namespace {

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Signed distance to an axis-aligned box, written out by hand.
double box_sd(double lo, double hi, Vec2 p) {
  const double dx = std::max(lo - p.x, p.x - hi);
  const double dy = std::max(lo - p.y, p.y - hi);
  if (dx <= 0.0 && dy <= 0.0) return std::max(dx, dy);
  return std::hypot(std::max(dx, 0.0), std::max(dy, 0.0));
}

SemanticParams neutral_for(const SceneTemplate& s) { return neutral_params(make_scene_space(s.base_polygon.size())); }

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

SemanticParams shifted(const SemanticParams& theta, const std::vector<double>& dir, double h) {
  auto flat = theta.flatten();
  for (std::size_t i = 0; i < flat.size(); ++i) flat[i] += h * dir[i];
  return SemanticParams::unflatten(theta.space_ptr(), flat);
}

}  // namespace

TEST_CASE("transform_polygon: identity, quarter turn of a square, translation") {
  const auto sq = oracle::square_scene(0.3, 0.7, {1, 0, 0}, {0, 0, 0});
  auto theta = neutral_for(sq);
  CHECK(transform_polygon(sq, theta) == sq.base_polygon);

  theta.group("pose")[kRotation] = std::numbers::pi / 2;
  const auto turned = transform_polygon(sq, theta);
  for (const auto& v : sq.base_polygon) {
    bool found = false;
    for (const auto& w : turned) found = found || (std::abs(v.x - w.x) < 1e-12 && std::abs(v.y - w.y) < 1e-12);
    CHECK(found);
  }

  theta = neutral_for(sq);
  theta.group("pose")[kTranslateX] = 0.1;
  const auto moved = transform_polygon(sq, theta);
  for (std::size_t i = 0; i < moved.size(); ++i) {
    CHECK(moved[i].x == doctest::Approx(sq.base_polygon[i].x + 0.1));
    CHECK(moved[i].y == doctest::Approx(sq.base_polygon[i].y));
  }
}

TEST_CASE("signed_distance on the unit square") {
  const Polygon unit{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  CHECK(signed_distance(unit, {0.5, 0.5}) == doctest::Approx(-0.5));
  CHECK(signed_distance(unit, {2.0, 0.5}) == doctest::Approx(1.0));
  CHECK(signed_distance(unit, {0.0, 0.5}) == doctest::Approx(0.0));
  Rng rng(1);
  for (int k = 0; k < 500; ++k) {
    const Vec2 p{uniform(rng, -1, 2), uniform(rng, -1, 2)};
    CHECK(signed_distance(unit, p) == doctest::Approx(box_sd(0, 1, p)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(signed_distance(Polygon{{0, 0}, {1, 1}, {2, 2}}, {0, 0}), DegenerateGeometryError);
}

TEST_CASE("render saturates inside and shows the background far outside") {
  const RenderConfig cfg;
  const auto big = oracle::square_scene(0.05, 0.95, {1, 0, 0}, {0, 0, 0});
  const auto img = render(big, neutral_for(big), cfg);
  CHECK(std::abs(img.at(16, 16, 0) - 1.0) < 1e-4);
  CHECK(std::abs(img.at(16, 16, 1)) < 1e-4);

  const auto small = oracle::square_scene(0.0, 0.2, {1, 0, 0}, {0.1, 0.2, 0.3});
  const auto far = render(small, neutral_for(small), cfg);
  for (int ch = 0; ch < 3; ++ch) CHECK(std::abs(far.at(31, 31, ch) - small.background_color[ch]) < 1e-4);
}

TEST_CASE("render is affine in the color offset") {
  const RenderConfig cfg;
  auto scene = oracle::square_scene(0.3, 0.7, {0, 0, 0}, {0.1, 0.1, 0.1});
  auto theta = neutral_for(scene);
  theta.group("pose")[kRotation] = 0.3;
  auto with_color = [&](Rgb c) {
    auto t = theta;
    for (int ch = 0; ch < 3; ++ch) t.group("color")[ch] = c[ch];
    return render(scene, t, cfg);
  };
  const auto a = with_color({0.2, 0.1, 0.3}), b = with_color({0.3, 0.4, 0.2});
  const auto ab = with_color({0.5, 0.5, 0.5}), zero = with_color({0, 0, 0});
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data[i] + b.data[i] - ab.data[i] == doctest::Approx(zero.data[i]).epsilon(1e-12));
}

TEST_CASE("render_vjp: zero cotangent and the closed-form lighting gradient") {
  const RenderConfig cfg;
  const auto sq = oracle::square_scene(0.3, 0.7, {0.6, 0.4, 0.2}, {0.1, 0.15, 0.2});
  const auto theta = neutral_for(sq);

  const auto zero = render_vjp(sq, theta, cfg, Image(cfg.height, cfg.width));
  for (double v : zero.flatten()) CHECK(v == 0.0);

  Rng rng(4);
  Image cot(cfg.height, cfg.width);
  for (double& v : cot.data) v = uniform(rng, -1, 1);
  double expected = 0.0;
  for (int r = 0; r < cfg.height; ++r) {
    for (int c = 0; c < cfg.width; ++c) {
      const Vec2 p{(c + 0.5) / cfg.width, (r + 0.5) / cfg.height};
      const double cov = logistic(-box_sd(0.3, 0.7, p) / cfg.softness);
      for (int ch = 0; ch < 3; ++ch) expected += cot.at(r, c, ch) * cov * sq.base_color[ch];
    }
  }
  const auto g = render_vjp(sq, theta, cfg, cot);
  CHECK(std::abs(g.group("lighting")[0] - expected) < 1e-10);
}

TEST_CASE("render_vjp matches central differences on random scenes") {
  const RenderConfig cfg;
  const double h = 1e-4;
  Rng rng(2024);
  int passed = 0;
  const int trials = 200;
  for (int k = 0; k < trials; ++k) {
    const auto& fams = shape_families();
    SceneTemplate scene;
    scene.family = fams[static_cast<std::size_t>(k) % fams.size()];
    scene.base_polygon = family_polygon(scene.family);
    scene.base_color = {uniform(rng, 0.25, 0.75), uniform(rng, 0.25, 0.75), uniform(rng, 0.25, 0.75)};
    scene.background_color = {uniform(rng, 0, 0.3), uniform(rng, 0, 0.3), uniform(rng, 0, 0.3)};
    auto theta = neutral_for(scene);
    for (double& v : theta.group("vertex")) v = uniform(rng, -0.04, 0.04);
    theta.group("pose")[kRotation] = uniform(rng, -1, 1);
    theta.group("pose")[kTranslateX] = uniform(rng, -0.1, 0.1);
    theta.group("pose")[kTranslateY] = uniform(rng, -0.1, 0.1);
    theta.group("pose")[kScale] = uniform(rng, 0.85, 1.15);
    for (double& v : theta.group("color")) v = uniform(rng, -0.08, 0.08);
    theta.group("lighting")[0] = uniform(rng, 0.6, 1.15);

    std::vector<double> dir(theta.space().total_dim());
    for (double& v : dir) v = uniform(rng, -1, 1);
    const double n = std::sqrt(dot(dir, dir));
    for (double& v : dir) v /= n;
    Image cot(cfg.height, cfg.width);
    for (double& v : cot.data) v = uniform(rng, -1, 1);

    const double analytic = dot(render_vjp(scene, theta, cfg, cot).flatten(), dir);
    const double numeric = oracle::central_difference(
        [&](double s) { return dot(cot.data, render(scene, shifted(theta, dir, s), cfg).data); }, h);
    passed += oracle::rel_err(analytic, numeric) < 1e-2;
  }
  MESSAGE("passed " << passed << " of " << trials);
  CHECK(passed >= 0.95 * trials);
}

TEST_CASE("full Jacobian of a triangle scene matches finite differences") {
  const auto cfg = RenderConfig::for_size(12, 12);
  SceneTemplate tri;
  tri.family = "triangle";
  tri.base_polygon = {{0.25, 0.3}, {0.75, 0.35}, {0.45, 0.75}};
  tri.base_color = {0.7, 0.5, 0.3};
  tri.background_color = {0.1, 0.2, 0.1};
  auto theta = neutral_for(tri);
  theta.group("pose")[kRotation] = 0.2;
  theta.group("lighting")[0] = 0.9;

  const std::size_t rows = static_cast<std::size_t>(cfg.height * cfg.width * 3);
  const std::size_t cols = theta.space().total_dim();
  std::vector<double> analytic(rows * cols), numeric(rows * cols);
  for (std::size_t k = 0; k < rows; ++k) {
    Image e(cfg.height, cfg.width);
    e.data[k] = 1.0;
    const auto g = render_vjp(tri, theta, cfg, e).flatten();
    for (std::size_t j = 0; j < cols; ++j) analytic[k * cols + j] = g[j];
  }
  const double h = 1e-5;
  for (std::size_t j = 0; j < cols; ++j) {
    std::vector<double> dir(cols, 0.0);
    dir[j] = 1.0;
    const auto plus = render(tri, shifted(theta, dir, h), cfg);
    const auto minus = render(tri, shifted(theta, dir, -h), cfg);
    for (std::size_t k = 0; k < rows; ++k) numeric[k * cols + j] = (plus.data[k] - minus.data[k]) / (2 * h);
  }
  double diff = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    ref += numeric[i] * numeric[i];
  }
  CHECK(std::sqrt(diff / ref) < 1e-2);
}

TEST_CASE("translating by whole pixels shifts the image") {
  const RenderConfig cfg;
  const auto scene = family_polygon("lshape");
  SceneTemplate t;
  t.family = "lshape";
  t.base_polygon = scene;
  t.base_color = {0.8, 0.6, 0.3};
  t.background_color = {0.1, 0.1, 0.2};
  auto theta = neutral_for(t);
  const auto before = render(t, theta, cfg);
  const int kx = 3, ky = -2;
  theta.group("pose")[kTranslateX] = double(kx) / cfg.width;
  theta.group("pose")[kTranslateY] = double(ky) / cfg.height;
  const auto after = render(t, theta, cfg);
  double worst = 0.0;
  for (int r = 4; r < cfg.height - 4; ++r) {
    for (int c = 4; c < cfg.width - 4; ++c) {
      for (int ch = 0; ch < 3; ++ch) worst = std::max(worst, std::abs(after.at(r + ky, c + kx, ch) - before.at(r, c, ch)));
    }
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("coverage approaches the hard indicator as the softness shrinks") {
  const auto sq = oracle::square_scene(0.3, 0.7, {1, 1, 1}, {0, 0, 0});
  const auto theta = neutral_for(sq);
  double previous = 1.0;
  for (double tau : {0.05, 0.01, 0.002}) {
    RenderConfig cfg{32, 32, tau};
    const auto img = render(sq, theta, cfg);
    double worst = 0.0;
    for (int r = 0; r < 32; ++r) {
      for (int c = 0; c < 32; ++c) {
        const Vec2 p{(c + 0.5) / 32, (r + 0.5) / 32};
        const double sd = box_sd(0.3, 0.7, p);
        if (std::abs(sd) < 0.25 / 32) continue;  // boundary pixels
        worst = std::max(worst, std::abs(img.at(r, c, 0) - (sd < 0 ? 1.0 : 0.0)));
      }
    }
    CHECK(worst < previous);
    previous = worst;
  }
}

TEST_CASE("render is deterministic and stays in [0, 1]") {
  const RenderConfig cfg;
  Rng rng(8);
  for (const auto& f : shape_families()) {
    SceneTemplate t;
    t.family = f;
    t.base_polygon = family_polygon(f);
    t.base_color = {0.9, 0.9, 0.9};
    t.background_color = {0.05, 0.0, 0.1};
    auto theta = neutral_for(t);
    theta.group("lighting")[0] = 1.5;
    theta.group("color")[0] = 0.5;
    theta.group("pose")[kRotation] = uniform(rng, -3, 3);
    const auto a = render(t, theta, cfg);
    CHECK(a == render(t, theta, cfg));
    for (double v : a.data) CHECK((v >= 0.0 && v <= 1.0));
  }
}

TEST_CASE("render validates its configuration") {
  const auto sq = oracle::square_scene(0.3, 0.7, {1, 1, 1}, {0, 0, 0});
  CHECK_THROWS_AS(render(sq, neutral_for(sq), RenderConfig{4, 4, 0.1}), ConfigError);
  CHECK_THROWS_AS(render(sq, neutral_for(sq), RenderConfig{32, 32, 0.0}), ConfigError);
}
