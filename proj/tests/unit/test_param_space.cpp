#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include <semcex/dataset.hpp>
#include <semcex/error.hpp>
#include <semcex/io.hpp>
#include <semcex/param_space.hpp>
#include <semcex/scene.hpp>

#include "oracles.hpp"

using namespace semcex;

namespace {

SpacePtr pose_light_space() {
  return oracle::box_space({{"pose", 3, -3.2, 3.2}, {"lighting", 1, 0.2, 1.5}});
}

SemanticParams params(const SpacePtr& s, std::vector<std::vector<double>> v) { return {s, std::move(v)}; }

SemanticParams random_params(const SpacePtr& s, Rng& rng, double scale) {
  auto p = SemanticParams::zeros(s);
  for (std::size_t g = 0; g < p.group_count(); ++g) {
    for (double& v : p.values(g)) v = uniform(rng, -scale, scale);
  }
  return p;
}

}  // namespace

TEST_CASE("add sums elementwise and clamps into the bounds") {
  const auto s = pose_light_space();
  const auto theta = params(s, {{0.0, 0.0, 0.0}, {1.4}});
  const auto r = add(theta, params(s, {{0.2, 0.0, 0.0}, {0.3}}));
  CHECK(r.group("pose")[0] == doctest::Approx(0.2));
  CHECK(r.group("pose")[1] == 0.0);
  CHECK(r.group("lighting")[0] == 1.5);
  CHECK(r.is_feasible());
}

TEST_CASE("add with a zero perturbation is the identity, bitwise") {
  const auto s = pose_light_space();
  Rng rng(3);
  for (int k = 0; k < 20; ++k) {
    auto theta = random_params(s, rng, 1.0);
    theta.group("lighting")[0] = uniform(rng, 0.2, 1.5);
    CHECK(add(theta, SemanticParams::zeros(s)) == theta);
  }
}

TEST_CASE("add rejects mismatched structure") {
  const auto a = SemanticParams::zeros(pose_light_space());
  const auto b = SemanticParams::zeros(oracle::box_space({{"pose", 2, -1, 1}}));
  CHECK_THROWS_AS(add(a, b), StructuralError);
}

TEST_CASE("group_norm examples") {
  const auto s = oracle::box_space({{"pose", 3, -5, 5}, {"vertex", 2, -5, 5}});
  auto pi = params(s, {{0.3, -0.4, 0.0}, {3.0, 4.0}});
  const auto l1 = group_norm(pi, NormOrder::l1);
  CHECK(l1.per_group.at("pose") == doctest::Approx(0.7));
  const auto l2 = group_norm(pi, NormOrder::l2);
  CHECK(l2.per_group.at("vertex") == doctest::Approx(5.0));
  CHECK(l2.total == doctest::Approx(0.5 + 5.0));
  const auto linf = group_norm(pi, NormOrder::linf);
  CHECK(linf.per_group.at("pose") == doctest::Approx(0.4));
  for (auto order : {NormOrder::l1, NormOrder::l2, NormOrder::linf}) {
    const auto z = group_norm(SemanticParams::zeros(s), order);
    CHECK(z.total == 0.0);
    for (const auto& [name, v] : z.per_group) CHECK(v == 0.0);
  }
}

TEST_CASE("group_norm satisfies the triangle inequality") {
  const auto s = oracle::box_space({{"a", 4, -10, 10}, {"b", 3, -10, 10}});
  Rng rng(11);
  for (int k = 0; k < 200; ++k) {
    const auto x = random_params(s, rng, 2.0);
    const auto y = random_params(s, rng, 2.0);
    auto sum = SemanticParams::zeros(s);
    for (std::size_t g = 0; g < sum.group_count(); ++g) {
      for (std::size_t i = 0; i < sum.values(g).size(); ++i) sum.values(g)[i] = x.values(g)[i] + y.values(g)[i];
    }
    for (auto order : {NormOrder::l1, NormOrder::l2, NormOrder::linf}) {
      const auto nx = group_norm(x, order), ny = group_norm(y, order), ns = group_norm(sum, order);
      for (const auto& [name, v] : ns.per_group) {
        CHECK(v <= nx.per_group.at(name) + ny.per_group.at(name) + 1e-12);
      }
    }
  }
}

TEST_CASE("project examples") {
  const auto s = oracle::box_space({{"pose", 1, -0.8, 0.8}});
  const GroupScalars half{{"pose", 0.5}};
  // ball boundary
  CHECK(project(params(s, {{0.8}}), params(s, {{0.2}}), half).group("pose")[0] == doctest::Approx(0.7));
  const auto wide = oracle::box_space({{"pose", 1, -3.0, 3.0}});
  CHECK(project(params(wide, {{1.8}}), params(wide, {{1.0}}), half).group("pose")[0] == doctest::Approx(1.5));
  // inside: unchanged
  const auto inside = params(wide, {{1.2}});
  CHECK(project(inside, params(wide, {{1.0}}), half) == inside);
  // feasibility tighter than the ball
  CHECK(project(params(s, {{0.9}}), params(s, {{0.0}}), {{"pose", 1.0}}).group("pose")[0] == 0.8);
  CHECK_THROWS_AS(project(inside, inside, {{"pose", -0.1}}), ConfigError);
}

TEST_CASE("project is idempotent and satisfies both constraints") {
  const auto space = make_scene_space(4);
  Rng rng(5);
  const GroupScalars eps{{"vertex", 0.02}, {"pose", 0.3}, {"color", 0.05}, {"lighting", 0.1}};
  for (int k = 0; k < 300; ++k) {
    auto theta0 = neutral_params(space);
    for (double& v : theta0.group("pose")) v += uniform(rng, -0.2, 0.2);
    auto theta = SemanticParams::zeros(space);
    for (std::size_t g = 0; g < theta.group_count(); ++g) {
      for (std::size_t i = 0; i < theta.values(g).size(); ++i) {
        theta.values(g)[i] = theta0.values(g)[i] + uniform(rng, -2.0, 2.0);
      }
    }
    const auto p = project(theta, theta0, eps);
    CHECK(p.is_feasible());
    CHECK(project(p, theta0, eps) == p);
    for (std::size_t g = 0; g < p.group_count(); ++g) {
      const auto& spec = space->groups()[g];
      for (std::size_t i = 0; i < spec.dim(); ++i) {
        CHECK(std::abs(p.values(g)[i] - theta0.values(g)[i]) <= eps.at(spec.name) * spec.scale[i]);
        CHECK(std::abs(p.values(g)[i] - theta0.values(g)[i]) <= eps.at(spec.name));
      }
    }
  }
}

TEST_CASE("sample_uniform stays in range and is deterministic") {
  const auto s = oracle::box_space({{"pose", 1, -3.2, 3.2}});
  const GroupRanges r{{"pose", {-0.3, 0.3}}};
  Rng a(42), b(42);
  for (int k = 0; k < 1000; ++k) {
    const auto x = sample_uniform(s, r, a);
    CHECK(std::abs(x.group("pose")[0]) <= 0.3);
    CHECK(x == sample_uniform(s, r, b));
  }
  CHECK_THROWS_AS(sample_uniform(s, {{"pose", {-4.0, 0.0}}}, a), ConfigError);
}

TEST_CASE("sample_uniform mean over 10^4 draws is near the centre") {
  const auto s = oracle::box_space({{"pose", 1, -3.2, 3.2}});
  Rng rng(9);
  double sum = 0.0;
  for (int k = 0; k < 10000; ++k) sum += sample_uniform(s, {{"pose", {-0.75, 0.75}}}, rng).group("pose")[0];
  CHECK(std::abs(sum / 10000) < 0.02);
}

TEST_CASE("make_dataset counts, splits and feasibility") {
  DatasetConfig cfg;
  const auto ds = make_dataset(cfg);
  CHECK(ds.manifest.entries.size() == 2400);
  CHECK(ds.manifest.split(Split::train).size() == 1680);
  CHECK(ds.manifest.split(Split::validation).size() == 240);
  CHECK(ds.manifest.split(Split::test).size() == 480);
  std::set<int> ids;
  std::set<std::string> families;
  for (const auto& t : ds.templates) families.insert(t.family);
  CHECK(families.size() == 4);
  for (const auto& e : ds.manifest.entries) {
    CHECK(ids.insert(e.sample_id).second);
    CHECK(e.theta.is_feasible());
    CHECK(e.class_id < 4);
  }
}

TEST_CASE("make_dataset is byte-identical for a fixed seed") {
  DatasetConfig cfg;
  cfg.per_class = 50;
  const auto a = make_dataset(cfg), b = make_dataset(cfg);
  CHECK(manifest_to_jsonl(a.manifest) == manifest_to_jsonl(b.manifest));
  cfg.seed += 1;
  CHECK(manifest_to_jsonl(make_dataset(cfg).manifest) != manifest_to_jsonl(a.manifest));
}

TEST_CASE("make_dataset rejects bad configurations") {
  DatasetConfig cfg;
  cfg.class_count = static_cast<int>(shape_families().size()) + 1;
  CHECK_THROWS_AS(make_dataset(cfg), ConfigError);
  cfg = {};
  cfg.class_count = 1;
  CHECK_THROWS_AS(make_dataset(cfg), ConfigError);
  cfg = {};
  cfg.train_fraction = 0.8;
  CHECK_THROWS_AS(make_dataset(cfg), ConfigError);
}

TEST_CASE("shape families are simple counter-clockwise polygons") {
  for (const auto& f : shape_families()) {
    const auto p = family_polygon(f);
    CHECK(is_simple(p));
    CHECK(signed_area(p) > 0.0);
  }
}
