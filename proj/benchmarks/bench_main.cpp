// Microbenchmarks for the hot paths: rendering, its VJP, the classifier
// forward pass and one attack per method.
#include <benchmark/benchmark.h>

#include <semcex/attacks.hpp>
#include <semcex/classifier.hpp>
#include <semcex/dataset.hpp>
#include <semcex/renderer.hpp>

namespace {

using namespace semcex;

const Dataset& data() {
  static const Dataset d = [] {
    DatasetConfig c;
    c.per_class = 10;
    return make_dataset(c);
  }();
  return d;
}

const ManifestEntry& entry() { return data().manifest.entries.front(); }
const SceneTemplate& scene() { return data().templates[static_cast<std::size_t>(entry().template_id)]; }

void BM_Render(benchmark::State& state) {
  const auto rc = RenderConfig::for_size(static_cast<int>(state.range(0)), static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(render(scene(), entry().theta, rc));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}
BENCHMARK(BM_Render)->Arg(16)->Arg(32)->Arg(64);

void BM_RenderVjp(benchmark::State& state) {
  const auto rc = RenderConfig::for_size(static_cast<int>(state.range(0)), static_cast<int>(state.range(0)));
  const Image cot(rc.height, rc.width, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(render_vjp(scene(), entry().theta, rc, cot));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}
BENCHMARK(BM_RenderVjp)->Arg(16)->Arg(32)->Arg(64);

void BM_Forward(benchmark::State& state) {
  const Classifier model(mlp_widths(32, 32, {128, 64}, 4), 1);
  const Image x = render(scene(), entry().theta, RenderConfig{});
  for (auto _ : state) benchmark::DoNotOptimize(forward(model, x));
}
BENCHMARK(BM_Forward);

void BM_Attack(benchmark::State& state) {
  const auto method = static_cast<AttackMethod>(state.range(0));
  const Classifier model(mlp_widths(32, 32, {128, 64}, 4), 1);
  const AttackEnv env{RenderConfig{}, calibrate_realism(3, 32, 32)};
  const auto cfg = default_attack_config(method);
  for (auto _ : state) benchmark::DoNotOptimize(run_attack(model, scene(), entry().theta, entry().class_id, cfg, env));
  state.SetLabel(to_string(method));
}
BENCHMARK(BM_Attack)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
