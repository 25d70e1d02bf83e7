#pragma once

// Small trained setup shared by the attack, sampler and augmentation tests:
// 16x16 renders of the procedural dataset and a briefly trained MLP.

#include <semcex/attacks.hpp>
#include <semcex/classifier.hpp>
#include <semcex/dataset.hpp>
#include <semcex/renderer.hpp>

namespace fixture {

struct Setup {
  semcex::Dataset data;
  semcex::AttackEnv env;
  semcex::Classifier model;
  std::vector<const semcex::ManifestEntry*> test;
};

inline semcex::LabeledSet render_split(const semcex::Dataset& d, semcex::Split split,
                                       const semcex::RenderConfig& rc) {
  semcex::LabeledSet s;
  for (const auto* e : d.manifest.split(split)) {
    s.images.push_back(semcex::quantize(semcex::render(d.templates[e->template_id], e->theta, rc)));
    s.labels.push_back(e->class_id);
  }
  return s;
}

inline const Setup& small() {
  static const Setup setup = [] {
    Setup s;
    semcex::DatasetConfig cfg;
    cfg.per_class = 250;
    cfg.seed = 3;
    s.data = semcex::make_dataset(cfg);
    s.env.render = semcex::RenderConfig::for_size(16, 16);
    s.env.realism = semcex::calibrate_realism(3, 16, 16);
    s.model = semcex::Classifier(semcex::mlp_widths(16, 16, {48}, 4), 5);
    semcex::TrainConfig tc;
    tc.epochs = 30;
    tc.batch_size = 16;
    tc.learning_rate = 1e-3;
    semcex::train(s.model, render_split(s.data, semcex::Split::train, s.env.render), tc);
    s.test = s.data.manifest.split(semcex::Split::test);
    return s;
  }();
  return setup;
}

}  // namespace fixture
