#include "run_config.hpp"

#include <cstdio>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include <semcex/error.hpp>

namespace semcex::cli {

using json = nlohmann::ordered_json;

namespace {

const char* norm_name(NormOrder n) {
  switch (n) {
    case NormOrder::l1: return "l1";
    case NormOrder::l2: return "l2";
    case NormOrder::linf: return "linf";
  }
  return "l1";
}

NormOrder parse_norm(const std::string& s) {
  if (s == "l1") return NormOrder::l1;
  if (s == "l2") return NormOrder::l2;
  if (s == "linf") return NormOrder::linf;
  throw ConfigError("unknown norm '" + s + "'");
}

const char* optimizer_name(Optimizer o) { return o == Optimizer::adam ? "adam" : "sgd"; }

Optimizer parse_optimizer(const std::string& s) {
  if (s == "adam") return Optimizer::adam;
  if (s == "sgd") return Optimizer::sgd;
  throw ConfigError("unknown optimizer '" + s + "'");
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ConfigError("unknown config key '" + where + "." + key + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + where + "." + key + "' has the wrong type");
  }
}

json train_to_json(const TrainConfig& t) {
  return {{"epochs", t.epochs},       {"batch_size", t.batch_size}, {"learning_rate", t.learning_rate},
          {"optimizer", optimizer_name(t.optimizer)}, {"beta1", t.beta1},  {"beta2", t.beta2},
          {"adam_eps", t.adam_eps},   {"seed", t.seed}};
}

void train_from_json(const json& j, TrainConfig& t, const std::string& where) {
  check_keys(j, {"epochs", "batch_size", "learning_rate", "optimizer", "beta1", "beta2", "adam_eps", "seed"}, where);
  read(j, "epochs", t.epochs, where);
  read(j, "batch_size", t.batch_size, where);
  read(j, "learning_rate", t.learning_rate, where);
  std::string opt = optimizer_name(t.optimizer);
  read(j, "optimizer", opt, where);
  t.optimizer = parse_optimizer(opt);
  read(j, "beta1", t.beta1, where);
  read(j, "beta2", t.beta2, where);
  read(j, "adam_eps", t.adam_eps, where);
  read(j, "seed", t.seed, where);
}

json attack_to_json(const AttackConfig& a) {
  return {{"groups", a.active_groups},   {"iterations", a.iterations},   {"step", a.step},
          {"epsilon", a.epsilon},        {"learning_rate", a.learning_rate}, {"tradeoff", a.tradeoff},
          {"norm", norm_name(a.norm)},   {"loss", to_string(a.loss)},    {"signed_step", a.signed_step},
          {"seed", a.seed}};
}

void attack_from_json(const json& j, AttackConfig& a, const std::string& where) {
  check_keys(j, {"groups", "iterations", "step", "epsilon", "learning_rate", "tradeoff", "norm", "loss",
                 "signed_step", "seed"},
             where);
  read(j, "groups", a.active_groups, where);
  read(j, "iterations", a.iterations, where);
  read(j, "step", a.step, where);
  read(j, "epsilon", a.epsilon, where);
  read(j, "learning_rate", a.learning_rate, where);
  read(j, "tradeoff", a.tradeoff, where);
  std::string norm = norm_name(a.norm), loss = to_string(a.loss);
  read(j, "norm", norm, where);
  read(j, "loss", loss, where);
  a.norm = parse_norm(norm);
  a.loss = parse_loss_kind(loss);
  read(j, "signed_step", a.signed_step, where);
  read(j, "seed", a.seed, where);
}

}  // namespace

RunConfig::RunConfig() {
  for (auto m : {AttackMethod::sifgsm, AttackMethod::sgd, AttackMethod::scw}) {
    attacks[short_name(m)] = default_attack_config(m);
  }
  sampler.kind = SamplerKind::random;
  sampler.range = RangePreset::large;
  sampler.candidates = 5;
}

void RunConfig::validate() const {
  if (schema_version != kSchemaVersion) {
    throw ConfigError("config schema_version " + std::to_string(schema_version) + " is not supported (expected " +
                      std::to_string(kSchemaVersion) + ")");
  }
  if (experiment.empty()) throw ConfigError("experiment name is empty");
  dataset_config().validate();
  render.validate();
  if (realism_levels < 1) throw ConfigError("realism_levels must be at least 1");
  if (hidden.empty() || transfer_hidden.empty()) throw ConfigError("model needs at least one hidden layer");
  for (int w : hidden) if (w < 1) throw ConfigError("hidden widths must be positive");
  for (int w : transfer_hidden) if (w < 1) throw ConfigError("hidden widths must be positive");
  train.validate();
  retrain.validate();
  for (auto m : {AttackMethod::sifgsm, AttackMethod::sgd, AttackMethod::scw}) attack(m).validate();
  sampler.validate();
  if (!(augment.fraction > 0.0 && augment.fraction <= 1.0)) throw ConfigError("augment.fraction must lie in (0, 1]");
  if (test_points < 0) throw ConfigError("test_points must be non-negative");
  if (gallery_pairs < 0) throw ConfigError("gallery_pairs must be non-negative");
  if (gradcheck_trials < 1) throw ConfigError("gradcheck_trials must be positive");
}

DatasetConfig RunConfig::dataset_config() const {
  DatasetConfig d = dataset;
  d.seed = seed;
  return d;
}

AttackEnv RunConfig::attack_env() const {
  AttackEnv env;
  env.render = render;
  env.realism = calibrate_realism(realism_levels, render.height, render.width);
  return env;
}

const AttackConfig& RunConfig::attack(AttackMethod method) const {
  const auto it = attacks.find(short_name(method));
  if (it == attacks.end()) throw ConfigError("no attack config for " + short_name(method));
  if (it->second.method != method) throw ConfigError("attack config '" + it->first + "' has the wrong method");
  return it->second;
}

std::string config_to_json(const RunConfig& c) {
  const auto& d = c.dataset;
  json j;
  j["schema_version"] = c.schema_version;
  j["experiment"] = c.experiment;
  j["seed"] = c.seed;
  j["dataset"] = {{"class_count", d.class_count},
                  {"per_class", d.per_class},
                  {"train_fraction", d.train_fraction},
                  {"validation_fraction", d.validation_fraction},
                  {"test_fraction", d.test_fraction},
                  {"jitter",
                   {{"rotation", d.jitter.rotation},
                    {"translation", d.jitter.translation},
                    {"scale", d.jitter.scale},
                    {"color", d.jitter.color},
                    {"lighting", d.jitter.lighting},
                    {"vertex", d.jitter.vertex}}},
                  {"object_color", d.object_color},
                  {"background_color", d.background_color}};
  j["render"] = {{"height", c.render.height}, {"width", c.render.width}, {"softness", c.render.softness}};
  j["metrics"] = {{"realism_levels", c.realism_levels}, {"membership", to_string(c.membership)}};
  j["model"] = {{"hidden", c.hidden},
                {"seed", c.model_seed},
                {"transfer_hidden", c.transfer_hidden},
                {"transfer_seed", c.transfer_model_seed}};
  j["train"] = train_to_json(c.train);
  j["retrain"] = train_to_json(c.retrain);
  json attacks = json::object();
  for (const auto& [name, a] : c.attacks) attacks[name] = attack_to_json(a);
  j["attacks"] = attacks;
  j["sampler"] = {{"kind", to_string(c.sampler.kind)},
                  {"range", to_string(c.sampler.range)},
                  {"candidates", c.sampler.candidates},
                  {"groups", c.sampler.groups},
                  {"seed", c.sampler.seed},
                  {"halton_start", c.sampler.halton_start}};
  j["augment"] = {{"fraction", c.augment.fraction}, {"seed", c.augment.seed}};
  j["test_points"] = c.test_points;
  j["gallery_pairs"] = c.gallery_pairs;
  j["gradcheck_trials"] = c.gradcheck_trials;
  return j.dump(2) + "\n";
}

RunConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  check_keys(j, {"schema_version", "experiment", "seed", "dataset", "render", "metrics", "model", "train", "retrain",
                 "attacks", "sampler", "augment", "test_points", "gallery_pairs", "gradcheck_trials"},
             "config");
  if (!j.contains("schema_version")) throw ConfigError("config lacks schema_version");
  read(j, "schema_version", c.schema_version, "config");
  if (c.schema_version != kSchemaVersion) c.validate();
  read(j, "experiment", c.experiment, "config");
  read(j, "seed", c.seed, "config");

  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    const std::string w = "dataset";
    check_keys(d, {"class_count", "per_class", "train_fraction", "validation_fraction", "test_fraction", "jitter",
                   "object_color", "background_color"},
               w);
    read(d, "class_count", c.dataset.class_count, w);
    read(d, "per_class", c.dataset.per_class, w);
    read(d, "train_fraction", c.dataset.train_fraction, w);
    read(d, "validation_fraction", c.dataset.validation_fraction, w);
    read(d, "test_fraction", c.dataset.test_fraction, w);
    read(d, "object_color", c.dataset.object_color, w);
    read(d, "background_color", c.dataset.background_color, w);
    if (d.contains("jitter")) {
      const auto& jt = d["jitter"];
      auto& r = c.dataset.jitter;
      check_keys(jt, {"rotation", "translation", "scale", "color", "lighting", "vertex"}, "dataset.jitter");
      read(jt, "rotation", r.rotation, "dataset.jitter");
      read(jt, "translation", r.translation, "dataset.jitter");
      read(jt, "scale", r.scale, "dataset.jitter");
      read(jt, "color", r.color, "dataset.jitter");
      read(jt, "lighting", r.lighting, "dataset.jitter");
      read(jt, "vertex", r.vertex, "dataset.jitter");
    }
  }
  if (j.contains("render")) {
    const auto& r = j["render"];
    check_keys(r, {"height", "width", "softness"}, "render");
    const bool explicit_softness = r.contains("softness");
    read(r, "height", c.render.height, "render");
    read(r, "width", c.render.width, "render");
    if (explicit_softness) {
      read(r, "softness", c.render.softness, "render");
    } else {
      c.render = RenderConfig::for_size(c.render.height, c.render.width);
    }
  }
  if (j.contains("metrics")) {
    const auto& m = j["metrics"];
    check_keys(m, {"realism_levels", "membership"}, "metrics");
    read(m, "realism_levels", c.realism_levels, "metrics");
    std::string mem = to_string(c.membership);
    read(m, "membership", mem, "metrics");
    c.membership = parse_membership(mem);
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    check_keys(m, {"hidden", "seed", "transfer_hidden", "transfer_seed"}, "model");
    read(m, "hidden", c.hidden, "model");
    read(m, "seed", c.model_seed, "model");
    read(m, "transfer_hidden", c.transfer_hidden, "model");
    read(m, "transfer_seed", c.transfer_model_seed, "model");
  }
  if (j.contains("train")) train_from_json(j["train"], c.train, "train");
  if (j.contains("retrain")) train_from_json(j["retrain"], c.retrain, "retrain");
  if (j.contains("attacks")) {
    const auto& a = j["attacks"];
    check_keys(a, {"sifgsm", "sgd", "scw"}, "attacks");
    for (const auto& [name, body] : a.items()) attack_from_json(body, c.attacks[name], "attacks." + name);
  }
  if (j.contains("sampler")) {
    const auto& s = j["sampler"];
    check_keys(s, {"kind", "range", "candidates", "groups", "seed", "halton_start"}, "sampler");
    std::string kind = to_string(c.sampler.kind), range = to_string(c.sampler.range);
    read(s, "kind", kind, "sampler");
    read(s, "range", range, "sampler");
    c.sampler.kind = parse_sampler_kind(kind);
    c.sampler.range = parse_range_preset(range);
    read(s, "candidates", c.sampler.candidates, "sampler");
    read(s, "groups", c.sampler.groups, "sampler");
    read(s, "seed", c.sampler.seed, "sampler");
    read(s, "halton_start", c.sampler.halton_start, "sampler");
  }
  if (j.contains("augment")) {
    const auto& a = j["augment"];
    check_keys(a, {"fraction", "seed"}, "augment");
    read(a, "fraction", c.augment.fraction, "augment");
    read(a, "seed", c.augment.seed, "augment");
  }
  read(j, "test_points", c.test_points, "config");
  read(j, "gallery_pairs", c.gallery_pairs, "config");
  read(j, "gradcheck_trials", c.gradcheck_trials, "config");
  c.validate();
  return c;
}

std::string config_hash(const RunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : config_to_json(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> out;
  for (const auto& s : split_list(csv)) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size()) throw ConfigError("'" + s + "' is not an integer");
    out.push_back(v);
  }
  return out;
}

}  // namespace semcex::cli
