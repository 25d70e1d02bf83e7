#include "commands.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <limits>

#include <json.hpp>

#include <semcex/augment.hpp>
#include <semcex/error.hpp>
#include <semcex/gradcheck.hpp>
#include <semcex/io.hpp>
#include <semcex/rng.hpp>
#include <semcex/samplers.hpp>

namespace semcex::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

Workspace Workspace::resolve(const std::optional<std::string>& out) {
  if (out) return {fs::path(*out)};
  if (const char* env = std::getenv("SEMCEX_WORKSPACE"); env && *env) return {fs::path(env)};
  return {fs::path("workspace")};
}

Context make_context(const Options& o) {
  Context ctx;
  if (o.config_path) ctx.config = config_from_json(read_text(*o.config_path));
  ctx.ws = Workspace::resolve(o.out);
  ctx.workers = o.workers;
  if (o.workers < 1) throw ConfigError("--workers must be at least 1");
  auto& c = ctx.config;
  if (o.seed) {
    c.seed = *o.seed;
    ctx.overrides["seed"] = std::to_string(*o.seed);
  }
  if (o.method) {
    const auto m = parse_attack_method(*o.method);
    ctx.overrides["method"] = short_name(m);
  }
  if (o.groups) {
    const auto groups = split_list(*o.groups);
    if (groups.empty()) throw ConfigError("--groups is empty");
    // applies to the selected attack, or to every attack and the sampler
    for (auto& [name, a] : c.attacks) {
      if (!o.method || name == short_name(parse_attack_method(*o.method))) a.active_groups = groups;
    }
    c.sampler.groups = groups;
    ctx.overrides["groups"] = *o.groups;
  }
  if (o.range) {
    c.sampler.range = parse_range_preset(*o.range);
    ctx.overrides["range"] = *o.range;
  }
  if (o.sampler) {
    c.sampler.kind = parse_sampler_kind(*o.sampler);
    ctx.overrides["sampler"] = *o.sampler;
  }
  if (o.membership) {
    c.membership = parse_membership(*o.membership);
    ctx.overrides["membership"] = *o.membership;
  }
  if (o.mode) {
    parse_matrix_mode(*o.mode);
    ctx.overrides["mode"] = *o.mode;
  }
  if (o.arch) {
    if (*o.arch != "benign" && *o.arch != "transfer") throw ConfigError("--arch must be benign or transfer");
    ctx.overrides["arch"] = *o.arch;
  }
  c.validate();
  return ctx;
}

std::vector<const ManifestEntry*> select_test_points(const DatasetManifest& manifest, int n) {
  const auto all = manifest.split(Split::test);
  if (n <= 0 || static_cast<std::size_t>(n) >= all.size()) return all;
  std::vector<const ManifestEntry*> out;
  for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) out.push_back(all[i * all.size() / n]);
  return out;
}

namespace {

const AttackMethod kMethods[] = {AttackMethod::sifgsm, AttackMethod::sgd, AttackMethod::scw};

std::string fnv_hex(const std::string& text, int digits) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf).substr(0, static_cast<std::size_t>(digits));
}

/// File-name-safe form of a row label: "si-FGSM" -> "si-fgsm".
std::string short_label(const std::string& label) {
  std::string out;
  for (unsigned char ch : label) {
    if (std::isalnum(ch)) {
      out += static_cast<char>(std::tolower(ch));
    } else if (!out.empty() && out.back() != '-') {
      out += '-';
    }
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out;
}

std::string key_of(const json& parts) { return fnv_hex(parts.dump(), 8); }

std::string iso_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Content-addressed artifact names. Every key folds in the keys of the
/// artifacts it was computed from.
class Names {
 public:
  explicit Names(const Context& ctx) : ctx_(ctx), cfg_(json::parse(config_to_json(ctx.config))) {}

  std::string seed_tag() const { return "_s" + std::to_string(ctx_.config.seed); }

  std::string dataset_key() const {
    return key_of({cfg_["seed"], cfg_["dataset"], cfg_["render"]});
  }
  fs::path dataset_dir() const { return ctx_.ws.dataset() / ("data" + seed_tag() + "_" + dataset_key()); }

  std::string model_key(const std::string& arch) const {
    const auto& m = cfg_["model"];
    const bool b = arch == "transfer";
    return key_of({dataset_key(), arch, b ? m["transfer_hidden"] : m["hidden"], b ? m["transfer_seed"] : m["seed"],
                   cfg_["train"]});
  }
  fs::path model_path(const std::string& arch) const {
    return ctx_.ws.models() / (arch + seed_tag() + "_" + model_key(arch) + ".model");
  }

  std::string eval_key() const {
    return key_of({model_key("benign"), model_key("transfer"), cfg_["test_points"]});
  }

  std::string attack_key(AttackMethod m) const {
    return key_of({model_key("benign"), cfg_["attacks"][short_name(m)], cfg_["test_points"], cfg_["metrics"]["realism_levels"]});
  }
  std::string attack_stem(AttackMethod m) const { return "attack-" + short_name(m) + seed_tag() + "_" + attack_key(m); }

  std::string sample_key() const {
    return key_of({model_key("benign"), cfg_["sampler"], cfg_["test_points"], cfg_["metrics"]["realism_levels"]});
  }
  std::string sample_stem() const {
    const auto& s = ctx_.config.sampler;
    return "sample-" + to_string(s.kind) + "-" + to_string(s.range) + seed_tag() + "_" + sample_key();
  }

  std::string augment_key(AttackMethod m) const {
    return key_of({model_key("benign"), cfg_["attacks"][short_name(m)], cfg_["augment"], cfg_["metrics"]["realism_levels"]});
  }
  std::string augment_stem(AttackMethod m) const { return "augment-" + short_name(m) + seed_tag() + "_" + augment_key(m); }

  std::string robust_key(AttackMethod m) const { return key_of({augment_key(m), cfg_["retrain"]}); }
  fs::path robust_path(AttackMethod m) const {
    return ctx_.ws.models() / ("robust-" + short_name(m) + seed_tag() + "_" + robust_key(m) + ".model");
  }

  std::string info_key() const {
    json parts = json::array({model_key("benign"), cfg_["test_points"], cfg_["metrics"]});
    for (auto m : kMethods) parts.push_back(attack_key(m));
    return key_of(parts);
  }

  std::string matrix_key(MatrixMode mode) const {
    json parts = json::array({model_key("benign"), to_string(mode), cfg_["test_points"], cfg_["attacks"]});
    for (auto m : kMethods) parts.push_back(robust_key(m));
    return key_of(parts);
  }

  std::string transfer_key() const {
    json parts = json::array({model_key("transfer")});
    for (auto m : kMethods) parts.push_back(attack_key(m));
    return key_of(parts);
  }

  fs::path records_path(const std::string& stem) const { return ctx_.ws.records() / (stem + ".jsonl"); }
  fs::path records_images(const std::string& stem) const { return ctx_.ws.records() / stem; }

 private:
  const Context& ctx_;
  json cfg_;
};

std::string rel(const Context& ctx, const fs::path& p) {
  return p.lexically_relative(ctx.ws.root).generic_string();
}

/// Summary skeleton shared by every command.
class Run {
 public:
  Run(const Context& ctx, std::string command, std::string stem)
      : ctx_(ctx), stem_(std::move(stem)), started_(iso_now()), t0_(std::chrono::steady_clock::now()) {
    summary_["command"] = std::move(command);
    summary_["schema_version"] = kSchemaVersion;
    summary_["experiment"] = ctx.config.experiment;
    summary_["seed"] = ctx.config.seed;
    summary_["config_hash"] = config_hash(ctx.config);
    json ov = json::object();
    for (const auto& [k, v] : ctx.overrides) ov[k] = v;
    summary_["overrides"] = ov;
    summary_["inputs"] = json::object();
    summary_["outputs"] = json::array();
    summary_["results"] = json::object();
  }

  json& results() { return summary_["results"]; }
  void input(const std::string& name, const fs::path& p) { summary_["inputs"][name] = rel(ctx_, p); }
  void output(const fs::path& p) { summary_["outputs"].push_back(rel(ctx_, p)); }
  const std::string& stem() const { return stem_; }

  void table(const Table& t, const std::string& suffix = "") {
    const auto base = ctx_.ws.reports() / (stem_ + suffix);
    write_text(fs::path(base.string() + ".csv"), t.to_csv());
    write_text(fs::path(base.string() + ".md"), t.to_markdown());
    output(fs::path(base.string() + ".csv"));
    output(fs::path(base.string() + ".md"));
  }

  /// Writes the summary and its timestamp sidecar; prints the summary path.
  void finish(bool ok = true) {
    summary_["status"] = ok ? "ok" : "failed";
    const auto path = ctx_.ws.reports() / (stem_ + ".json");
    write_text(path, summary_.dump(2) + "\n");
    json side;
    side["summary"] = rel(ctx_, path);
    side["started"] = started_;
    side["finished"] = iso_now();
    side["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    side["workers"] = ctx_.workers;
    write_text(ctx_.ws.reports() / (stem_ + ".time.json"), side.dump(2) + "\n");
    std::cout << path.string() << "\n";
  }

 private:
  const Context& ctx_;
  std::string stem_;
  std::string started_;
  std::chrono::steady_clock::time_point t0_;
  json summary_;
};

json eval_json(const EvalReport& r) {
  json per = json::array();
  for (double v : r.per_class_accuracy) per.push_back(std::isnan(v) ? json(nullptr) : json(v));
  return {{"overall", r.overall}, {"correct", r.correct}, {"total", r.total}, {"per_class", per}};
}

Dataset load_data(const Names& names, Run& run) {
  const auto dir = names.dataset_dir();
  run.input("dataset", dir);
  return load_dataset(dir);
}

Classifier load_checked(const fs::path& path, Run& run, const std::string& name) {
  run.input(name, path);
  return load_model(path);
}

LabeledSet clean_set(const Dataset& ds, std::span<const ManifestEntry* const> pts, const RenderConfig& rc) {
  LabeledSet s;
  for (const auto* e : pts) {
    s.images.push_back(quantize(render(ds.templates[static_cast<std::size_t>(e->template_id)], e->theta, rc)));
    s.labels.push_back(e->class_id);
  }
  return s;
}

Image upscale(const Image& im, int f) {
  Image out(im.height * f, im.width * f);
  for (int r = 0; r < out.height; ++r) {
    for (int c = 0; c < out.width; ++c) {
      for (int ch = 0; ch < Image::channels; ++ch) out.at(r, c, ch) = im.at(r / f, c / f, ch);
    }
  }
  return out;
}

/// Side-by-side original / perturbed PNGs of the first successful records.
void write_gallery(const Context& ctx, Run& run, std::span<const CounterexampleRecord> records) {
  const auto dir = ctx.ws.galleries() / run.stem();
  int written = 0;
  for (const auto& r : records) {
    if (written >= ctx.config.gallery_pairs) break;
    if (!r.success) continue;
    const Image pair[] = {upscale(r.x_original, 4), upscale(r.x_perturbed, 4)};
    const auto path = dir / (std::to_string(r.sample_id) + ".png");
    write_png(path, hstack(pair, 4));
    run.output(path);
    ++written;
  }
}

json batch_json(const BatchResult& b, std::span<const CounterexampleRecord> records) {
  double realism_sum = 0.0;
  for (const auto& r : records) realism_sum += r.realism;
  json j = eval_json(b.summary);
  j["points"] = records.size();
  j["successes"] = b.successes;
  j["total_queries"] = b.total_queries;
  j["successes_per_query"] = b.total_queries > 0 ? static_cast<double>(b.successes) / b.total_queries : 0.0;
  j["mean_realism"] = records.empty() ? 0.0 : realism_sum / static_cast<double>(records.size());
  return j;
}

std::vector<CounterexampleRecord> load_records_checked(const Names& names, const Dataset& ds, const std::string& stem,
                                                       Run& run, const std::string& name) {
  const auto path = names.records_path(stem);
  run.input(name, path);
  return load_records(path, ds.spaces);
}

EvalReport clean_eval(const Classifier& model, const Dataset& ds, std::span<const ManifestEntry* const> pts,
                      const RenderConfig& rc) {
  return evaluate(model, clean_set(ds, pts, rc));
}

}  // namespace

int cmd_gen_data(const Context& ctx) {
  const Names names(ctx);
  Run run(ctx, "gen-data", "gen-data" + names.seed_tag() + "_" + names.dataset_key());
  const auto ds = make_dataset(ctx.config.dataset_config());
  const auto dir = names.dataset_dir();
  save_dataset(dir, ds, ctx.config.render);
  run.output(dir / "manifest.jsonl");
  run.output(dir / "templates.json");
  auto& r = run.results();
  r["samples"] = ds.manifest.entries.size();
  for (auto s : {Split::train, Split::validation, Split::test}) r["split_" + to_string(s)] = ds.manifest.split(s).size();
  r["manifest_fnv"] = fnv_hex(manifest_to_jsonl(ds.manifest), 16);
  run.finish();
  return 0;
}

int cmd_train(const Context& ctx) {
  const Names names(ctx);
  const std::string arch = ctx.overrides.count("arch") ? ctx.overrides.at("arch") : "benign";
  Run run(ctx, "train", "train-" + arch + names.seed_tag() + "_" + names.model_key(arch));
  const auto ds = load_data(names, run);
  const auto& c = ctx.config;
  const auto train_set = load_split_images(names.dataset_dir(), ds.manifest, Split::train);
  const auto& hidden = arch == "transfer" ? c.transfer_hidden : c.hidden;
  Classifier model(mlp_widths(c.render.height, c.render.width, hidden, ds.manifest.class_count),
                   arch == "transfer" ? c.transfer_model_seed : c.model_seed);
  const auto history = train(model, train_set, c.train);
  const auto path = names.model_path(arch);
  save_model(path, model);
  run.output(path);

  Table t;
  t.title = "Training history (" + arch + ")";
  t.row_header = "epoch";
  t.columns = {"mean_loss", "accuracy"};
  for (std::size_t i = 0; i < history.size(); ++i) {
    t.row_names.push_back(std::to_string(i + 1));
    t.values.push_back({history[i].mean_loss, history[i].accuracy});
  }
  run.table(t);
  auto& r = run.results();
  r["arch"] = arch;
  r["widths"] = model.widths();
  r["parameters"] = model.parameter_count();
  r["final_train_accuracy"] = history.empty() ? 0.0 : history.back().accuracy;
  r["validation"] = eval_json(evaluate(model, load_split_images(names.dataset_dir(), ds.manifest, Split::validation)));
  r["test"] = eval_json(evaluate(model, load_split_images(names.dataset_dir(), ds.manifest, Split::test)));
  r["fingerprint"] = fnv_hex(std::to_string(model_fingerprint(model)), 16);
  run.finish();
  return 0;
}

int cmd_eval(const Context& ctx) {
  const Names names(ctx);
  Run run(ctx, "eval", "eval" + names.seed_tag() + "_" + names.eval_key());
  const auto ds = load_data(names, run);
  const auto model = load_checked(names.model_path("benign"), run, "model");
  const auto pts = select_test_points(ds.manifest, ctx.config.test_points);
  const auto clean = clean_eval(model, ds, pts, ctx.config.render);
  std::vector<std::pair<std::string, EvalReport>> rows{{"benign", clean}};
  auto& r = run.results();
  r["benign"] = eval_json(clean);
  // rows for every record set of this configuration already on disk
  std::vector<std::pair<std::string, std::string>> sets;
  for (auto m : kMethods) sets.emplace_back(to_string(m), names.attack_stem(m));
  for (auto kind : {SamplerKind::random, SamplerKind::halton}) {
    for (auto range : {RangePreset::large, RangePreset::small}) {
      Context alt = ctx;
      alt.config.sampler.kind = kind;
      alt.config.sampler.range = range;
      const Names an(alt);
      sets.emplace_back(alt.config.sampler.tag(), an.sample_stem());
    }
  }
  for (const auto& [label, stem] : sets) {
    if (!fs::exists(names.records_path(stem))) continue;
    const auto recs = load_records_checked(names, ds, stem, run, label);
    const auto rep = evaluate_on_records(model, recs);
    rows.emplace_back(label, rep);
    r[label] = eval_json(rep);
  }
  auto t = accuracy_degradation_table(ds.manifest.class_count, rows);
  t.meta = {{"seed", std::to_string(ctx.config.seed)}, {"points", std::to_string(pts.size())}};
  run.table(t);
  run.finish();
  return 0;
}

int cmd_attack(const Context& ctx) {
  const Names names(ctx);
  if (!ctx.overrides.count("method")) throw ConfigError("attack needs --method");
  const auto method = parse_attack_method(ctx.overrides.at("method"));
  const auto stem = names.attack_stem(method);
  Run run(ctx, "attack", stem);
  const auto ds = load_data(names, run);
  const auto model = load_checked(names.model_path("benign"), run, "model");
  const auto pts = select_test_points(ds.manifest, ctx.config.test_points);
  const auto& cfg = ctx.config.attack(method);
  const auto env = ctx.config.attack_env();
  const auto batch = attack_batch(model, ds.templates, pts, cfg, env, ctx.workers);
  save_records(names.records_path(stem), names.records_images(stem), batch.records);
  run.output(names.records_path(stem));
  write_gallery(ctx, run, batch.records);

  const auto eps = effective_epsilon(cfg, *ds.spaces.front());
  int agree = 0;
  for (const auto& rec : batch.records) agree += is_counterexample(rec, eps) == rec.success;
  const auto clean = clean_eval(model, ds, pts, ctx.config.render);
  auto t = accuracy_degradation_table(ds.manifest.class_count, {{"benign", clean}, {to_string(method), batch.summary}});
  t.meta = {{"method", to_string(method)}, {"seed", std::to_string(ctx.config.seed)}};
  run.table(t);
  auto& r = run.results();
  r["method"] = to_string(method);
  r["groups"] = cfg.active_groups;
  r["benign"] = eval_json(clean);
  r["attacked"] = batch_json(batch, batch.records);
  r["counterexample_flag_agreement"] = agree;
  run.finish();
  return 0;
}

int cmd_sample(const Context& ctx) {
  const Names names(ctx);
  const auto stem = names.sample_stem();
  Run run(ctx, "sample", stem);
  const auto ds = load_data(names, run);
  const auto model = load_checked(names.model_path("benign"), run, "model");
  const auto pts = select_test_points(ds.manifest, ctx.config.test_points);
  const auto env = ctx.config.attack_env();
  const auto res = sampler_batch(model, ds.templates, pts, ctx.config.sampler, env, ctx.workers);
  save_records(names.records_path(stem), names.records_images(stem), res.batch.records);
  run.output(names.records_path(stem));
  write_gallery(ctx, run, res.batch.records);
  const auto clean = clean_eval(model, ds, pts, ctx.config.render);
  auto t = accuracy_degradation_table(ds.manifest.class_count,
                                      {{"benign", clean}, {ctx.config.sampler.tag(), res.batch.summary}});
  t.meta = {{"sampler", ctx.config.sampler.tag()}, {"seed", std::to_string(ctx.config.seed)}};
  run.table(t);
  auto& r = run.results();
  r["sampler"] = ctx.config.sampler.tag();
  r["candidates"] = ctx.config.sampler.candidates;
  r["benign"] = eval_json(clean);
  r["sampled"] = batch_json(res.batch, res.batch.records);
  r["queries_per_success"] =
      std::isinf(res.queries_per_success) ? json(nullptr) : json(res.queries_per_success);
  run.finish();
  return 0;
}

int cmd_info_worth(const Context& ctx) {
  const Names names(ctx);
  const auto mode = ctx.config.membership;
  Run run(ctx, "info-worth", "info-worth-" + to_string(mode) + names.seed_tag() + "_" + names.info_key());
  const auto ds = load_data(names, run);
  const auto model = load_checked(names.model_path("benign"), run, "model");
  const auto pts = select_test_points(ds.manifest, ctx.config.test_points);
  const int L = ds.manifest.class_count;

  std::vector<std::pair<std::string, std::vector<WorthPoint>>> sets;
  std::vector<WorthPoint> benign;
  const auto clean = clean_set(ds, pts, ctx.config.render);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    benign.push_back({membership(model, clean.images[i], mode), clean.labels[i], 1.0});
  }
  sets.emplace_back("benign", std::move(benign));
  std::vector<AttackMethod> methods(std::begin(kMethods), std::end(kMethods));
  if (ctx.overrides.count("method")) methods = {parse_attack_method(ctx.overrides.at("method"))};
  for (auto m : methods) {
    const auto recs = load_records_checked(names, ds, names.attack_stem(m), run, to_string(m));
    std::vector<WorthPoint> wp;
    for (const auto& rec : recs) wp.push_back({membership(model, rec.x_perturbed, mode), rec.label, rec.realism});
    sets.emplace_back(to_string(m), std::move(wp));
  }

  Table t;
  t.title = "Information worth (" + to_string(mode) + " membership, nats)";
  t.row_header = "set";
  t.columns = {"worth", "points"};
  for (int i = 0; i < L; ++i) t.columns.push_back("gamma_" + std::to_string(i));
  t.meta = {{"membership", to_string(mode)}, {"units", "nats"}};
  auto& r = run.results();
  r["membership"] = to_string(mode);
  for (const auto& [name, wp] : sets) {
    const auto rep = information_worth(wp, L, mode, true);
    const auto doc = ctx.ws.reports() / (run.stem() + "-" + short_label(name) + ".json");
    write_text(doc, info_worth_to_json(rep));
    run.output(doc);
    std::vector<double> row{rep.worth, static_cast<double>(wp.size())};
    row.insert(row.end(), rep.gamma.begin(), rep.gamma.end());
    t.row_names.push_back(name);
    t.values.push_back(std::move(row));
    r[name] = {{"worth", rep.worth}, {"points", wp.size()}};
  }
  run.table(t);
  run.finish();
  return 0;
}

int cmd_augment(const Context& ctx) {
  const Names names(ctx);
  if (!ctx.overrides.count("method")) throw ConfigError("augment needs --method");
  const auto method = parse_attack_method(ctx.overrides.at("method"));
  const auto stem = names.augment_stem(method);
  Run run(ctx, "augment", stem);
  const auto ds = load_data(names, run);
  const auto model = load_checked(names.model_path("benign"), run, "model");
  const auto train_pts = ds.manifest.split(Split::train);
  // only the points the plan replaces need a counterexample
  std::vector<const ManifestEntry*> chosen;
  for (auto i : select_replacements(train_pts.size(), ctx.config.augment.fraction, ctx.config.augment.seed)) {
    chosen.push_back(train_pts[i]);
  }
  const auto batch = attack_batch(model, ds.templates, chosen, ctx.config.attack(method), ctx.config.attack_env(),
                                  ctx.workers);
  save_records(names.records_path(stem), names.records_images(stem), batch.records);
  run.output(names.records_path(stem));
  write_gallery(ctx, run, batch.records);
  auto& r = run.results();
  r["method"] = to_string(method);
  r["train_points"] = train_pts.size();
  r["replaced"] = chosen.size();
  r["attack"] = batch_json(batch, batch.records);
  run.finish();
  return 0;
}

int cmd_retrain(const Context& ctx) {
  const Names names(ctx);
  if (!ctx.overrides.count("method")) throw ConfigError("retrain needs --method");
  const auto method = parse_attack_method(ctx.overrides.at("method"));
  Run run(ctx, "retrain", "retrain-" + short_name(method) + names.seed_tag() + "_" + names.robust_key(method));
  const auto ds = load_data(names, run);
  const auto benign = load_checked(names.model_path("benign"), run, "model");
  const auto before = model_fingerprint(benign);
  const auto recs = load_records_checked(names, ds, names.augment_stem(method), run, "records");
  const auto train_set = load_split_images(names.dataset_dir(), ds.manifest, Split::train);
  std::vector<int> ids;
  for (const auto* e : ds.manifest.split(Split::train)) ids.push_back(e->sample_id);
  const auto augmented = build_augmented_dataset(train_set, ids, recs, ctx.config.augment);
  const auto robust = retrain(benign, augmented, ctx.config.retrain);
  const auto path = names.robust_path(method);
  save_model(path, robust);
  run.output(path);
  const auto test = load_split_images(names.dataset_dir(), ds.manifest, Split::test);
  auto& r = run.results();
  r["method"] = to_string(method);
  // the retraining schedule is the benign one unless the config overrides it
  r["retrain_config"] = json::parse(config_to_json(ctx.config))["retrain"];
  r["benign_test"] = eval_json(evaluate(benign, test));
  r["robust_test"] = eval_json(evaluate(robust, test));
  r["benign_unchanged"] = model_fingerprint(benign) == before;
  run.finish();
  return 0;
}

int cmd_robustness_matrix(const Context& ctx) {
  const Names names(ctx);
  const auto mode = ctx.overrides.count("mode") ? parse_matrix_mode(ctx.overrides.at("mode")) : MatrixMode::fixed;
  Run run(ctx, "robustness-matrix", "matrix-" + to_string(mode) + names.seed_tag() + "_" + names.matrix_key(mode));
  const auto ds = load_data(names, run);
  std::vector<Classifier> models;
  models.reserve(4);
  models.push_back(load_checked(names.model_path("benign"), run, "benign"));
  for (auto m : kMethods) models.push_back(load_checked(names.robust_path(m), run, short_name(m)));
  std::vector<NamedModel> named{{"benign", &models[0]}};
  std::vector<NamedAttack> attacks;
  for (std::size_t i = 0; i < 3; ++i) {
    named.push_back({short_name(kMethods[i]), &models[i + 1]});
    attacks.push_back({short_name(kMethods[i]), ctx.config.attack(kMethods[i])});
  }
  const auto pts = select_test_points(ds.manifest, ctx.config.test_points);
  auto t = robustness_matrix(named, attacks, ds.templates, pts, mode, ctx.config.attack_env(), ctx.workers);
  t.meta.emplace_back("seed", std::to_string(ctx.config.seed));
  run.table(t);
  auto& r = run.results();
  r["mode"] = to_string(mode);
  for (std::size_t i = 0; i < t.row_names.size(); ++i) {
    json row;
    for (std::size_t j = 0; j < t.columns.size(); ++j) row[t.columns[j]] = t.values[i][j];
    r[t.row_names[i]] = row;
  }
  run.finish();
  return 0;
}

int cmd_transfer(const Context& ctx) {
  const Names names(ctx);
  Run run(ctx, "transfer", "transfer" + names.seed_tag() + "_" + names.transfer_key());
  const auto ds = load_data(names, run);
  const auto a = load_checked(names.model_path("benign"), run, "model_a");
  const auto b = load_checked(names.model_path("transfer"), run, "model_b");
  const auto pts = select_test_points(ds.manifest, ctx.config.test_points);
  const auto b_clean = clean_eval(b, ds, pts, ctx.config.render);
  std::vector<std::pair<std::string, EvalReport>> rows{{"benign", b_clean}};
  auto& r = run.results();
  r["b_benign"] = eval_json(b_clean);
  r["a_benign"] = eval_json(clean_eval(a, ds, pts, ctx.config.render));
  for (auto m : kMethods) {
    const auto recs = load_records_checked(names, ds, names.attack_stem(m), run, to_string(m));
    const auto on_b = transfer_eval(recs, b);
    rows.emplace_back(to_string(m), on_b);
    r[to_string(m)] = {{"on_b", eval_json(on_b)}, {"on_a", eval_json(evaluate_on_records(a, recs))}};
  }
  auto t = accuracy_degradation_table(ds.manifest.class_count, rows);
  t.title = "Transferability to the second architecture";
  t.meta = {{"seed", std::to_string(ctx.config.seed)}};
  run.table(t);
  run.finish();
  return 0;
}

int cmd_gradcheck(const Context& ctx) {
  const Names names(ctx);
  const auto& c = ctx.config;
  Run run(ctx, "gradcheck", "gradcheck" + names.seed_tag() + "_" + fnv_hex(config_to_json(c), 8));
  const Classifier probe(mlp_widths(c.render.height, c.render.width, {32}, c.dataset.class_count),
                         derive_seed(c.seed, 5));
  const std::vector<GradcheckResult> suites{
      gradcheck_renderer(c.gradcheck_trials, derive_seed(c.seed, 1), c.render),
      gradcheck_semantic(probe, std::max(1, c.gradcheck_trials / 2), derive_seed(c.seed, 2), c.render),
      gradcheck_classifier_input(50, derive_seed(c.seed, 3)),
      gradcheck_classifier_weights(50, derive_seed(c.seed, 4))};
  Table t;
  t.title = "Finite-difference gradient checks";
  t.row_header = "suite";
  t.columns = {"trials", "passed", "pass_fraction", "required", "tolerance", "max_error", "median_error", "ok"};
  bool all_ok = true;
  auto& r = run.results();
  for (const auto& s : suites) {
    t.row_names.push_back(s.name);
    t.values.push_back({double(s.trials), double(s.passed), s.pass_fraction(), s.required_fraction, s.tolerance,
                        s.max_error, s.median_error, s.ok() ? 1.0 : 0.0});
    r[s.name] = {{"trials", s.trials}, {"passed", s.passed}, {"ok", s.ok()}, {"max_error", s.max_error}};
    all_ok = all_ok && s.ok();
  }
  r["all_ok"] = all_ok;
  run.table(t);
  run.finish(all_ok);
  if (!all_ok) std::cerr << "gradcheck: at least one suite exceeded its tolerance\n";
  return all_ok ? 0 : kExitGradcheckFailed;
}

int cmd_report(const Context& ctx) {
  const Names names(ctx);
  Run run(ctx, "report", "report" + names.seed_tag() + "_" + fnv_hex(config_to_json(ctx.config), 8));
  const auto dir = ctx.ws.reports();
  if (!fs::exists(dir)) throw MissingInputError(dir.string());
  // compose the tables already on disk, grouped by command, in name order
  std::vector<fs::path> csvs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto& p = entry.path();
    if (p.extension() == ".csv" && p.stem().string().rfind("report", 0) != 0) csvs.push_back(p);
  }
  std::sort(csvs.begin(), csvs.end());
  std::string md = "# Semantic counterexample report\n\n";
  md += "- experiment: " + ctx.config.experiment + "\n- seed: " + std::to_string(ctx.config.seed) + "\n\n";
  json included = json::array();
  for (const auto& p : csvs) {
    auto t = Table::from_csv(read_text(p));
    t.title = p.stem().string();
    md += t.to_markdown() + "\n";
    included.push_back(rel(ctx, p));
  }
  const auto out = dir / (run.stem() + ".md");
  write_text(out, md);
  run.output(out);
  run.results()["tables"] = included;
  run.finish();
  return 0;
}

}  // namespace semcex::cli
