#include "semcex/io.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "semcex/error.hpp"
#include "semcex/renderer.hpp"

namespace semcex {

namespace fs = std::filesystem;
using nlohmann::json;
using ordered = nlohmann::ordered_json;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError(path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("short write to " + path.string());
}

namespace {

ordered rgb_json(const Rgb& c) { return ordered::array({c[0], c[1], c[2]}); }

Rgb rgb_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("color must be a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

ordered theta_json(const SemanticParams& theta) {
  ordered out = ordered::object();
  for (std::size_t g = 0; g < theta.group_count(); ++g) {
    const auto v = theta.values(g);
    out[theta.space()[g].name] = std::vector<double>(v.begin(), v.end());
  }
  return out;
}

SemanticParams theta_from(const json& j, const SpacePtr& space) {
  auto theta = SemanticParams::zeros(space);
  for (std::size_t g = 0; g < space->size(); ++g) {
    const auto& name = (*space)[g].name;
    if (!j.contains(name)) throw StructuralError("theta lacks group '" + name + "'");
    const auto v = j.at(name).get<std::vector<double>>();
    if (v.size() != (*space)[g].dim()) throw StructuralError("group '" + name + "' has the wrong size");
    std::copy(v.begin(), v.end(), theta.values(g).begin());
  }
  if (j.size() != space->size()) throw StructuralError("theta has unknown groups");
  return theta;
}

const SpacePtr& space_for(std::span<const SpacePtr> spaces, int template_id) {
  if (template_id < 0 || template_id >= static_cast<int>(spaces.size())) {
    throw DomainError("template " + std::to_string(template_id) + " does not exist");
  }
  return spaces[static_cast<std::size_t>(template_id)];
}

template <typename Fn>
void for_each_line(const std::string& text, Fn&& fn) {
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw IoError("line " + std::to_string(number) + ": " + e.what());
    }
  }
}

}  // namespace

std::string templates_to_json(std::span<const SceneTemplate> templates, std::span<const SpacePtr> spaces) {
  if (templates.size() != spaces.size()) throw DimensionError("one space per template expected");
  ordered doc;
  doc["format"] = "semcex-templates";
  doc["version"] = 1;
  ordered list = ordered::array();
  for (std::size_t i = 0; i < templates.size(); ++i) {
    const auto& t = templates[i];
    ordered item;
    item["class"] = t.class_id;
    item["family"] = t.family;
    ordered poly = ordered::array();
    for (const auto& v : t.base_polygon) poly.push_back(ordered::array({v.x, v.y}));
    item["polygon"] = poly;
    item["base_color"] = rgb_json(t.base_color);
    item["background_color"] = rgb_json(t.background_color);
    ordered groups = ordered::array();
    for (const auto& g : spaces[i]->groups()) {
      groups.push_back({{"name", g.name}, {"lower", g.lower}, {"upper", g.upper},
                        {"scale", g.scale}, {"units", g.units}});
    }
    item["space"] = groups;
    list.push_back(item);
  }
  doc["templates"] = list;
  return doc.dump(2) + "\n";
}

void templates_from_json(const std::string& text, std::vector<SceneTemplate>& templates,
                         std::vector<SpacePtr>& spaces) {
  templates.clear();
  spaces.clear();
  try {
    const auto doc = json::parse(text);
    if (doc.value("format", "") != "semcex-templates") throw IoError("not a templates document");
    if (doc.value("version", 0) != 1) throw IoError("unsupported templates version");
    for (const auto& item : doc.at("templates")) {
      SceneTemplate t;
      t.class_id = item.at("class").get<int>();
      t.family = item.at("family").get<std::string>();
      for (const auto& v : item.at("polygon")) t.base_polygon.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
      t.base_color = rgb_from(item.at("base_color"));
      t.background_color = rgb_from(item.at("background_color"));
      t.validate();
      std::vector<ParamGroup> groups;
      for (const auto& g : item.at("space")) {
        groups.push_back({g.at("name").get<std::string>(), g.at("lower").get<std::vector<double>>(),
                          g.at("upper").get<std::vector<double>>(), g.at("scale").get<std::vector<double>>(),
                          g.value("units", "")});
      }
      templates.push_back(std::move(t));
      spaces.push_back(std::make_shared<const ParamSpace>(std::move(groups)));
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("templates document: ") + e.what());
  }
}

std::string manifest_to_jsonl(const DatasetManifest& manifest) {
  std::string out;
  for (const auto& e : manifest.entries) {
    ordered line;
    line["id"] = e.sample_id;
    line["class"] = e.class_id;
    line["template"] = e.template_id;
    line["theta"] = theta_json(e.theta);
    line["split"] = to_string(e.split);
    out += line.dump();
    out += '\n';
  }
  return out;
}

DatasetManifest manifest_from_jsonl(const std::string& text, int class_count, std::span<const SpacePtr> spaces) {
  DatasetManifest m;
  m.class_count = class_count;
  std::map<Split, int> counts;
  for_each_line(text, [&](const json& j) {
    ManifestEntry e;
    e.sample_id = j.at("id").get<int>();
    e.class_id = j.at("class").get<int>();
    e.template_id = j.at("template").get<int>();
    e.theta = theta_from(j.at("theta"), space_for(spaces, e.template_id));
    e.split = parse_split(j.at("split").get<std::string>());
    ++counts[e.split];
    m.entries.push_back(std::move(e));
  });
  if (!m.entries.empty()) {
    const double n = static_cast<double>(m.entries.size());
    m.train_fraction = counts[Split::train] / n;
    m.validation_fraction = counts[Split::validation] / n;
    m.test_fraction = counts[Split::test] / n;
  }
  m.validate();
  return m;
}

fs::path sample_image_path(const fs::path& dir, int sample_id) {
  return dir / "images" / (std::to_string(sample_id) + ".png");
}

void save_dataset(const fs::path& dir, const Dataset& dataset, const RenderConfig& render_config) {
  fs::create_directories(dir / "images");
  write_text(dir / "templates.json", templates_to_json(dataset.templates, dataset.spaces));
  write_text(dir / "manifest.jsonl", manifest_to_jsonl(dataset.manifest));
  for (const auto& e : dataset.manifest.entries) {
    const auto& scene = dataset.templates[static_cast<std::size_t>(e.template_id)];
    write_png(sample_image_path(dir, e.sample_id), render(scene, e.theta, render_config));
  }
}

Dataset load_dataset(const fs::path& dir) {
  Dataset ds;
  templates_from_json(read_text(dir / "templates.json"), ds.templates, ds.spaces);
  int classes = 0;
  for (const auto& t : ds.templates) classes = std::max(classes, t.class_id + 1);
  ds.manifest = manifest_from_jsonl(read_text(dir / "manifest.jsonl"), classes, ds.spaces);
  return ds;
}

LabeledSet load_split_images(const fs::path& dir, const DatasetManifest& manifest, Split which) {
  LabeledSet set;
  for (const auto* e : manifest.split(which)) {
    set.images.push_back(read_png(sample_image_path(dir, e->sample_id)));
    set.labels.push_back(e->class_id);
  }
  return set;
}

void save_records(const fs::path& path, const fs::path& image_dir,
                  std::span<const CounterexampleRecord> records) {
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  fs::create_directories(image_dir);
  std::string out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const std::string stem = std::to_string(r.sample_id >= 0 ? r.sample_id : static_cast<int>(i));
    const fs::path orig = image_dir / (stem + "_orig.png");
    const fs::path pert = image_dir / (stem + "_pert.png");
    write_png(orig, r.x_original);
    write_png(pert, r.x_perturbed);
    ordered line;
    line["id"] = r.sample_id;
    line["template"] = r.template_id;
    line["label"] = r.label;
    line["method"] = r.method;
    line["theta_original"] = theta_json(r.theta_original);
    line["theta_perturbed"] = theta_json(r.theta_perturbed);
    line["pred_original"] = r.pred_original;
    line["pred_perturbed"] = r.pred_perturbed;
    line["softmax_perturbed"] = r.softmax_perturbed;
    line["realism"] = r.realism;
    line["success"] = r.success;
    line["queries"] = r.queries;
    line["image_original"] = fs::relative(orig, base).generic_string();
    line["image_perturbed"] = fs::relative(pert, base).generic_string();
    out += line.dump();
    out += '\n';
  }
  write_text(path, out);
}

std::vector<CounterexampleRecord> load_records(const fs::path& path, std::span<const SpacePtr> spaces) {
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::vector<CounterexampleRecord> records;
  for_each_line(read_text(path), [&](const json& j) {
    CounterexampleRecord r;
    r.sample_id = j.at("id").get<int>();
    r.template_id = j.at("template").get<int>();
    r.label = j.at("label").get<int>();
    r.method = j.at("method").get<std::string>();
    const auto& space = space_for(spaces, r.template_id);
    r.theta_original = theta_from(j.at("theta_original"), space);
    r.theta_perturbed = theta_from(j.at("theta_perturbed"), space);
    r.pred_original = j.at("pred_original").get<int>();
    r.pred_perturbed = j.at("pred_perturbed").get<int>();
    r.softmax_perturbed = j.at("softmax_perturbed").get<std::vector<double>>();
    r.realism = j.at("realism").get<double>();
    r.success = j.at("success").get<bool>();
    r.queries = j.at("queries").get<long>();
    r.x_original = read_png(base / j.at("image_original").get<std::string>());
    r.x_perturbed = read_png(base / j.at("image_perturbed").get<std::string>());
    records.push_back(std::move(r));
  });
  return records;
}

std::string info_worth_to_json(const InfoWorthReport& report) {
  ordered doc;
  doc["class_count"] = report.class_count;
  doc["membership"] = to_string(report.mode);
  doc["realism_weighted"] = report.realism_weighted;
  doc["units"] = "nats";
  doc["p"] = report.p;
  doc["mass"] = report.mass;
  doc["gamma"] = report.gamma;
  doc["entropy"] = report.entropy;
  doc["worth"] = report.worth;
  return doc.dump(2) + "\n";
}

}  // namespace semcex
