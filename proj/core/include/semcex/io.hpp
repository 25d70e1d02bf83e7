#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "semcex/attacks.hpp"
#include "semcex/dataset.hpp"
#include "semcex/metrics.hpp"

namespace semcex {

/// Whole-file text I/O. read_text throws MissingInputError naming the path.
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

/// Templates document: one object per template with its polygon, colors and
/// the full parameter space (bounds, unit scales) so a manifest can be
/// reloaded without guessing the bounds.
std::string templates_to_json(std::span<const SceneTemplate> templates, std::span<const SpacePtr> spaces);
void templates_from_json(const std::string& text, std::vector<SceneTemplate>& templates,
                         std::vector<SpacePtr>& spaces);

/// One JSON object per line: {id, class, template, theta: {group: [...]}, split}.
std::string manifest_to_jsonl(const DatasetManifest& manifest);
/// `spaces[template]` supplies the layout of each theta. Split fractions are
/// recomputed from the entries.
DatasetManifest manifest_from_jsonl(const std::string& text, int class_count,
                                    std::span<const SpacePtr> spaces);

/// dir/templates.json, dir/manifest.jsonl and dir/images/<id>.png.
void save_dataset(const std::filesystem::path& dir, const Dataset& dataset, const RenderConfig& render);
Dataset load_dataset(const std::filesystem::path& dir);
std::filesystem::path sample_image_path(const std::filesystem::path& dir, int sample_id);

/// Images of a split read back from the PNG files (8-bit values / 255).
LabeledSet load_split_images(const std::filesystem::path& dir, const DatasetManifest& manifest, Split which);

/// Records as JSON lines. Images are written as PNG files under `image_dir`
/// and referenced by paths relative to the records file's directory.
void save_records(const std::filesystem::path& path, const std::filesystem::path& image_dir,
                  std::span<const CounterexampleRecord> records);
/// Reads records back; images come from the referenced PNG files and thetas use
/// `spaces[template]`.
std::vector<CounterexampleRecord> load_records(const std::filesystem::path& path,
                                               std::span<const SpacePtr> spaces);

/// All intermediate matrices of the report, for audit.
std::string info_worth_to_json(const InfoWorthReport& report);

}  // namespace semcex
