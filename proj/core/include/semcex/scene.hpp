#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "semcex/param_space.hpp"

namespace semcex {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2, Vec2) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }

using Rgb = std::array<double, 3>;
using Polygon = std::vector<Vec2>;

/// Shoelace area; positive for counter-clockwise vertex order.
double signed_area(const Polygon& polygon);
/// Vertex mean, the pivot used by the pose transform.
Vec2 vertex_centroid(const Polygon& polygon);
/// True if no two non-adjacent edges intersect.
bool is_simple(const Polygon& polygon);

/// One object class: a base polygon in scene coordinates ([0,1]^2, y pointing
/// down the image) and its colors.
struct SceneTemplate {
  int class_id = 0;
  std::string family;
  Polygon base_polygon;
  Rgb base_color{};
  Rgb background_color{};

  /// Throws ConfigError unless the polygon has >= 3 vertices, is simple and
  /// counter-clockwise, and colors lie in [0,1].
  void validate() const;
};

/// Shape families available to the procedural dataset, in class order.
const std::vector<std::string>& shape_families();
/// Base polygon of a named family, centred on (0.5, 0.5).
Polygon family_polygon(const std::string& family);

/// Bounds used by make_scene_space.
struct SceneBounds {
  double vertex_offset = 0.08;
  double rotation = 3.14159265358979323846;
  double translation = 0.3;
  double scale_lo = 0.7;
  double scale_hi = 1.3;
  double color_offset = 1.0;
  double lighting_lo = 0.2;
  double lighting_hi = 1.5;
  /// Unit scale of the translation and scale pose coordinates relative to
  /// rotation (see ParamGroup::scale).
  double translation_unit = 0.2;
  double scale_unit = 0.5;
};

/// Groups, in order: vertex (2 per polygon vertex, x/y interleaved),
/// pose [rotation, tx, ty, scale], color (RGB offset), lighting (scalar).
SpacePtr make_scene_space(std::size_t vertex_count, const SceneBounds& bounds = {});

/// Parameter vector with zero offsets, identity pose and unit lighting.
SemanticParams neutral_params(const SpacePtr& space);

}  // namespace semcex
