#include "semcex/scene.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "semcex/error.hpp"

namespace semcex {

double signed_area(const Polygon& polygon) {
  double twice = 0.0;
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    twice += cross(polygon[i], polygon[(i + 1) % polygon.size()]);
  }
  return 0.5 * twice;
}

Vec2 vertex_centroid(const Polygon& polygon) {
  Vec2 c;
  for (const auto& v : polygon) c = c + v;
  return (1.0 / static_cast<double>(polygon.size())) * c;
}

namespace {

int orientation(Vec2 a, Vec2 b, Vec2 c) {
  const double v = cross(b - a, c - a);
  return (v > 0) - (v < 0);
}

bool on_segment(Vec2 a, Vec2 b, Vec2 p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

bool segments_intersect(Vec2 p1, Vec2 p2, Vec2 q1, Vec2 q2) {
  const int o1 = orientation(p1, p2, q1);
  const int o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1);
  const int o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(p1, p2, q1)) return true;
  if (o2 == 0 && on_segment(p1, p2, q2)) return true;
  if (o3 == 0 && on_segment(q1, q2, p1)) return true;
  if (o4 == 0 && on_segment(q1, q2, p2)) return true;
  return false;
}

Polygon regular(std::size_t n, double radius, double phase) {
  Polygon p;
  for (std::size_t k = 0; k < n; ++k) {
    const double a = phase + 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    p.push_back({0.5 + radius * std::cos(a), 0.5 + radius * std::sin(a)});
  }
  return p;
}

Polygon star(std::size_t points, double outer, double inner) {
  Polygon p;
  for (std::size_t k = 0; k < 2 * points; ++k) {
    const double r = (k % 2 == 0) ? outer : inner;
    const double a = -std::numbers::pi / 2 + std::numbers::pi * static_cast<double>(k) /
                                                 static_cast<double>(points);
    p.push_back({0.5 + r * std::cos(a), 0.5 + r * std::sin(a)});
  }
  return p;
}

}  // namespace

bool is_simple(const Polygon& polygon) {
  const std::size_t n = polygon.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (segments_intersect(polygon[i], polygon[(i + 1) % n], polygon[j], polygon[(j + 1) % n])) {
        return false;
      }
    }
  }
  return true;
}

void SceneTemplate::validate() const {
  if (base_polygon.size() < 3) throw ConfigError("template polygon needs at least 3 vertices");
  if (!is_simple(base_polygon)) throw ConfigError("template polygon is not simple");
  if (!(signed_area(base_polygon) > 0.0)) throw ConfigError("template polygon is not counter-clockwise");
  for (double c : base_color) {
    if (!(c >= 0.0 && c <= 1.0)) throw ConfigError("template base color outside [0,1]");
  }
  for (double c : background_color) {
    if (!(c >= 0.0 && c <= 1.0)) throw ConfigError("template background color outside [0,1]");
  }
}

const std::vector<std::string>& shape_families() {
  static const std::vector<std::string> families = {"triangle", "square", "star",
                                                    "lshape",   "pentagon", "bar"};
  return families;
}

Polygon family_polygon(const std::string& family) {
  if (family == "triangle") return regular(3, 0.28, -std::numbers::pi / 2);
  if (family == "square") return {{0.3, 0.3}, {0.7, 0.3}, {0.7, 0.7}, {0.3, 0.7}};
  if (family == "star") return star(5, 0.30, 0.13);
  if (family == "lshape") {
    return {{0.3, 0.25}, {0.5, 0.25}, {0.5, 0.55}, {0.7, 0.55}, {0.7, 0.75}, {0.3, 0.75}};
  }
  if (family == "pentagon") return regular(5, 0.25, -std::numbers::pi / 2);
  if (family == "bar") return {{0.25, 0.42}, {0.75, 0.42}, {0.75, 0.58}, {0.25, 0.58}};
  throw ConfigError("unknown shape family '" + family + "'");
}

SpacePtr make_scene_space(std::size_t vertex_count, const SceneBounds& b) {
  if (vertex_count < 3) throw ConfigError("scene space needs at least 3 vertices");
  ParamGroup vertex = ParamGroup::uniform(std::string(group::vertex), 2 * vertex_count,
                                         -b.vertex_offset, b.vertex_offset, "scene units");
  ParamGroup pose{std::string(group::pose),
                  {-b.rotation, -b.translation, -b.translation, b.scale_lo},
                  {b.rotation, b.translation, b.translation, b.scale_hi},
                  {1.0, b.translation_unit, b.translation_unit, b.scale_unit},
                  "[radians, scene units, scene units, factor]"};
  ParamGroup color = ParamGroup::uniform(std::string(group::color), 3, -b.color_offset,
                                         b.color_offset, "RGB offset");
  ParamGroup lighting = ParamGroup::uniform(std::string(group::lighting), 1, b.lighting_lo,
                                            b.lighting_hi, "intensity");
  return std::make_shared<const ParamSpace>(
      std::vector<ParamGroup>{std::move(vertex), std::move(pose), std::move(color), std::move(lighting)});
}

SemanticParams neutral_params(const SpacePtr& space) {
  auto theta = SemanticParams::zeros(space);
  theta.group(group::pose)[kScale] = 1.0;
  theta.group(group::lighting)[0] = 1.0;
  return theta;
}

}  // namespace semcex
