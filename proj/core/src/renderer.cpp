#include "semcex/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "semcex/error.hpp"

namespace semcex {

void RenderConfig::validate() const {
  if (height < 8 || width < 8) throw ConfigError("render size must be at least 8x8");
  if (!(softness > 0.0)) throw ConfigError("render softness must be positive");
}

namespace {

struct Pose {
  double rotation;
  Vec2 translation;
  double scale;
};

Pose read_pose(const SemanticParams& theta) {
  const auto p = theta.group(group::pose);
  if (p.size() != 4) throw StructuralError("pose group must have 4 coordinates");
  return {p[kRotation], {p[kTranslateX], p[kTranslateY]}, p[kScale]};
}

Vec2 rotate(double c, double s, Vec2 v) { return {c * v.x - s * v.y, s * v.x + c * v.y}; }

/// Quantities shared by the forward pass and its adjoint.
struct SceneState {
  Polygon polygon;
  Rgb color{};        // clamped object color
  Rgb color_raw{};    // base + offset before clamping
  double lighting = 1.0;
};

SceneState prepare(const SceneTemplate& scene, const SemanticParams& theta) {
  SceneState st;
  st.polygon = transform_polygon(scene, theta);
  const auto offset = theta.group(group::color);
  if (offset.size() != 3) throw StructuralError("color group must have 3 coordinates");
  for (int ch = 0; ch < 3; ++ch) {
    st.color_raw[ch] = scene.base_color[ch] + offset[ch];
    st.color[ch] = std::clamp(st.color_raw[ch], 0.0, 1.0);
  }
  const auto light = theta.group(group::lighting);
  if (light.size() != 1) throw StructuralError("lighting group must have 1 coordinate");
  st.lighting = light[0];
  return st;
}

double logistic(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

Vec2 pixel_center(const RenderConfig& cfg, int row, int col) {
  return {(col + 0.5) / cfg.width, (row + 0.5) / cfg.height};
}

}  // namespace

Polygon transform_polygon(const SceneTemplate& scene, const SemanticParams& theta) {
  const auto& base = scene.base_polygon;
  const auto offsets = theta.group(group::vertex);
  if (offsets.size() != 2 * base.size()) {
    throw StructuralError("vertex group has " + std::to_string(offsets.size()) +
                          " coordinates, template needs " + std::to_string(2 * base.size()));
  }
  const Pose pose = read_pose(theta);
  const Vec2 pivot = vertex_centroid(base);
  const double c = std::cos(pose.rotation);
  const double s = std::sin(pose.rotation);
  Polygon out(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    const Vec2 u = base[i] + Vec2{offsets[2 * i], offsets[2 * i + 1]} - pivot;
    out[i] = pose.scale * rotate(c, s, u) + pivot + pose.translation;
  }
  return out;
}

EdgeHit nearest_edge(const Polygon& polygon, Vec2 point) {
  const std::size_t n = polygon.size();
  if (n < 3 || std::abs(signed_area(polygon)) < 1e-12) {
    throw DegenerateGeometryError("polygon area below 1e-12");
  }
  EdgeHit hit;
  double best = std::numeric_limits<double>::infinity();
  bool inside = false;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = polygon[i];
    const Vec2 b = polygon[(i + 1) % n];
    const Vec2 ab = b - a;
    const double len2 = dot(ab, ab);
    double t = len2 > 0.0 ? dot(point - a, ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const Vec2 d = point - (a + t * ab);
    const double dist2 = dot(d, d);
    if (dist2 < best) {
      best = dist2;
      hit.edge = i;
      hit.t = t;
    }
    // even-odd crossing test on a horizontal ray towards +x
    if ((a.y > point.y) != (b.y > point.y)) {
      const double x_cross = a.x + (point.y - a.y) / (b.y - a.y) * ab.x;
      if (point.x < x_cross) inside = !inside;
    }
  }
  const double dist = std::sqrt(best);
  hit.inside = inside;
  hit.signed_distance = inside ? -dist : dist;
  return hit;
}

double signed_distance(const Polygon& polygon, Vec2 point) {
  return nearest_edge(polygon, point).signed_distance;
}

Image render(const SceneTemplate& scene, const SemanticParams& theta, const RenderConfig& config) {
  config.validate();
  const SceneState st = prepare(scene, theta);
  Image img(config.height, config.width);
  const double inv_tau = 1.0 / config.softness;
  for (int r = 0; r < config.height; ++r) {
    for (int c = 0; c < config.width; ++c) {
      const EdgeHit hit = nearest_edge(st.polygon, pixel_center(config, r, c));
      const double cov = logistic(-hit.signed_distance * inv_tau);
      for (int ch = 0; ch < 3; ++ch) {
        const double v =
            cov * st.color[ch] * st.lighting + (1.0 - cov) * scene.background_color[ch];
        img.at(r, c, ch) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return img;
}

SemanticParams render_vjp(const SceneTemplate& scene, const SemanticParams& theta,
                          const RenderConfig& config, const Image& cotangent) {
  config.validate();
  if (cotangent.height != config.height || cotangent.width != config.width) {
    throw DimensionError("cotangent image does not match the render size");
  }
  const SceneState st = prepare(scene, theta);
  const std::size_t n = st.polygon.size();
  const double inv_tau = 1.0 / config.softness;

  std::vector<Vec2> grad_vertex(n);  // d/d(transformed vertex)
  Rgb grad_color{};                  // d/d(clamped color)
  double grad_lighting = 0.0;

  for (int r = 0; r < config.height; ++r) {
    for (int c = 0; c < config.width; ++c) {
      const Vec2 p = pixel_center(config, r, c);
      const EdgeHit hit = nearest_edge(st.polygon, p);
      const double cov = logistic(-hit.signed_distance * inv_tau);
      double grad_cov = 0.0;
      for (int ch = 0; ch < 3; ++ch) {
        const double lit = st.color[ch] * st.lighting;
        const double v = cov * lit + (1.0 - cov) * scene.background_color[ch];
        if (v < 0.0 || v > 1.0) continue;
        const double g = cotangent.at(r, c, ch);
        grad_cov += g * (lit - scene.background_color[ch]);
        grad_color[ch] += g * cov * st.lighting;
        grad_lighting += g * cov * st.color[ch];
      }
      if (grad_cov == 0.0) continue;
      const double dist = std::abs(hit.signed_distance);
      if (dist == 0.0) continue;  // normal undefined on the boundary itself
      const double grad_sd = grad_cov * (-inv_tau) * cov * (1.0 - cov);
      const double grad_dist = hit.inside ? -grad_sd : grad_sd;
      const Vec2 a = st.polygon[hit.edge];
      const Vec2 b = st.polygon[(hit.edge + 1) % n];
      const Vec2 normal = (1.0 / dist) * (p - (a + hit.t * (b - a)));
      grad_vertex[hit.edge] = grad_vertex[hit.edge] - (grad_dist * (1.0 - hit.t)) * normal;
      grad_vertex[(hit.edge + 1) % n] = grad_vertex[(hit.edge + 1) % n] - (grad_dist * hit.t) * normal;
    }
  }

  SemanticParams grad = SemanticParams::zeros(theta.space_ptr());

  const Pose pose = read_pose(theta);
  const Vec2 pivot = vertex_centroid(scene.base_polygon);
  const auto offsets = theta.group(group::vertex);
  const double cs = std::cos(pose.rotation);
  const double sn = std::sin(pose.rotation);
  auto g_vertex = grad.group(group::vertex);
  auto g_pose = grad.group(group::pose);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 g = grad_vertex[i];
    const Vec2 u = scene.base_polygon[i] + Vec2{offsets[2 * i], offsets[2 * i + 1]} - pivot;
    // transpose of s * Rot
    g_vertex[2 * i] = pose.scale * (cs * g.x + sn * g.y);
    g_vertex[2 * i + 1] = pose.scale * (-sn * g.x + cs * g.y);
    const Vec2 ru = rotate(cs, sn, u);
    const Vec2 dru{-sn * u.x - cs * u.y, cs * u.x - sn * u.y};
    g_pose[kRotation] += pose.scale * dot(g, dru);
    g_pose[kTranslateX] += g.x;
    g_pose[kTranslateY] += g.y;
    g_pose[kScale] += dot(g, ru);
  }

  auto g_color = grad.group(group::color);
  for (int ch = 0; ch < 3; ++ch) {
    const bool clamped = st.color_raw[ch] < 0.0 || st.color_raw[ch] > 1.0;
    g_color[ch] = clamped ? 0.0 : grad_color[ch];
  }
  grad.group(group::lighting)[0] = grad_lighting;
  return grad;
}

}  // namespace semcex
