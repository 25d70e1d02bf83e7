#pragma once

#include "semcex/image.hpp"
#include "semcex/param_space.hpp"
#include "semcex/scene.hpp"

namespace semcex {

/// Output size and edge softness of the soft rasterizer. Pixel (row, col) is
/// sampled at scene point ((col + 0.5) / width, (row + 0.5) / height).
struct RenderConfig {
  int height = 32;
  int width = 32;
  /// Logistic falloff scale tau in scene units.
  double softness = 1.5 / 32.0;

  /// Default softness of about 1.5 pixels for the given size.
  static RenderConfig for_size(int height, int width) {
    return {height, width, 1.5 / static_cast<double>(width)};
  }
  void validate() const;
};

/// v' = s * Rot(psi) * (v + delta - c) + c + t, with c the vertex centroid of
/// the base polygon (the pivot does not move with the vertex offsets).
Polygon transform_polygon(const SceneTemplate& scene, const SemanticParams& theta);

/// Closest boundary point of a polygon to a query point.
struct EdgeHit {
  double signed_distance = 0.0;
  std::size_t edge = 0;  ///< Edge from vertex `edge` to vertex `edge + 1` (mod n).
  double t = 0.0;        ///< Position of the closest point along that edge, in [0, 1].
  bool inside = false;
};

/// Nearest edge search; ties keep the lowest edge index. Throws
/// DegenerateGeometryError when |area| < 1e-12.
EdgeHit nearest_edge(const Polygon& polygon, Vec2 point);

/// Negative inside, positive outside; magnitude is the Euclidean distance to
/// the boundary.
double signed_distance(const Polygon& polygon, Vec2 point);

/// coverage = logistic(-sd / tau);
/// pixel = coverage * (color * lighting) + (1 - coverage) * background,
/// color = clamp(base + offset, 0, 1), result clamped to [0, 1].
Image render(const SceneTemplate& scene, const SemanticParams& theta, const RenderConfig& config);

/// Reverse-mode gradient of <cotangent, render(theta)> with respect to every
/// coordinate of theta. Clamped quantities pass zero gradient; at points
/// equidistant from two edges the edge chosen by nearest_edge is used.
SemanticParams render_vjp(const SceneTemplate& scene, const SemanticParams& theta,
                          const RenderConfig& config, const Image& cotangent);

}  // namespace semcex
