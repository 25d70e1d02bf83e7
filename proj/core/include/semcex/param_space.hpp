#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semcex/rng.hpp"

namespace semcex {

/// Names of the semantic feature groups understood by the renderer.
namespace group {
inline constexpr std::string_view vertex = "vertex";
inline constexpr std::string_view pose = "pose";
inline constexpr std::string_view color = "color";
inline constexpr std::string_view lighting = "lighting";
}  // namespace group

/// Pose coordinates, in order.
enum PoseIndex : std::size_t { kRotation = 0, kTranslateX = 1, kTranslateY = 2, kScale = 3 };

/// One named block of the semantic feature space with its feasible box.
///
/// `scale` holds a per-coordinate unit used by the attacks and the projection
/// ball: a step of size alpha moves coordinate i by alpha * scale[i]. It lets
/// one per-group step size drive coordinates measured in different units
/// (radians next to scene units in the pose group). All entries lie in (0, 1].
struct ParamGroup {
  std::string name;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> scale;
  std::string units;

  std::size_t dim() const noexcept { return lower.size(); }

  /// Throws ConfigError if bounds are malformed.
  void validate() const;

  /// Group with `dim` coordinates sharing the same bounds and unit scale 1.
  static ParamGroup uniform(std::string name, std::size_t dim, double lo, double hi,
                            std::string units = {});
};

/// Ordered collection of groups. Shared (immutable) between all parameter
/// vectors living in the same space.
class ParamSpace {
 public:
  explicit ParamSpace(std::vector<ParamGroup> groups);

  const std::vector<ParamGroup>& groups() const noexcept { return groups_; }
  std::size_t size() const noexcept { return groups_.size(); }
  const ParamGroup& operator[](std::size_t i) const { return groups_[i]; }

  /// Index of the named group or npos.
  std::size_t find(std::string_view name) const noexcept;
  bool contains(std::string_view name) const noexcept { return find(name) != npos; }
  std::size_t total_dim() const noexcept;

  /// Same group names, order, and dimensions.
  bool same_structure(const ParamSpace& other) const noexcept;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  std::vector<ParamGroup> groups_;
};

using SpacePtr = std::shared_ptr<const ParamSpace>;

/// Map from group name to a per-group scalar (epsilon, step size, ...).
using GroupScalars = std::map<std::string, double, std::less<>>;

/// A point of the semantic feature space, or a vector with the same shape
/// (a perturbation or a gradient). Feasibility is not enforced on
/// construction; operations that require it say so.
class SemanticParams {
 public:
  SemanticParams() = default;
  SemanticParams(SpacePtr space, std::vector<std::vector<double>> values);

  /// All-zero vector in `space`.
  static SemanticParams zeros(SpacePtr space);
  /// Midpoint of every feasible box.
  static SemanticParams midpoint(SpacePtr space);

  const ParamSpace& space() const noexcept { return *space_; }
  const SpacePtr& space_ptr() const noexcept { return space_; }
  std::size_t group_count() const noexcept { return values_.size(); }

  std::span<const double> values(std::size_t g) const noexcept { return values_[g]; }
  std::span<double> values(std::size_t g) noexcept { return values_[g]; }
  /// Values of the named group; throws StructuralError if absent.
  std::span<const double> group(std::string_view name) const;
  std::span<double> group(std::string_view name);

  bool is_feasible() const noexcept;
  bool same_structure(const SemanticParams& other) const noexcept;

  std::vector<double> flatten() const;
  static SemanticParams unflatten(SpacePtr space, std::span<const double> flat);

  friend bool operator==(const SemanticParams& a, const SemanticParams& b) {
    return a.same_structure(b) && a.values_ == b.values_;
  }

 private:
  SpacePtr space_;
  std::vector<std::vector<double>> values_;
};

/// Elementwise sum followed by a clamp into the feasible box of each group.
SemanticParams add(const SemanticParams& theta, const SemanticParams& perturbation);

enum class NormOrder { l1, l2, linf };

struct GroupNorms {
  std::map<std::string, double, std::less<>> per_group;
  /// Sum of the per-group norms. Reporting only: the groups have unrelated units.
  double total = 0.0;
};

GroupNorms group_norm(const SemanticParams& perturbation, NormOrder order);

/// Clamps theta into the per-group box [theta0 - eps_g * scale, theta0 + eps_g * scale]
/// and then into the feasible bounds. Groups absent from `epsilon` are left
/// unconstrained by the ball (only feasibility applies).
SemanticParams project(const SemanticParams& theta, const SemanticParams& theta0,
                       const GroupScalars& epsilon);

/// Per-group closed intervals used for uniform draws.
using GroupRanges = std::map<std::string, std::pair<double, double>, std::less<>>;

/// Uniform draw per coordinate inside `ranges` (groups without a range are set
/// to the midpoint of their bounds). Ranges must lie inside the feasible box.
SemanticParams sample_uniform(SpacePtr space, const GroupRanges& ranges, Rng& rng);

}  // namespace semcex
