#include "semcex/param_space.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "semcex/error.hpp"

namespace semcex {

void ParamGroup::validate() const {
  if (name.empty()) throw ConfigError("parameter group without a name");
  if (lower.empty()) throw ConfigError("group '" + name + "' has dimension 0");
  if (upper.size() != lower.size() || scale.size() != lower.size()) {
    throw ConfigError("group '" + name + "': bound/scale vectors differ in length");
  }
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (!(lower[i] < upper[i])) {
      std::ostringstream os;
      os << "group '" << name << "' coordinate " << i << ": lower bound " << lower[i]
         << " is not below upper bound " << upper[i];
      throw ConfigError(os.str());
    }
    if (!(scale[i] > 0.0 && scale[i] <= 1.0)) {
      throw ConfigError("group '" + name + "': coordinate scale must lie in (0, 1]");
    }
  }
}

ParamGroup ParamGroup::uniform(std::string name, std::size_t dim, double lo, double hi,
                               std::string units) {
  ParamGroup g{std::move(name), std::vector<double>(dim, lo), std::vector<double>(dim, hi),
               std::vector<double>(dim, 1.0), std::move(units)};
  g.validate();
  return g;
}

ParamSpace::ParamSpace(std::vector<ParamGroup> groups) : groups_(std::move(groups)) {
  for (std::size_t i = 0; i < groups_.size(); ++i) {
    groups_[i].validate();
    for (std::size_t j = 0; j < i; ++j) {
      if (groups_[j].name == groups_[i].name) {
        throw ConfigError("duplicate parameter group '" + groups_[i].name + "'");
      }
    }
  }
}

std::size_t ParamSpace::find(std::string_view name) const noexcept {
  for (std::size_t i = 0; i < groups_.size(); ++i) {
    if (groups_[i].name == name) return i;
  }
  return npos;
}

std::size_t ParamSpace::total_dim() const noexcept {
  std::size_t n = 0;
  for (const auto& g : groups_) n += g.dim();
  return n;
}

bool ParamSpace::same_structure(const ParamSpace& other) const noexcept {
  if (this == &other) return true;
  if (groups_.size() != other.groups_.size()) return false;
  for (std::size_t i = 0; i < groups_.size(); ++i) {
    if (groups_[i].name != other.groups_[i].name || groups_[i].dim() != other.groups_[i].dim()) {
      return false;
    }
  }
  return true;
}

SemanticParams::SemanticParams(SpacePtr space, std::vector<std::vector<double>> values)
    : space_(std::move(space)), values_(std::move(values)) {
  if (!space_) throw StructuralError("parameter vector without a space");
  if (values_.size() != space_->size()) {
    throw StructuralError("parameter vector has " + std::to_string(values_.size()) +
                          " groups, space has " + std::to_string(space_->size()));
  }
  for (std::size_t g = 0; g < values_.size(); ++g) {
    if (values_[g].size() != (*space_)[g].dim()) {
      throw StructuralError("group '" + (*space_)[g].name + "' has wrong dimension");
    }
  }
}

SemanticParams SemanticParams::zeros(SpacePtr space) {
  std::vector<std::vector<double>> values;
  for (const auto& g : space->groups()) values.emplace_back(g.dim(), 0.0);
  return SemanticParams(std::move(space), std::move(values));
}

SemanticParams SemanticParams::midpoint(SpacePtr space) {
  std::vector<std::vector<double>> values;
  for (const auto& g : space->groups()) {
    std::vector<double> v(g.dim());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.5 * (g.lower[i] + g.upper[i]);
    values.push_back(std::move(v));
  }
  return SemanticParams(std::move(space), std::move(values));
}

std::span<const double> SemanticParams::group(std::string_view name) const {
  const auto g = space_->find(name);
  if (g == ParamSpace::npos) throw StructuralError("no parameter group '" + std::string(name) + "'");
  return values_[g];
}

std::span<double> SemanticParams::group(std::string_view name) {
  const auto g = space_->find(name);
  if (g == ParamSpace::npos) throw StructuralError("no parameter group '" + std::string(name) + "'");
  return values_[g];
}

bool SemanticParams::is_feasible() const noexcept {
  for (std::size_t g = 0; g < values_.size(); ++g) {
    const auto& spec = (*space_)[g];
    for (std::size_t i = 0; i < values_[g].size(); ++i) {
      const double v = values_[g][i];
      if (!(v >= spec.lower[i] && v <= spec.upper[i])) return false;
    }
  }
  return true;
}

bool SemanticParams::same_structure(const SemanticParams& other) const noexcept {
  if (!space_ || !other.space_) return space_ == other.space_;
  return space_->same_structure(*other.space_);
}

std::vector<double> SemanticParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(space_->total_dim());
  for (const auto& v : values_) flat.insert(flat.end(), v.begin(), v.end());
  return flat;
}

SemanticParams SemanticParams::unflatten(SpacePtr space, std::span<const double> flat) {
  if (flat.size() != space->total_dim()) {
    throw StructuralError("flat vector length does not match the space dimension");
  }
  std::vector<std::vector<double>> values;
  std::size_t offset = 0;
  for (const auto& g : space->groups()) {
    values.emplace_back(flat.begin() + offset, flat.begin() + offset + g.dim());
    offset += g.dim();
  }
  return SemanticParams(std::move(space), std::move(values));
}

namespace {

void require_same_structure(const SemanticParams& a, const SemanticParams& b, const char* op) {
  if (!a.same_structure(b)) {
    throw StructuralError(std::string(op) + ": operands have different group structure");
  }
}

}  // namespace

SemanticParams add(const SemanticParams& theta, const SemanticParams& perturbation) {
  require_same_structure(theta, perturbation, "add");
  SemanticParams out = theta;
  for (std::size_t g = 0; g < out.group_count(); ++g) {
    const auto& spec = theta.space()[g];
    auto dst = out.values(g);
    const auto delta = perturbation.values(g);
    for (std::size_t i = 0; i < dst.size(); ++i) {
      dst[i] = std::clamp(dst[i] + delta[i], spec.lower[i], spec.upper[i]);
    }
  }
  return out;
}

GroupNorms group_norm(const SemanticParams& perturbation, NormOrder order) {
  GroupNorms norms;
  for (std::size_t g = 0; g < perturbation.group_count(); ++g) {
    double n = 0.0;
    for (double v : perturbation.values(g)) {
      switch (order) {
        case NormOrder::l1: n += std::abs(v); break;
        case NormOrder::l2: n += v * v; break;
        case NormOrder::linf: n = std::max(n, std::abs(v)); break;
      }
    }
    if (order == NormOrder::l2) n = std::sqrt(n);
    norms.per_group[perturbation.space()[g].name] = n;
    norms.total += n;
  }
  return norms;
}

SemanticParams project(const SemanticParams& theta, const SemanticParams& theta0,
                       const GroupScalars& epsilon) {
  require_same_structure(theta, theta0, "project");
  for (const auto& [name, eps] : epsilon) {
    if (!(eps >= 0.0)) throw ConfigError("projection radius for '" + name + "' is negative");
  }
  SemanticParams out = theta;
  for (std::size_t g = 0; g < out.group_count(); ++g) {
    const auto& spec = theta.space()[g];
    const auto it = epsilon.find(spec.name);
    auto dst = out.values(g);
    const auto center = theta0.values(g);
    for (std::size_t i = 0; i < dst.size(); ++i) {
      double v = dst[i];
      if (it != epsilon.end()) {
        const double r = it->second * spec.scale[i];
        // Pull the ends in by an ulp where rounding would leave |v - center| > r.
        double lo = center[i] - r, hi = center[i] + r;
        while (center[i] - lo > r) lo = std::nextafter(lo, hi);
        while (hi - center[i] > r) hi = std::nextafter(hi, lo);
        v = std::clamp(v, lo, hi);
      }
      dst[i] = std::clamp(v, spec.lower[i], spec.upper[i]);
    }
  }
  return out;
}

SemanticParams sample_uniform(SpacePtr space, const GroupRanges& ranges, Rng& rng) {
  for (const auto& [name, range] : ranges) {
    const auto g = space->find(name);
    if (g == ParamSpace::npos) throw ConfigError("sampling range for unknown group '" + name + "'");
    const auto& spec = (*space)[g];
    if (!(range.first <= range.second)) throw ConfigError("empty sampling range for '" + name + "'");
    for (std::size_t i = 0; i < spec.dim(); ++i) {
      if (range.first < spec.lower[i] || range.second > spec.upper[i]) {
        throw ConfigError("sampling range for '" + name + "' exceeds the feasible bounds");
      }
    }
  }
  auto out = SemanticParams::midpoint(space);
  for (std::size_t g = 0; g < out.group_count(); ++g) {
    const auto it = ranges.find(space->groups()[g].name);
    if (it == ranges.end()) continue;
    for (double& v : out.values(g)) v = uniform(rng, it->second.first, it->second.second);
  }
  return out;
}

}  // namespace semcex
