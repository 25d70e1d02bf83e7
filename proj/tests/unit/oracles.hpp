#pragma once

// Test-side reference computations. Nothing here calls into the code under
// test beyond plain data accessors.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <vector>

#include <semcex/param_space.hpp>
#include <semcex/scene.hpp>

namespace oracle {

inline double central_difference(const std::function<double(double)>& f, double h) {
  return (f(h) - f(-h)) / (2.0 * h);
}

inline double rel_err(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s > 0.0 ? std::abs(a - b) / s : 0.0;
}

/// Classical weighted entropy by counting: subsets by predicted class, label
/// histogram inside each, entropy in nats, weighted by subset size.
inline double classical_worth(const std::vector<int>& preds, const std::vector<int>& labels, int L) {
  std::map<int, std::map<int, int>> counts;
  for (std::size_t t = 0; t < preds.size(); ++t) ++counts[preds[t]][labels[t]];
  double total = 0.0;
  for (int i = 0; i < L; ++i) {
    auto it = counts.find(i);
    if (it == counts.end()) continue;
    int m_i = 0;
    for (auto& [j, c] : it->second) m_i += c;
    double e = 0.0;
    for (auto& [j, c] : it->second) {
      const double p = double(c) / m_i;
      e -= p * std::log(p);
    }
    total += double(m_i) / preds.size() * e;
  }
  return total;
}

/// Space with one group per (name, dim, lo, hi).
struct GroupSpec {
  std::string name;
  std::size_t dim;
  double lo, hi;
};

inline semcex::SpacePtr box_space(const std::vector<GroupSpec>& specs) {
  std::vector<semcex::ParamGroup> groups;
  for (const auto& s : specs) groups.push_back(semcex::ParamGroup::uniform(s.name, s.dim, s.lo, s.hi));
  return std::make_shared<const semcex::ParamSpace>(std::move(groups));
}

/// Unit-square template [lo, hi]^2, counter-clockwise in a y-down frame
/// (positive shoelace area).
inline semcex::SceneTemplate square_scene(double lo, double hi, semcex::Rgb color, semcex::Rgb bg) {
  semcex::SceneTemplate s;
  s.family = "square";
  s.base_polygon = {{lo, lo}, {hi, lo}, {hi, hi}, {lo, hi}};
  s.base_color = color;
  s.background_color = bg;
  return s;
}

}  // namespace oracle
