#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semcex/classifier.hpp"
#include "semcex/renderer.hpp"

namespace semcex {

/// Outcome of one finite-difference suite. A trial passes when the relative
/// error |a - n| / max(|a|, |n|) is below `tolerance` or both values are below
/// `abs_floor`. The suite passes when pass_fraction >= required_fraction.
struct GradcheckResult {
  std::string name;
  int trials = 0;
  int passed = 0;
  double tolerance = 0.0;
  double abs_floor = 0.0;
  double required_fraction = 1.0;
  double max_error = 0.0;
  double median_error = 0.0;

  double pass_fraction() const noexcept { return trials > 0 ? double(passed) / trials : 0.0; }
  bool ok() const noexcept { return trials > 0 && pass_fraction() >= required_fraction; }
};

double relative_error(double analytic, double numeric);

/// Directional derivative of <cotangent, render(theta)> along a random
/// direction against render_vjp, on random scenes and parameters kept away
/// from every clamp. Step h = 1e-4.
GradcheckResult gradcheck_renderer(int trials = 200, std::uint64_t seed = 1,
                                   const RenderConfig& config = {});

/// Same check for loss(render(theta)) through `model` (all groups active).
GradcheckResult gradcheck_semantic(const Classifier& model, int trials = 100, std::uint64_t seed = 2,
                                   const RenderConfig& config = {});

/// Input-pixel gradients of a random small classifier, h = 1e-5.
GradcheckResult gradcheck_classifier_input(int trials = 50, std::uint64_t seed = 3);
/// Weight gradients of every layer of a random small classifier, h = 1e-5.
GradcheckResult gradcheck_classifier_weights(int trials = 50, std::uint64_t seed = 4);

/// The four suites with their default settings; the semantic suite uses a
/// random classifier sized for `config` when `model` is null.
std::vector<GradcheckResult> run_all_gradchecks(std::uint64_t seed, const RenderConfig& config = {},
                                                const Classifier* model = nullptr);

}  // namespace semcex
