#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "semcex/classifier.hpp"
#include "semcex/image.hpp"

namespace semcex {

/// Multi-scale standardized RMS distance, the realism metric used in place of
/// a learned perceptual metric.
///
/// For each of `levels` dyadic pyramid levels (2x2 box downsampling) and each
/// channel, both images are standardized with the mean and standard deviation
/// of their pooled pixels (std floored at 1e-6). The level distance is the RMS
/// of the standardized difference; the result is the mean over levels. It is
/// symmetric, zero on identical images and bounded above by 2, the value
/// reached by an all-zeros / all-ones pair.
struct RealismConfig {
  int levels = 3;
  /// Normalizer; perceptual_distance(zeros, ones). Use calibrate_realism.
  double d_max = 2.0;

  void validate() const;
};

RealismConfig calibrate_realism(int levels, int height, int width);

double perceptual_distance(const Image& a, const Image& b, const RealismConfig& config);

/// clamp(1 - d / d_max, 0, 1).
double realism_from_distance(double distance, double d_max);
/// Realism of `perturbed` relative to the image it was generated from.
double realism(const Image& perturbed, const Image& reference, const RealismConfig& config);

enum class Membership { binary, fractional };

std::string to_string(Membership mode);
Membership parse_membership(const std::string& text);

/// Binary: one-hot at the argmax (lowest index on ties). Fractional: softmax.
std::vector<double> membership_from_logits(std::span<const double> logits, Membership mode);
std::vector<double> membership(const Classifier& model, const Image& image, Membership mode);

struct WorthPoint {
  std::vector<double> membership;
  int label = 0;
  double realism = 1.0;
};

/// Realism- and membership-weighted entropy of the label distribution inside
/// each prediction subset.
struct InfoWorthReport {
  int class_count = 0;
  Membership mode = Membership::binary;
  bool realism_weighted = false;
  /// p[i][j]: weighted share of label j inside prediction subset i.
  std::vector<std::vector<double>> p;
  /// Unnormalized subset mass sum_t rho_t * mu_i(x_t).
  std::vector<double> mass;
  std::vector<double> gamma;
  /// Natural-log entropies, nats.
  std::vector<double> entropy;
  double worth = 0.0;
};

/// Point weights are the realism scores when `realism_weighted`, else 1.
/// Throws DomainError for an empty list, realism outside [0,1] or labels
/// outside [0, L). Subsets with zero mass get p = 0, gamma = 0, E = 0.
InfoWorthReport information_worth(std::span<const WorthPoint> points, int class_count,
                                  Membership mode = Membership::binary,
                                  bool realism_weighted = false);

/// Row-labelled numeric table with CSV / Markdown rendering.
struct Table {
  std::string title;
  std::string row_header = "row";
  std::vector<std::string> columns;
  std::vector<std::string> row_names;
  std::vector<std::vector<double>> values;
  /// Key/value lines written above the table (mode, seed, ...).
  std::vector<std::pair<std::string, std::string>> meta;

  std::string to_csv() const;
  std::string to_markdown() const;
  static Table from_csv(const std::string& text);

  /// Value at (row name, column name); throws DomainError if absent.
  double at(const std::string& row, const std::string& column) const;
};

/// Table-1 layout: one row per strategy with per-class accuracies and the
/// overall accuracy (class_0 ... class_{L-1}, overall).
Table accuracy_degradation_table(int class_count,
                                 const std::vector<std::pair<std::string, EvalReport>>& rows);

}  // namespace semcex
