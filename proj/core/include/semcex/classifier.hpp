#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "semcex/image.hpp"

namespace semcex {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct DenseLayer {
  RowMatrix weights;  ///< out x in
  Eigen::VectorXd bias;
};

enum class LossKind {
  cross_entropy,  ///< -ln softmax(logits)[label]
  raw_score,      ///< -logits[label]; ascending it lowers the correct-class score
};

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& text);

/// Fully connected network with ReLU between affine layers and no activation
/// after the last one (its outputs are the logits).
class Classifier {
 public:
  Classifier() = default;
  /// `widths` = {input, hidden..., classes}; Glorot-uniform weights drawn from
  /// `seed`, zero biases.
  Classifier(std::vector<int> widths, std::uint64_t seed);
  /// All weights and biases zero; `seed` is recorded only.
  static Classifier zeros(std::vector<int> widths, std::uint64_t seed = 0);

  const std::vector<int>& widths() const noexcept { return widths_; }
  int input_dim() const noexcept { return widths_.front(); }
  int class_count() const noexcept { return widths_.back(); }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t parameter_count() const noexcept;

  std::vector<DenseLayer>& layers() noexcept { return layers_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

  /// Weights then bias of each layer, weights row-major.
  std::vector<double> flat_parameters() const;
  void set_flat_parameters(std::span<const double> flat);
  bool all_finite() const;

  friend bool operator==(const Classifier& a, const Classifier& b);

 private:
  std::vector<int> widths_;
  std::uint64_t seed_ = 0;
  std::vector<DenseLayer> layers_;
};

/// Default image classifier: flatten H*W*3 -> hidden... -> classes.
std::vector<int> mlp_widths(int height, int width, std::vector<int> hidden, int classes);

std::vector<double> forward(const Classifier& model, std::span<const double> input);
std::vector<double> forward(const Classifier& model, const Image& image);

/// Max-subtracted softmax. Throws DomainError on non-finite logits.
std::vector<double> softmax(std::span<const double> logits);
/// Index of the largest entry; ties go to the lowest index.
int argmax(std::span<const double> values);
int predict(const Classifier& model, const Image& image);

double loss(const Classifier& model, const Image& image, int label, LossKind kind);

/// Gradient of sum_i cot[i] * logits[i] with respect to the input pixels.
std::vector<double> logits_vjp(const Classifier& model, std::span<const double> input,
                               std::span<const double> logit_cotangent);

/// Exact gradient of `loss` with respect to every pixel.
Image input_gradient(const Classifier& model, const Image& image, int label, LossKind kind);

/// Gradient of `loss` with respect to flat_parameters().
std::vector<double> parameter_gradient(const Classifier& model, std::span<const double> input,
                                       int label, LossKind kind);

/// Images with integer labels in [0, class_count).
struct LabeledSet {
  std::vector<Image> images;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
};

enum class Optimizer { sgd, adam };

struct TrainConfig {
  int epochs = 20;
  int batch_size = 64;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;

  void validate() const;
};

struct EpochStats {
  double mean_loss = 0.0;
  double accuracy = 0.0;
};

/// Minibatch training on mean cross-entropy. Batches are reshuffled every
/// epoch from a generator seeded with config.seed. Throws DomainError if a
/// step produces non-finite weights.
std::vector<EpochStats> train(Classifier& model, const LabeledSet& data, const TrainConfig& config);

struct EvalReport {
  std::vector<double> per_class_accuracy;  ///< NaN for classes absent from the set
  std::vector<int> class_counts;
  int correct = 0;
  int total = 0;
  double overall = 0.0;  ///< correct / total
};

EvalReport evaluate_predictions(std::span<const int> predictions, std::span<const int> labels,
                                int class_count);
EvalReport evaluate(const Classifier& model, const LabeledSet& data);

/// Versioned model file: one JSON header line, then the flat parameters as
/// little-endian 64-bit floats. Creates missing parent directories.
void save_model(const std::filesystem::path& path, const Classifier& model);
Classifier load_model(const std::filesystem::path& path);

}  // namespace semcex
