#include "semcex/classifier.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "semcex/error.hpp"
#include "semcex/rng.hpp"

namespace semcex {

std::string to_string(LossKind kind) {
  return kind == LossKind::cross_entropy ? "cross-entropy" : "raw-score";
}

LossKind parse_loss_kind(const std::string& text) {
  if (text == "cross-entropy" || text == "ce") return LossKind::cross_entropy;
  if (text == "raw-score" || text == "raw") return LossKind::raw_score;
  throw ConfigError("unknown loss kind '" + text + "'");
}

namespace {

void check_widths(const std::vector<int>& widths) {
  if (widths.size() < 2) throw ConfigError("classifier needs at least an input and an output width");
  for (int w : widths) {
    if (w < 1) throw ConfigError("classifier layer widths must be positive");
  }
}

void check_label(const Classifier& model, int label) {
  if (label < 0 || label >= model.class_count()) {
    throw DomainError("label " + std::to_string(label) + " outside [0, " +
                      std::to_string(model.class_count()) + ")");
  }
}

void check_input(const Classifier& model, std::size_t n) {
  if (static_cast<int>(n) != model.input_dim()) {
    throw DimensionError("input has " + std::to_string(n) + " values, model expects " +
                         std::to_string(model.input_dim()));
  }
}

/// Pre-activations of every layer for one input; the last entry holds the logits.
std::vector<Eigen::VectorXd> forward_trace(const Classifier& model, std::span<const double> input) {
  check_input(model, input.size());
  std::vector<Eigen::VectorXd> z;
  z.reserve(model.layers().size());
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(input.data(), static_cast<Eigen::Index>(input.size()));
  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    const auto& layer = model.layers()[l];
    z.push_back(layer.weights * a + layer.bias);
    if (l + 1 < model.layers().size()) a = z.back().cwiseMax(0.0);
  }
  return z;
}

Eigen::VectorXd loss_cotangent(std::span<const double> logits, int label, LossKind kind) {
  Eigen::VectorXd cot = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(logits.size()));
  if (kind == LossKind::cross_entropy) {
    const auto p = softmax(logits);
    for (std::size_t i = 0; i < p.size(); ++i) cot[static_cast<Eigen::Index>(i)] = p[i];
    cot[label] -= 1.0;
  } else {
    cot[label] = -1.0;
  }
  return cot;
}

void put_le(std::ostream& os, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  os.write(bytes, 8);
}

double get_le(const unsigned char* bytes) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

constexpr int kModelFormatVersion = 1;

}  // namespace

Classifier::Classifier(std::vector<int> widths, std::uint64_t seed)
    : widths_(std::move(widths)), seed_(seed) {
  check_widths(widths_);
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const int in = widths_[l];
    const int out = widths_[l + 1];
    const double limit = std::sqrt(6.0 / (in + out));
    DenseLayer layer{RowMatrix(out, in), Eigen::VectorXd::Zero(out)};
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i) {
      layer.weights.data()[i] = uniform(rng, -limit, limit);
    }
    layers_.push_back(std::move(layer));
  }
}

Classifier Classifier::zeros(std::vector<int> widths, std::uint64_t seed) {
  check_widths(widths);
  Classifier m;
  m.widths_ = std::move(widths);
  m.seed_ = seed;
  for (std::size_t l = 0; l + 1 < m.widths_.size(); ++l) {
    m.layers_.push_back({RowMatrix::Zero(m.widths_[l + 1], m.widths_[l]),
                         Eigen::VectorXd::Zero(m.widths_[l + 1])});
  }
  return m;
}

std::size_t Classifier::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

std::vector<double> Classifier::flat_parameters() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& l : layers_) {
    flat.insert(flat.end(), l.weights.data(), l.weights.data() + l.weights.size());
    flat.insert(flat.end(), l.bias.data(), l.bias.data() + l.bias.size());
  }
  return flat;
}

void Classifier::set_flat_parameters(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw DimensionError("flat parameter vector has wrong length");
  std::size_t k = 0;
  for (auto& l : layers_) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(k), l.weights.size(), l.weights.data());
    k += static_cast<std::size_t>(l.weights.size());
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(k), l.bias.size(), l.bias.data());
    k += static_cast<std::size_t>(l.bias.size());
  }
}

bool Classifier::all_finite() const {
  return std::all_of(layers_.begin(), layers_.end(), [](const DenseLayer& l) {
    return l.weights.allFinite() && l.bias.allFinite();
  });
}

bool operator==(const Classifier& a, const Classifier& b) {
  return a.widths_ == b.widths_ && a.flat_parameters() == b.flat_parameters();
}

std::vector<int> mlp_widths(int height, int width, std::vector<int> hidden, int classes) {
  std::vector<int> w{height * width * Image::channels};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(classes);
  return w;
}

std::vector<double> forward(const Classifier& model, std::span<const double> input) {
  const auto z = forward_trace(model, input);
  return {z.back().data(), z.back().data() + z.back().size()};
}

std::vector<double> forward(const Classifier& model, const Image& image) {
  return forward(model, image.pixels());
}

std::vector<double> softmax(std::span<const double> logits) {
  for (double v : logits) {
    if (!std::isfinite(v)) throw DomainError("softmax of non-finite logits");
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += (p[i] = std::exp(logits[i] - m));
  for (double& v : p) v /= sum;
  return p;
}

int argmax(std::span<const double> values) {
  return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

int predict(const Classifier& model, const Image& image) { return argmax(forward(model, image)); }

double loss(const Classifier& model, const Image& image, int label, LossKind kind) {
  check_label(model, label);
  const auto logits = forward(model, image);
  if (kind == LossKind::raw_score) return -logits[static_cast<std::size_t>(label)];
  for (double v : logits) {
    if (!std::isfinite(v)) throw DomainError("loss of non-finite logits");
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - m);
  return m + std::log(sum) - logits[static_cast<std::size_t>(label)];
}

std::vector<double> logits_vjp(const Classifier& model, std::span<const double> input,
                               std::span<const double> logit_cotangent) {
  if (static_cast<int>(logit_cotangent.size()) != model.class_count()) {
    throw DimensionError("logit cotangent has wrong length");
  }
  const auto z = forward_trace(model, input);
  Eigen::VectorXd g = Eigen::Map<const Eigen::VectorXd>(
      logit_cotangent.data(), static_cast<Eigen::Index>(logit_cotangent.size()));
  for (std::size_t l = model.layers().size(); l-- > 0;) {
    g = model.layers()[l].weights.transpose() * g;
    if (l > 0) g = (z[l - 1].array() > 0.0).select(g, 0.0);
  }
  return {g.data(), g.data() + g.size()};
}

Image input_gradient(const Classifier& model, const Image& image, int label, LossKind kind) {
  check_label(model, label);
  const auto logits = forward(model, image);
  const Eigen::VectorXd cot = loss_cotangent(logits, label, kind);
  Image grad(image.height, image.width);
  grad.data = logits_vjp(model, image.pixels(), {cot.data(), static_cast<std::size_t>(cot.size())});
  return grad;
}

std::vector<double> parameter_gradient(const Classifier& model, std::span<const double> input,
                                       int label, LossKind kind) {
  check_label(model, label);
  const auto z = forward_trace(model, input);
  const auto& logits = z.back();
  Eigen::VectorXd g = loss_cotangent({logits.data(), static_cast<std::size_t>(logits.size())}, label, kind);
  const auto& layers = model.layers();
  std::vector<DenseLayer> grads(layers.size());
  for (std::size_t l = layers.size(); l-- > 0;) {
    Eigen::VectorXd a_prev = l == 0 ? Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(
                                          input.data(), static_cast<Eigen::Index>(input.size())))
                                    : Eigen::VectorXd(z[l - 1].cwiseMax(0.0));
    grads[l].weights = g * a_prev.transpose();
    grads[l].bias = g;
    if (l > 0) {
      g = layers[l].weights.transpose() * g;
      g = (z[l - 1].array() > 0.0).select(g, 0.0);
    }
  }
  std::vector<double> flat;
  flat.reserve(model.parameter_count());
  for (const auto& gl : grads) {
    flat.insert(flat.end(), gl.weights.data(), gl.weights.data() + gl.weights.size());
    flat.insert(flat.end(), gl.bias.data(), gl.bias.data() + gl.bias.size());
  }
  return flat;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  // lr == 0 is accepted as a null update
  if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be non-negative");
}

std::vector<EpochStats> train(Classifier& model, const LabeledSet& data, const TrainConfig& config) {
  config.validate();
  if (data.size() == 0) throw DomainError("cannot train on an empty dataset");
  if (data.images.size() != data.labels.size()) throw DimensionError("images and labels differ in count");
  for (const auto& im : data.images) check_input(model, im.size());
  for (int y : data.labels) check_label(model, y);

  auto& layers = model.layers();
  const std::size_t depth = layers.size();
  std::vector<DenseLayer> m1(depth), m2(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    m1[l] = {RowMatrix::Zero(layers[l].weights.rows(), layers[l].weights.cols()),
             Eigen::VectorXd::Zero(layers[l].bias.size())};
    m2[l] = m1[l];
  }

  Rng rng(config.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<EpochStats> history;
  long step = 0;
  const auto in_dim = static_cast<Eigen::Index>(model.input_dim());
  const int classes = model.class_count();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int correct = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      const auto batch = static_cast<Eigen::Index>(end - begin);
      Eigen::MatrixXd x(in_dim, batch);
      for (Eigen::Index b = 0; b < batch; ++b) {
        const auto& im = data.images[order[begin + static_cast<std::size_t>(b)]];
        x.col(b) = Eigen::Map<const Eigen::VectorXd>(im.data.data(), in_dim);
      }
      std::vector<Eigen::MatrixXd> acts{x};
      std::vector<Eigen::MatrixXd> pre;
      for (std::size_t l = 0; l < depth; ++l) {
        Eigen::MatrixXd z = layers[l].weights * acts.back();
        z.colwise() += layers[l].bias;
        pre.push_back(z);
        if (l + 1 < depth) acts.push_back(z.cwiseMax(0.0));
      }
      Eigen::MatrixXd g = pre.back();
      for (Eigen::Index b = 0; b < batch; ++b) {
        const int y = data.labels[order[begin + static_cast<std::size_t>(b)]];
        auto col = g.col(b);
        const double mx = col.maxCoeff();
        Eigen::Index best = 0;
        for (Eigen::Index k = 1; k < classes; ++k) {
          if (col[k] > col[best]) best = k;
        }
        correct += best == y;
        Eigen::VectorXd e = (col.array() - mx).exp();
        const double s = e.sum();
        loss_sum += mx + std::log(s) - col[y];
        col = e / s;
        col[y] -= 1.0;
      }
      g /= static_cast<double>(batch);

      ++step;
      for (std::size_t l = depth; l-- > 0;) {
        RowMatrix dw = g * acts[l].transpose();
        Eigen::VectorXd db = g.rowwise().sum();
        if (l > 0) {
          g = layers[l].weights.transpose() * g;
          g = (pre[l - 1].array() > 0.0).select(g, 0.0);
        }
        if (config.optimizer == Optimizer::sgd) {
          layers[l].weights -= config.learning_rate * dw;
          layers[l].bias -= config.learning_rate * db;
        } else {
          const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
          const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
          m1[l].weights = config.beta1 * m1[l].weights + (1.0 - config.beta1) * dw;
          m2[l].weights = config.beta2 * m2[l].weights + (1.0 - config.beta2) * dw.cwiseAbs2();
          m1[l].bias = config.beta1 * m1[l].bias + (1.0 - config.beta1) * db;
          m2[l].bias = config.beta2 * m2[l].bias + (1.0 - config.beta2) * db.cwiseAbs2();
          layers[l].weights.array() -= config.learning_rate * (m1[l].weights.array() / c1) /
                                       ((m2[l].weights.array() / c2).sqrt() + config.adam_eps);
          layers[l].bias.array() -= config.learning_rate * (m1[l].bias.array() / c1) /
                                    ((m2[l].bias.array() / c2).sqrt() + config.adam_eps);
        }
      }
      if (!model.all_finite()) throw DomainError("training produced non-finite weights");
    }
    history.push_back({loss_sum / static_cast<double>(data.size()),
                       static_cast<double>(correct) / static_cast<double>(data.size())});
  }
  return history;
}

EvalReport evaluate_predictions(std::span<const int> predictions, std::span<const int> labels,
                                int class_count) {
  if (labels.empty()) throw DomainError("cannot evaluate an empty set");
  if (predictions.size() != labels.size()) throw DimensionError("predictions and labels differ in count");
  EvalReport r;
  std::vector<int> hits(static_cast<std::size_t>(class_count), 0);
  r.class_counts.assign(static_cast<std::size_t>(class_count), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || y >= class_count) throw DomainError("label outside [0, L)");
    ++r.class_counts[static_cast<std::size_t>(y)];
    if (predictions[i] == y) {
      ++hits[static_cast<std::size_t>(y)];
      ++r.correct;
    }
  }
  r.total = static_cast<int>(labels.size());
  for (int c = 0; c < class_count; ++c) {
    const auto n = r.class_counts[static_cast<std::size_t>(c)];
    r.per_class_accuracy.push_back(n > 0 ? static_cast<double>(hits[static_cast<std::size_t>(c)]) / n
                                         : std::nan(""));
  }
  r.overall = static_cast<double>(r.correct) / r.total;
  return r;
}

EvalReport evaluate(const Classifier& model, const LabeledSet& data) {
  std::vector<int> preds;
  preds.reserve(data.size());
  for (const auto& im : data.images) preds.push_back(predict(model, im));
  return evaluate_predictions(preds, data.labels, model.class_count());
}

void save_model(const std::filesystem::path& path, const Classifier& model) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  nlohmann::ordered_json header;
  header["format"] = "semcex-mlp";
  header["version"] = kModelFormatVersion;
  header["widths"] = model.widths();
  header["classes"] = model.class_count();
  header["seed"] = model.seed();
  header["parameter_count"] = model.parameter_count();
  header["encoding"] = "f64-le";
  os << header.dump() << '\n';
  for (double v : model.flat_parameters()) put_le(os, v);
  if (!os) throw IoError("failed writing " + path.string());
}

Classifier load_model(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingInputError(path.string());
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(is, line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": malformed model header: " + e.what());
  }
  if (header.value("format", "") != "semcex-mlp") throw IoError(path.string() + " is not a model file");
  if (header.value("version", 0) != kModelFormatVersion) {
    throw IoError(path.string() + ": unsupported model format version");
  }
  const auto widths = header.at("widths").get<std::vector<int>>();
  Classifier model = Classifier::zeros(widths, header.value("seed", std::uint64_t{0}));
  std::vector<unsigned char> blob(model.parameter_count() * 8);
  is.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  if (static_cast<std::size_t>(is.gcount()) != blob.size()) throw IoError(path.string() + ": truncated weights");
  std::vector<double> flat(model.parameter_count());
  for (std::size_t i = 0; i < flat.size(); ++i) flat[i] = get_le(blob.data() + 8 * i);
  model.set_flat_parameters(flat);
  return model;
}

}  // namespace semcex
