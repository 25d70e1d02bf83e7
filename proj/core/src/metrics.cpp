#include "semcex/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "semcex/error.hpp"

namespace semcex {

void RealismConfig::validate() const {
  if (levels < 1) throw ConfigError("realism pyramid needs at least one level");
  if (!(d_max > 0.0)) throw ConfigError("realism d_max must be positive");
}

namespace {

constexpr double kStdFloor = 1e-6;

Image downsample(const Image& im) {
  Image out(std::max(im.height / 2, 1), std::max(im.width / 2, 1));
  for (int r = 0; r < out.height; ++r) {
    for (int c = 0; c < out.width; ++c) {
      for (int ch = 0; ch < Image::channels; ++ch) {
        double sum = 0.0;
        int n = 0;
        for (int dr = 0; dr < 2; ++dr) {
          for (int dc = 0; dc < 2; ++dc) {
            const int rr = 2 * r + dr;
            const int cc = 2 * c + dc;
            if (rr < im.height && cc < im.width) {
              sum += im.at(rr, cc, ch);
              ++n;
            }
          }
        }
        out.at(r, c, ch) = sum / n;
      }
    }
  }
  return out;
}

double level_distance(const Image& a, const Image& b) {
  const std::size_t pixels = static_cast<std::size_t>(a.height) * a.width;
  double sq = 0.0;
  for (int ch = 0; ch < Image::channels; ++ch) {
    double mean = 0.0;
    for (std::size_t i = 0; i < pixels; ++i) mean += a.data[3 * i + ch] + b.data[3 * i + ch];
    mean /= static_cast<double>(2 * pixels);
    double var = 0.0;
    for (std::size_t i = 0; i < pixels; ++i) {
      const double da = a.data[3 * i + ch] - mean;
      const double db = b.data[3 * i + ch] - mean;
      var += da * da + db * db;
    }
    const double sd = std::max(std::sqrt(var / static_cast<double>(2 * pixels)), kStdFloor);
    for (std::size_t i = 0; i < pixels; ++i) {
      const double d = (a.data[3 * i + ch] - b.data[3 * i + ch]) / sd;
      sq += d * d;
    }
  }
  return std::sqrt(sq / static_cast<double>(3 * pixels));
}

double entropy_nats(std::span<const double> p) {
  double e = 0.0;
  for (double v : p) {
    if (v > 0.0) e -= v * std::log(v);
  }
  return e;
}

std::string format_value(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

RealismConfig calibrate_realism(int levels, int height, int width) {
  RealismConfig cfg{levels, 1.0};
  cfg.validate();
  cfg.d_max = perceptual_distance(Image(height, width, 0.0), Image(height, width, 1.0), cfg);
  return cfg;
}

double perceptual_distance(const Image& a, const Image& b, const RealismConfig& config) {
  config.validate();
  if (a.height != b.height || a.width != b.width) throw DimensionError("images differ in size");
  Image la = a;
  Image lb = b;
  double total = 0.0;
  for (int level = 0; level < config.levels; ++level) {
    if (level > 0) {
      la = downsample(la);
      lb = downsample(lb);
    }
    total += level_distance(la, lb);
  }
  return total / config.levels;
}

double realism_from_distance(double distance, double d_max) {
  return std::clamp(1.0 - distance / d_max, 0.0, 1.0);
}

double realism(const Image& perturbed, const Image& reference, const RealismConfig& config) {
  return realism_from_distance(perceptual_distance(perturbed, reference, config), config.d_max);
}

std::string to_string(Membership mode) {
  return mode == Membership::binary ? "binary" : "fractional";
}

Membership parse_membership(const std::string& text) {
  if (text == "binary") return Membership::binary;
  if (text == "fractional") return Membership::fractional;
  throw ConfigError("unknown membership '" + text + "'");
}

std::vector<double> membership_from_logits(std::span<const double> logits, Membership mode) {
  if (mode == Membership::fractional) return softmax(logits);
  std::vector<double> mu(logits.size(), 0.0);
  mu[static_cast<std::size_t>(argmax(logits))] = 1.0;
  return mu;
}

std::vector<double> membership(const Classifier& model, const Image& image, Membership mode) {
  return membership_from_logits(forward(model, image), mode);
}

InfoWorthReport information_worth(std::span<const WorthPoint> points, int class_count,
                                  Membership mode, bool realism_weighted) {
  if (points.empty()) throw DomainError("information worth of an empty set");
  if (class_count < 1) throw DomainError("class count must be positive");
  const auto L = static_cast<std::size_t>(class_count);
  InfoWorthReport r;
  r.class_count = class_count;
  r.mode = mode;
  r.realism_weighted = realism_weighted;
  std::vector<std::vector<double>> joint(L, std::vector<double>(L, 0.0));
  for (const auto& pt : points) {
    if (!(pt.realism >= 0.0 && pt.realism <= 1.0)) throw DomainError("realism outside [0,1]");
    if (pt.label < 0 || pt.label >= class_count) throw DomainError("label outside [0, L)");
    if (pt.membership.size() != L) throw DimensionError("membership vector has wrong length");
    const double w = realism_weighted ? pt.realism : 1.0;
    for (std::size_t i = 0; i < L; ++i) {
      joint[i][static_cast<std::size_t>(pt.label)] += w * pt.membership[i];
    }
  }
  r.p.assign(L, std::vector<double>(L, 0.0));
  r.mass.assign(L, 0.0);
  r.gamma.assign(L, 0.0);
  r.entropy.assign(L, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < L; ++i) {
    r.mass[i] = std::accumulate(joint[i].begin(), joint[i].end(), 0.0);
    total += r.mass[i];
  }
  for (std::size_t i = 0; i < L; ++i) {
    if (r.mass[i] > 0.0) {
      for (std::size_t j = 0; j < L; ++j) r.p[i][j] = joint[i][j] / r.mass[i];
      r.entropy[i] = entropy_nats(r.p[i]);
    }
    r.gamma[i] = total > 0.0 ? r.mass[i] / total : 0.0;
    r.worth += r.gamma[i] * r.entropy[i];
  }
  return r;
}

std::string Table::to_csv() const {
  std::ostringstream os;
  for (const auto& [k, v] : meta) os << "# " << k << '=' << v << '\n';
  os << row_header;
  for (const auto& c : columns) os << ',' << c;
  os << '\n';
  for (std::size_t r = 0; r < row_names.size(); ++r) {
    os << row_names[r];
    for (double v : values[r]) os << ',' << format_value(v);
    os << '\n';
  }
  return os.str();
}

std::string Table::to_markdown() const {
  std::ostringstream os;
  if (!title.empty()) os << "### " << title << "\n\n";
  for (const auto& [k, v] : meta) os << "- " << k << ": " << v << '\n';
  if (!meta.empty()) os << '\n';
  os << "| " << row_header;
  for (const auto& c : columns) os << " | " << c;
  os << " |\n|---";
  for (std::size_t i = 0; i < columns.size(); ++i) os << "|---";
  os << "|\n";
  for (std::size_t r = 0; r < row_names.size(); ++r) {
    os << "| " << row_names[r];
    for (double v : values[r]) os << " | " << format_value(v);
    os << " |\n";
  }
  return os.str();
}

Table Table::from_csv(const std::string& text) {
  Table t;
  std::istringstream is(text);
  std::string line;
  bool header = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto body = line.substr(line.find_first_not_of("# "));
      const auto eq = body.find('=');
      t.meta.emplace_back(body.substr(0, eq), eq == std::string::npos ? "" : body.substr(eq + 1));
      continue;
    }
    auto cells = split_csv_line(line);
    if (header) {
      t.row_header = cells.front();
      t.columns.assign(cells.begin() + 1, cells.end());
      header = false;
      continue;
    }
    if (cells.size() != t.columns.size() + 1) throw DomainError("ragged CSV row: " + line);
    t.row_names.push_back(cells.front());
    std::vector<double> row;
    for (std::size_t i = 1; i < cells.size(); ++i) {
      row.push_back(cells[i] == "nan" ? std::nan("") : std::stod(cells[i]));
    }
    t.values.push_back(std::move(row));
  }
  return t;
}

double Table::at(const std::string& row, const std::string& column) const {
  const auto r = std::find(row_names.begin(), row_names.end(), row);
  const auto c = std::find(columns.begin(), columns.end(), column);
  if (r == row_names.end() || c == columns.end()) {
    throw DomainError("no table cell (" + row + ", " + column + ")");
  }
  return values[static_cast<std::size_t>(r - row_names.begin())][static_cast<std::size_t>(c - columns.begin())];
}

Table accuracy_degradation_table(int class_count,
                                 const std::vector<std::pair<std::string, EvalReport>>& rows) {
  Table t;
  t.title = "Accuracy under semantic perturbation";
  t.row_header = "strategy";
  for (int c = 0; c < class_count; ++c) t.columns.push_back("class_" + std::to_string(c));
  t.columns.emplace_back("overall");
  for (const auto& [name, report] : rows) {
    if (static_cast<int>(report.per_class_accuracy.size()) != class_count) {
      throw DimensionError("report for '" + name + "' has a different class count");
    }
    t.row_names.push_back(name);
    std::vector<double> row = report.per_class_accuracy;
    row.push_back(report.overall);
    t.values.push_back(std::move(row));
  }
  return t;
}

}  // namespace semcex
