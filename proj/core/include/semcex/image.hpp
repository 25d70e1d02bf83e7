#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace semcex {

/// Row-major H x W x 3 float image. Renderer outputs lie in [0, 1]; the same
/// type carries image-shaped gradients, which are unbounded.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  static constexpr int channels = 3;

  Image() = default;
  Image(int h, int w, double fill = 0.0)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w * channels, fill) {}

  std::size_t size() const noexcept { return data.size(); }
  std::size_t index(int row, int col, int ch) const noexcept {
    return (static_cast<std::size_t>(row) * width + col) * channels + ch;
  }
  double& at(int row, int col, int ch) noexcept { return data[index(row, col, ch)]; }
  double at(int row, int col, int ch) const noexcept { return data[index(row, col, ch)]; }

  std::span<const double> pixels() const noexcept { return data; }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Rounds every value to the nearest multiple of 1/255 (ties to even), the
/// values an 8-bit PNG round trip reproduces.
Image quantize(const Image& image);

/// 8-bit RGB PNG. Values are clamped to [0,1], scaled by 255 and rounded half
/// to even. Creates missing parent directories. Throws IoError.
void write_png(const std::filesystem::path& path, const Image& image);
/// Reads an 8-bit RGB PNG (value / 255). Throws MissingInputError / IoError.
Image read_png(const std::filesystem::path& path);

/// Places images left to right on a common canvas (gallery pairs).
Image hstack(std::span<const Image> images, int gap = 2);

}  // namespace semcex
