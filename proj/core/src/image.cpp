#include "semcex/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "semcex/error.hpp"

namespace semcex {

namespace {

std::uint8_t to_byte(double v) {
  // nearbyint honours the default FE_TONEAREST mode: ties go to even.
  return static_cast<std::uint8_t>(std::nearbyint(std::clamp(v, 0.0, 1.0) * 255.0));
}

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// libpng prints to stderr by default; errors are reported as IoError instead.
void png_error_quiet(png_structp png, png_const_charp) { png_longjmp(png, 1); }
void png_warning_quiet(png_structp, png_const_charp) {}

}  // namespace

Image quantize(const Image& image) {
  Image out = image;
  for (double& v : out.data) v = to_byte(v) / 255.0;
  return out;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("cannot open " + path.string() + " for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_quiet, png_warning_quiet);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  std::vector<std::uint8_t> bytes(image.data.size());
  std::transform(image.data.begin(), image.data.end(), bytes.begin(), to_byte);
  std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
  for (int r = 0; r < image.height; ++r) {
    rows[static_cast<std::size_t>(r)] = bytes.data() + static_cast<std::size_t>(r) * image.width * 3;
  }

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng error while writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
               static_cast<png_uint_32>(image.height), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_png(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingInputError(path.string());
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError("cannot open " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_quiet, png_warning_quiet);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  Image image;
  std::vector<std::uint8_t> bytes;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng error while reading " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  if (png_get_bit_depth(png, info) != 8 || png_get_color_type(png, info) != PNG_COLOR_TYPE_RGB) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(path.string() + " is not an 8-bit RGB PNG");
  }
  const auto w = static_cast<int>(png_get_image_width(png, info));
  const auto h = static_cast<int>(png_get_image_height(png, info));
  bytes.resize(static_cast<std::size_t>(w) * h * 3);
  rows.resize(static_cast<std::size_t>(h));
  for (int r = 0; r < h; ++r) rows[static_cast<std::size_t>(r)] = bytes.data() + static_cast<std::size_t>(r) * w * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  image = Image(h, w);
  std::transform(bytes.begin(), bytes.end(), image.data.begin(),
                 [](std::uint8_t b) { return b / 255.0; });
  return image;
}

Image hstack(std::span<const Image> images, int gap) {
  int height = 0;
  int width = 0;
  for (const auto& im : images) {
    height = std::max(height, im.height);
    width += im.width;
  }
  if (!images.empty()) width += gap * static_cast<int>(images.size() - 1);
  Image out(height, width, 1.0);
  int x0 = 0;
  for (const auto& im : images) {
    for (int r = 0; r < im.height; ++r) {
      for (int c = 0; c < im.width; ++c) {
        for (int ch = 0; ch < Image::channels; ++ch) out.at(r, x0 + c, ch) = im.at(r, c, ch);
      }
    }
    x0 += im.width + gap;
  }
  return out;
}

}  // namespace semcex
