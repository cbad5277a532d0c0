#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "hdnet/data.hpp"
#include "hdnet/error.hpp"

namespace hdnet {

namespace {

struct PngImage {
  png_image image;
  PngImage() {
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&image); }
  PngImage(const PngImage&) = delete;
  PngImage& operator=(const PngImage&) = delete;
};

std::vector<std::uint8_t> read_png(const std::string& path, std::uint32_t format, std::size_t& h,
                                   std::size_t& w) {
  PngImage png;
  if (!png_image_begin_read_from_file(&png.image, path.c_str())) {
    throw IoError("cannot read PNG '" + path + "': " + png.image.message);
  }
  png.image.format = format;
  std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(png.image));
  if (!png_image_finish_read(&png.image, nullptr, bytes.data(), 0, nullptr)) {
    throw IoError("malformed PNG '" + path + "': " + png.image.message);
  }
  h = png.image.height;
  w = png.image.width;
  return bytes;
}

void write_png(const std::string& path, std::uint32_t format, std::size_t h, std::size_t w,
               const std::vector<std::uint8_t>& bytes) {
  PngImage png;
  png.image.width = static_cast<png_uint_32>(w);
  png.image.height = static_cast<png_uint_32>(h);
  png.image.format = format;
  if (!png_image_write_to_file(&png.image, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    throw IoError("cannot write PNG '" + path + "': " + png.image.message);
  }
}

}  // namespace

std::uint8_t quantize_unit(double v) {
  const double scaled = std::floor(255.0 * std::clamp(v, 0.0, 1.0) + 0.5);
  return static_cast<std::uint8_t>(scaled);
}

void save_image(const std::string& path, const Tensor& image) {
  if (image.rank() != 4 || image.dim(0) != 1 || image.dim(1) != 3) {
    throw DimensionError("save_image: expected [1,3,H,W], got " + shape_string(image.shape()));
  }
  const std::size_t h = image.dim(2), w = image.dim(3);
  std::vector<std::uint8_t> bytes(h * w * 3);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        bytes[(y * w + x) * 3 + c] = quantize_unit(image.at(0, c, y, x));
  write_png(path, PNG_FORMAT_RGB, h, w, bytes);
}

Tensor load_image(const std::string& path) {
  std::size_t h = 0, w = 0;
  const auto bytes = read_png(path, PNG_FORMAT_RGB, h, w);
  Tensor img({1, 3, h, w}, 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        img.at(0, c, y, x) = static_cast<double>(bytes[(y * w + x) * 3 + c]) / 255.0;
  return img;
}

void save_mask(const std::string& path, const Mask& mask) {
  const std::size_t h = mask.height(), w = mask.width();
  std::vector<std::uint8_t> bytes(h * w);
  for (std::size_t i = 0; i < h * w; ++i) bytes[i] = mask.values().data()[i] == 1.0 ? 255 : 0;
  write_png(path, PNG_FORMAT_GRAY, h, w, bytes);
}

Mask load_mask(const std::string& path) {
  std::size_t h = 0, w = 0;
  const auto bytes = read_png(path, PNG_FORMAT_GRAY, h, w);
  Tensor gray({1, 1, h, w}, 0.0);
  for (std::size_t i = 0; i < h * w; ++i) gray.data()[i] = bytes[i] >= 128 ? 1.0 : 0.0;
  return Mask(std::move(gray));
}

Mask mask_binarize(const Tensor& gray) {
  if (gray.rank() != 4 || gray.dim(0) != 1 || gray.dim(1) != 1) {
    throw DimensionError("mask_binarize: expected [1,1,H,W], got " + shape_string(gray.shape()));
  }
  Tensor out(gray.shape(), 0.0);
  for (std::size_t i = 0; i < gray.numel(); ++i) out.data()[i] = gray.data()[i] >= 0.5 ? 1.0 : 0.0;
  return Mask(std::move(out));
}

}  // namespace hdnet
