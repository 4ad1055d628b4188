#include "bemdc/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>

#include <png.h>

namespace bemdc {

double srgb_encode(double linear) {
  if (linear <= 0.0031308) return 12.92 * linear;
  return 1.055 * std::pow(linear, 1.0 / 2.4) - 0.055;
}

double srgb_decode(double encoded) {
  if (encoded <= 0.04045) return encoded / 12.92;
  return std::pow((encoded + 0.055) / 1.055, 2.4);
}

std::uint8_t to_srgb8(double linear) {
  const double e = srgb_encode(std::clamp(linear, 0.0, 1.0));
  return static_cast<std::uint8_t>(std::lround(e * 255.0));
}

Image tone_map(const Image& linear) {
  Image out = linear;
  for (double& v : out.data) v = srgb_encode(std::clamp(v, 0.0, 1.0));
  return out;
}

Image tone_map_8bit(const Image& linear) {
  Image out = linear;
  for (double& v : out.data) v = to_srgb8(v) / 255.0;
  return out;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_png(const std::filesystem::path& path, const Image& linear) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw std::runtime_error("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng initialization failed");
  }
  std::vector<std::uint8_t> bytes(linear.data.size());
  std::transform(linear.data.begin(), linear.data.end(), bytes.begin(), to_srgb8);
  std::vector<png_bytep> rows(static_cast<std::size_t>(linear.height));
  for (int j = 0; j < linear.height; ++j) rows[j] = bytes.data() + static_cast<std::size_t>(j) * linear.width * 3;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(linear.width), static_cast<png_uint_32>(linear.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_sRGB(png, info, PNG_sRGB_INTENT_PERCEPTUAL);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_png_encoded(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw std::runtime_error("cannot read PNG " + path.string() + ": " + image.message);
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, bytes.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw std::runtime_error("cannot decode PNG " + path.string() + ": " + msg);
  }
  Image out(static_cast<int>(image.width), static_cast<int>(image.height));
  std::transform(bytes.begin(), bytes.end(), out.data.begin(), [](std::uint8_t b) { return b / 255.0; });
  return out;
}

Image read_png_linear(const std::filesystem::path& path) {
  Image out = read_png_encoded(path);
  for (double& v : out.data) v = srgb_decode(v);
  return out;
}

Image read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string magic;
  int w = 0, h = 0;
  double scale = 0.0;
  in >> magic >> w >> h >> scale;
  in.get();
  if (magic != "PF" || w <= 0 || h <= 0 || scale == 0.0)
    throw std::runtime_error(path.string() + ": not an RGB portable float map");
  const bool little = scale < 0.0;
  std::vector<float> raw(static_cast<std::size_t>(w) * h * 3);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(float)));
  if (!in) throw std::runtime_error(path.string() + ": truncated pixel data");
  const bool host_little = std::endian::native == std::endian::little;
  if (little != host_little) {
    for (float& f : raw) {
      auto* b = reinterpret_cast<unsigned char*>(&f);
      std::reverse(b, b + sizeof(float));
    }
  }
  // PFM stores the bottom row first.
  Image out(w, h);
  for (int j = 0; j < h; ++j)
    for (int i = 0; i < w; ++i)
      for (int c = 0; c < 3; ++c)
        out.data[(static_cast<std::size_t>(j) * w + i) * 3 + c] =
            raw[(static_cast<std::size_t>(h - 1 - j) * w + i) * 3 + c];
  return out;
}

Image read_image_linear(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return read_png_linear(path);
  if (ext == ".pfm") return read_pfm(path);
  throw std::runtime_error("unsupported raster format: " + path.string());
}

Rgb bilinear(const Image& image, const Point2& p) {
  const double fx = std::clamp(p.x() * image.width - 0.5, 0.0, image.width - 1.0);
  const double fy = std::clamp(p.y() * image.height - 0.5, 0.0, image.height - 1.0);
  const int i0 = static_cast<int>(std::floor(fx));
  const int j0 = static_cast<int>(std::floor(fy));
  const int i1 = std::min(i0 + 1, image.width - 1);
  const int j1 = std::min(j0 + 1, image.height - 1);
  const double tx = fx - i0;
  const double ty = fy - j0;
  return (1 - ty) * ((1 - tx) * image.at(i0, j0) + tx * image.at(i1, j0)) +
         ty * ((1 - tx) * image.at(i0, j1) + tx * image.at(i1, j1));
}

double rmse(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height)
    throw std::invalid_argument("rmse: resolution mismatch (" + std::to_string(a.width) + "x" +
                                std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                                std::to_string(b.height) + ")");
  double sum = 0.0;
  for (std::size_t k = 0; k < a.data.size(); ++k) {
    const double d = a.data[k] - b.data[k];
    sum += d * d;
  }
  return a.data.empty() ? 0.0 : std::sqrt(sum / static_cast<double>(a.data.size()));
}

double mean_abs_difference(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) throw std::invalid_argument("mean_abs_difference: size mismatch");
  double sum = 0.0;
  for (std::size_t k = 0; k < a.data.size(); ++k) sum += std::abs(a.data[k] - b.data[k]);
  return a.data.empty() ? 0.0 : sum / static_cast<double>(a.data.size());
}

Image box_downsample(const Image& image, int factor) {
  if (factor < 1 || image.width % factor || image.height % factor)
    throw std::invalid_argument("box_downsample: factor must divide the image size");
  Image out(image.width / factor, image.height / factor);
  const double norm = 1.0 / (factor * factor);
  for (int j = 0; j < out.height; ++j)
    for (int i = 0; i < out.width; ++i) {
      Rgb sum = Rgb::Zero();
      for (int dj = 0; dj < factor; ++dj)
        for (int di = 0; di < factor; ++di) sum += image.at(i * factor + di, j * factor + dj);
      out.set(i, j, sum * norm);
    }
  return out;
}

}  // namespace bemdc
