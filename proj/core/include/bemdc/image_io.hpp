#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "bemdc/geometry.hpp"

namespace bemdc {

/// RGB raster, row-major, interleaved. Pixel (i, j) covers image-space
/// [i/w, (i+1)/w] x [j/h, (j+1)/h]; row 0 is y = 0.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0.0) {}

  Rgb at(int i, int j) const {
    const std::size_t o = (static_cast<std::size_t>(j) * width + i) * 3;
    return {data[o], data[o + 1], data[o + 2]};
  }
  void set(int i, int j, const Rgb& c) {
    const std::size_t o = (static_cast<std::size_t>(j) * width + i) * 3;
    data[o] = c(0);
    data[o + 1] = c(1);
    data[o + 2] = c(2);
  }
  static Point2 pixel_center(int i, int j, int w, int h) { return {(i + 0.5) / w, (j + 0.5) / h}; }
};

double srgb_encode(double linear);
double srgb_decode(double encoded);
/// Clamp to [0,1], sRGB-encode and round to a byte.
std::uint8_t to_srgb8(double linear);

/// Clamp to [0,1] followed by the sRGB transfer function.
Image tone_map(const Image& linear);
/// Tone map and quantize to 8-bit levels (values k/255).
Image tone_map_8bit(const Image& linear);

void write_png(const std::filesystem::path& path, const Image& linear);
/// Raw 8-bit values scaled to [0,1] (no transfer function applied).
Image read_png_encoded(const std::filesystem::path& path);
/// 8-bit PNG decoded from sRGB to linear.
Image read_png_linear(const std::filesystem::path& path);
/// Portable float map (PF, RGB), already linear.
Image read_pfm(const std::filesystem::path& path);
/// Dispatches on extension: .png (sRGB) or .pfm (linear float).
Image read_image_linear(const std::filesystem::path& path);

/// Bilinear lookup at an image-space position with clamp-to-edge.
Rgb bilinear(const Image& image, const Point2& p);

/// Root mean square over all channel-pixels. Throws on size mismatch.
double rmse(const Image& a, const Image& b);
double mean_abs_difference(const Image& a, const Image& b);
Image box_downsample(const Image& image, int factor);

}  // namespace bemdc
