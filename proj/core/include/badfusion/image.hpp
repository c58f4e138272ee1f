#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace badfusion {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Row-major 8-bit RGB image. pixels.size() == width * height * 3.
struct CameraImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  CameraImage() = default;
  CameraImage(int w, int h, Rgb fill = {});

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width && y < height;
  }
  std::size_t offset(int x, int y) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
            static_cast<std::size_t>(x)) * 3;
  }
  Rgb at(int x, int y) const noexcept {
    const auto o = offset(x, y);
    return {pixels[o], pixels[o + 1], pixels[o + 2]};
  }
  void set(int x, int y, Rgb c) noexcept {
    const auto o = offset(x, y);
    pixels[o] = c.r;
    pixels[o + 1] = c.g;
    pixels[o + 2] = c.b;
  }

  friend bool operator==(const CameraImage&, const CameraImage&) = default;
};

// PNG codec (libpng). Decoding accepts gray/palette/alpha/16-bit inputs and
// always yields 8-bit RGB.
CameraImage decode_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const CameraImage& image);
CameraImage read_png(const std::filesystem::path& path);
void write_png(const CameraImage& image, const std::filesystem::path& path);

// Baseline JPEG codec (libjpeg), in memory. quality in [1, 100].
std::vector<std::uint8_t> encode_jpeg(const CameraImage& image, int quality);
CameraImage decode_jpeg(std::span<const std::uint8_t> bytes);

}  // namespace badfusion
