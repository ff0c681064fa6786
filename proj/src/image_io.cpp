#include "proxyseg/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "proxyseg/byte_io.hpp"

namespace proxyseg {
namespace {

void write_netpbm(const std::filesystem::path& path, const char* magic, std::size_t width, std::size_t height,
                  std::span<const std::uint8_t> pixels) {
  const std::string header =
      std::string(magic) + "\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), pixels.begin(), pixels.end());
  write_file_bytes(path, bytes);
}

constexpr std::array<std::array<std::uint8_t, 3>, 8> kPalette{{
    {40, 40, 40},
    {128, 64, 128},
    {220, 20, 60},
    {0, 180, 0},
    {250, 170, 30},
    {0, 90, 230},
    {190, 190, 190},
    {120, 220, 220},
}};

}  // namespace

void write_ppm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               std::span<const std::uint8_t> rgb) {
  if (rgb.size() != 3 * width * height) throw ShapeError("write_ppm: pixel count does not match size");
  write_netpbm(path, "P6", width, height, rgb);
}

void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               std::span<const std::uint8_t> gray) {
  if (gray.size() != width * height) throw ShapeError("write_pgm: pixel count does not match size");
  write_netpbm(path, "P5", width, height, gray);
}

std::array<std::uint8_t, 3> class_color(std::uint8_t label) {
  if (label == kIgnoreLabel) return {0, 0, 0};
  return kPalette[label % kPalette.size()];
}

std::vector<std::uint8_t> colorize(std::span<const std::uint8_t> labels) {
  std::vector<std::uint8_t> rgb;
  rgb.reserve(3 * labels.size());
  for (auto l : labels) {
    const auto c = class_color(l);
    rgb.insert(rgb.end(), c.begin(), c.end());
  }
  return rgb;
}

std::vector<std::uint8_t> to_rgb8(std::span<const float> planar, std::size_t height, std::size_t width) {
  const std::size_t plane = height * width;
  if (planar.size() != 3 * plane) throw ShapeError("to_rgb8: expected a 3-channel image");
  std::vector<std::uint8_t> rgb(3 * plane);
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < 3; ++c) {
      const float v = std::clamp(planar[c * plane + p], 0.0f, 1.0f);
      rgb[3 * p + c] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
  }
  return rgb;
}

}  // namespace proxyseg
