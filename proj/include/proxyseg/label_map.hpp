#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace proxyseg {

inline constexpr std::uint8_t kIgnoreLabel = 255;

/// Per-pixel class ids for a stack of images, laid out (batch, height, width).
/// `kIgnoreLabel` marks pixels that carry no supervision.
struct LabelMap {
  std::size_t batch = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> values;

  LabelMap() = default;
  LabelMap(std::size_t n, std::size_t h, std::size_t w, std::uint8_t fill = 0)
      : batch(n), height(h), width(w), values(n * h * w, fill) {}

  std::size_t plane_size() const noexcept { return height * width; }
  std::size_t size() const noexcept { return values.size(); }

  std::uint8_t& at(std::size_t n, std::size_t y, std::size_t x) { return values[(n * height + y) * width + x]; }
  std::uint8_t at(std::size_t n, std::size_t y, std::size_t x) const { return values[(n * height + y) * width + x]; }

  std::span<std::uint8_t> plane(std::size_t n) { return std::span(values).subspan(n * plane_size(), plane_size()); }
  std::span<const std::uint8_t> plane(std::size_t n) const {
    return std::span(values).subspan(n * plane_size(), plane_size());
  }

  bool same_geometry(const LabelMap& other) const noexcept {
    return batch == other.batch && height == other.height && width == other.width;
  }

  bool operator==(const LabelMap&) const = default;
};

/// Per-pixel retention flags (true = the pixel's gradient is kept), laid out
/// (batch, height, width).
struct PixelMask {
  std::size_t batch = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> values;

  PixelMask() = default;
  PixelMask(std::size_t n, std::size_t h, std::size_t w, bool fill = false)
      : batch(n), height(h), width(w), values(n * h * w, fill ? 1 : 0) {}

  std::size_t size() const noexcept { return values.size(); }
  bool operator[](std::size_t i) const { return values[i] != 0; }
  void set(std::size_t i, bool v) { values[i] = v ? 1 : 0; }

  std::size_t count() const noexcept {
    std::size_t c = 0;
    for (auto v : values) c += v != 0;
    return c;
  }

  bool same_geometry(const PixelMask& other) const noexcept {
    return batch == other.batch && height == other.height && width == other.width;
  }
  bool same_geometry(const LabelMap& labels) const noexcept {
    return batch == labels.batch && height == labels.height && width == labels.width;
  }

  PixelMask operator!() const {
    PixelMask out = *this;
    for (auto& v : out.values) v = v ? 0 : 1;
    return out;
  }

  bool operator==(const PixelMask&) const = default;
};

}  // namespace proxyseg
