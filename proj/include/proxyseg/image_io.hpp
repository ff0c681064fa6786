#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "proxyseg/label_map.hpp"

namespace proxyseg {

// Binary PPM (P6) from interleaved 8-bit RGB.
void write_ppm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               std::span<const std::uint8_t> rgb);
// Binary PGM (P5) from 8-bit gray values.
void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               std::span<const std::uint8_t> gray);

// Fixed display color per class; ignore pixels render black.
std::array<std::uint8_t, 3> class_color(std::uint8_t label);

// One plane of a label map as interleaved RGB.
std::vector<std::uint8_t> colorize(std::span<const std::uint8_t> labels);
// Planar float (3,H,W) image in [0,1] as interleaved RGB.
std::vector<std::uint8_t> to_rgb8(std::span<const float> planar, std::size_t height, std::size_t width);

}  // namespace proxyseg
