#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "proxyseg/synth_data.hpp"

namespace proxyseg {

/// In-memory image/label dataset, stored on disk in the SEGP format:
///
///   "SEGP" | version u16 | N u32 | C u16 | H u16 | W u16 | K u16
///   N records of: H*W label bytes (255 = ignore), C*H*W float32
///
/// All integers and floats little-endian. Header size is 18 bytes.
struct SegPack {
  static constexpr std::uint16_t kVersion = 1;
  static constexpr std::size_t kHeaderBytes = 18;

  std::uint16_t channels = 3;
  std::uint16_t height = 0;
  std::uint16_t width = 0;
  std::uint16_t num_classes = 0;
  std::vector<std::uint8_t> labels;
  std::vector<float> images;

  std::size_t size() const noexcept;
  std::size_t plane() const noexcept { return static_cast<std::size_t>(height) * width; }
  std::size_t encoded_bytes() const noexcept;

  Sample sample(std::size_t index) const;
  void append(const Sample& sample);

  bool operator==(const SegPack& other) const;
};

/// Pack of `count` scenes rendered under `params`. Image i draws its
/// geometry from (seed, i) alone, so packs that share spec and seed share
/// their label arrays regardless of appearance.
SegPack generate_pack(const SceneSpec& spec, const DomainParams& params, std::size_t count, std::uint64_t seed);

std::vector<std::uint8_t> encode_segpack(const SegPack& pack);
SegPack decode_segpack(std::span<const std::uint8_t> bytes);

void write_segpack(const SegPack& pack, const std::filesystem::path& path);
SegPack read_segpack(const std::filesystem::path& path);

}  // namespace proxyseg
