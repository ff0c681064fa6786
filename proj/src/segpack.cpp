#include "proxyseg/segpack.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "proxyseg/byte_io.hpp"
#include "proxyseg/errors.hpp"
#include "proxyseg/rng.hpp"

namespace proxyseg {
namespace {

constexpr char kMagic[4] = {'S', 'E', 'G', 'P'};
constexpr std::uint64_t kSceneTag = 0x5ce4e;
constexpr std::uint64_t kRenderTag = 0x4e4de4;

}  // namespace

std::size_t SegPack::size() const noexcept {
  return plane() == 0 ? 0 : labels.size() / plane();
}

std::size_t SegPack::encoded_bytes() const noexcept {
  return kHeaderBytes + size() * (plane() + 4 * static_cast<std::size_t>(channels) * plane());
}

Sample SegPack::sample(std::size_t index) const {
  if (index >= size()) throw Error("SegPack::sample: index " + std::to_string(index) + " out of range");
  Sample s;
  s.channels = channels;
  s.height = height;
  s.width = width;
  const std::size_t img = static_cast<std::size_t>(channels) * plane();
  s.image.assign(images.begin() + static_cast<std::ptrdiff_t>(index * img),
                 images.begin() + static_cast<std::ptrdiff_t>((index + 1) * img));
  s.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(index * plane()),
                  labels.begin() + static_cast<std::ptrdiff_t>((index + 1) * plane()));
  return s;
}

void SegPack::append(const Sample& s) {
  if (s.channels != channels || s.height != height || s.width != width) {
    throw ShapeError("SegPack::append: sample geometry does not match pack");
  }
  images.insert(images.end(), s.image.begin(), s.image.end());
  labels.insert(labels.end(), s.labels.begin(), s.labels.end());
}

bool SegPack::operator==(const SegPack& other) const {
  return channels == other.channels && height == other.height && width == other.width &&
         num_classes == other.num_classes && labels == other.labels && images.size() == other.images.size() &&
         std::memcmp(images.data(), other.images.data(), images.size() * sizeof(float)) == 0;
}

SegPack generate_pack(const SceneSpec& spec, const DomainParams& params, std::size_t count, std::uint64_t seed) {
  spec.validate();
  params.validate(spec.num_classes);
  if (count == 0) throw ConfigError("generate_pack: count must be at least 1");
  SegPack pack;
  pack.channels = 3;
  pack.height = static_cast<std::uint16_t>(spec.height);
  pack.width = static_cast<std::uint16_t>(spec.width);
  pack.num_classes = static_cast<std::uint16_t>(spec.num_classes);
  pack.labels.reserve(count * pack.plane());
  pack.images.reserve(count * 3 * pack.plane());
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t image_seed = mix_seed(seed, i);
    RngStream scene_rng(mix_seed(image_seed, kSceneTag));
    RngStream render_rng(mix_seed(image_seed, kRenderTag));
    const LabelMap labels = generate_scene(spec, scene_rng);
    const auto pixels = render(labels, params, render_rng);
    pack.labels.insert(pack.labels.end(), labels.values.begin(), labels.values.end());
    pack.images.insert(pack.images.end(), pixels.begin(), pixels.end());
  }
  return pack;
}

std::vector<std::uint8_t> encode_segpack(const SegPack& pack) {
  const std::size_t n = pack.size();
  const std::size_t img = static_cast<std::size_t>(pack.channels) * pack.plane();
  if (pack.labels.size() != n * pack.plane() || pack.images.size() != n * img) {
    throw ShapeError("encode_segpack: label and image arrays disagree on the image count");
  }
  ByteWriter out;
  out.bytes(kMagic, 4);
  out.u16(SegPack::kVersion);
  out.u32(static_cast<std::uint32_t>(n));
  out.u16(pack.channels);
  out.u16(pack.height);
  out.u16(pack.width);
  out.u16(pack.num_classes);
  for (std::size_t i = 0; i < n; ++i) {
    out.bytes(pack.labels.data() + i * pack.plane(), pack.plane());
    for (std::size_t j = 0; j < img; ++j) out.f32(pack.images[i * img + j]);
  }
  return out.take();
}

SegPack decode_segpack(std::span<const std::uint8_t> bytes) {
  using Kind = FormatError::Kind;
  if (bytes.size() < SegPack::kHeaderBytes) {
    throw FormatError(Kind::truncated, "segpack truncated: expected at least " +
                                           std::to_string(SegPack::kHeaderBytes) + " header bytes, got " +
                                           std::to_string(bytes.size()));
  }
  ByteReader in(bytes);
  char magic[4];
  in.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError(Kind::bad_magic, "segpack: bad magic, expected SEGP");
  const auto version = in.u16();
  if (version != SegPack::kVersion) {
    throw FormatError(Kind::version_mismatch, "segpack: unsupported version " + std::to_string(version));
  }
  const std::size_t n = in.u32();
  SegPack pack;
  pack.channels = in.u16();
  pack.height = in.u16();
  pack.width = in.u16();
  pack.num_classes = in.u16();
  const std::size_t img = static_cast<std::size_t>(pack.channels) * pack.plane();
  const std::size_t expected = SegPack::kHeaderBytes + n * (pack.plane() + 4 * img);
  if (bytes.size() != expected) {
    throw FormatError(Kind::truncated, "segpack length mismatch: expected " + std::to_string(expected) +
                                           " bytes, got " + std::to_string(bytes.size()));
  }
  pack.labels.resize(n * pack.plane());
  pack.images.resize(n * img);
  for (std::size_t i = 0; i < n; ++i) {
    in.bytes(pack.labels.data() + i * pack.plane(), pack.plane());
    for (std::size_t j = 0; j < img; ++j) pack.images[i * img + j] = in.f32();
  }
  for (std::size_t i = 0; i < pack.labels.size(); ++i) {
    const auto y = pack.labels[i];
    if (y != kIgnoreLabel && y >= pack.num_classes) {
      throw FormatError(Kind::bad_label, "segpack: label " + std::to_string(y) + " at pixel " + std::to_string(i) +
                                             " not below K=" + std::to_string(pack.num_classes));
    }
  }
  return pack;
}

void write_segpack(const SegPack& pack, const std::filesystem::path& path) {
  write_file_bytes(path, encode_segpack(pack));
}

SegPack read_segpack(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_segpack(bytes);
}

}  // namespace proxyseg
