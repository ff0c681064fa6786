#include "proxyseg/checkpoint.hpp"

#include <cstdio>
#include <limits>

#include "proxyseg/byte_io.hpp"

namespace proxyseg {
namespace {

constexpr char kMagic[4] = {'S', 'G', 'C', 'K'};

void write_tensor(ByteWriter& w, const std::string& name, const Tensor& t) {
  w.str16(name);
  w.u8(static_cast<std::uint8_t>(t.rank()));
  for (std::size_t d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
  for (float v : t.data()) w.f32(v);
}

void read_tensor(ByteReader& r, const std::string& expected_name, Tensor& into) {
  const auto name = r.str16();
  if (name != expected_name) {
    throw FormatError(FormatError::Kind::shape_mismatch,
                      "checkpoint: expected tensor " + expected_name + ", found " + name);
  }
  const std::size_t rank = r.u8();
  Shape shape(rank);
  for (auto& d : shape) d = r.u32();
  if (shape != into.shape()) {
    throw FormatError(FormatError::Kind::shape_mismatch, "checkpoint: tensor " + name + " has shape " +
                                                             shape_to_string(shape) + ", config implies " +
                                                             shape_to_string(into.shape()));
  }
  for (float& v : into.data()) v = r.f32();
}

std::uint16_t narrow16(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint16_t>::max()) throw ConfigError(std::string("checkpoint: ") + what + " too large");
  return static_cast<std::uint16_t>(v);
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const SegNet& model, const RunState& state) {
  ByteWriter w;
  w.bytes(kMagic, 4);
  w.u16(kCheckpointVersion);
  const auto& cfg = model.config();
  w.u16(narrow16(cfg.in_channels, "in_channels"));
  w.u16(narrow16(cfg.base_width, "base_width"));
  w.u16(narrow16(cfg.num_classes, "num_classes"));
  w.u64(cfg.seed);
  w.u32(static_cast<std::uint32_t>(state.epoch));
  w.u64(state.iteration);

  const auto names = RunState::stream_names();
  const auto streams = state.streams();
  w.u16(static_cast<std::uint16_t>(streams.size()));
  for (std::size_t i = 0; i < streams.size(); ++i) {
    w.str16(names[i]);
    w.u64(streams[i]->key());
    w.u64(streams[i]->counter());
  }

  const auto params = model.parameters();
  const auto param_names = model.parameter_names();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) write_tensor(w, param_names[i], params[i]);
  for (std::size_t i = 0; i < params.size(); ++i) write_tensor(w, param_names[i] + ".velocity", model.velocity()[i]);
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  char magic[4];
  r.bytes(magic, 4);
  if (std::string_view(magic, 4) != std::string_view(kMagic, 4)) {
    throw FormatError(FormatError::Kind::bad_magic, "checkpoint: bad magic");
  }
  const auto version = r.u16();
  if (version != kCheckpointVersion) {
    throw FormatError(FormatError::Kind::version_mismatch,
                      "checkpoint: unsupported version " + std::to_string(version));
  }
  ModelConfig cfg;
  cfg.in_channels = r.u16();
  cfg.base_width = r.u16();
  cfg.num_classes = r.u16();
  cfg.seed = r.u64();
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw FormatError(FormatError::Kind::shape_mismatch, std::string("checkpoint: invalid model config: ") + e.what());
  }

  RunState state;
  state.epoch = static_cast<int>(r.u32());
  state.iteration = r.u64();
  const auto names = RunState::stream_names();
  const std::size_t n_streams = r.u16();
  if (n_streams != names.size()) {
    throw FormatError(FormatError::Kind::shape_mismatch,
                      "checkpoint: expected " + std::to_string(names.size()) + " rng streams, found " +
                          std::to_string(n_streams));
  }
  auto streams = state.streams();
  for (std::size_t i = 0; i < n_streams; ++i) {
    const auto name = r.str16();
    if (name != names[i]) throw FormatError(FormatError::Kind::shape_mismatch, "checkpoint: unexpected stream " + name);
    const auto key = r.u64();
    const auto counter = r.u64();
    *streams[i] = RngStream(key, counter);
  }

  SegNet model(cfg);
  const auto params = model.parameters();
  const auto param_names = model.parameter_names();
  const std::size_t n_tensors = r.u32();
  if (n_tensors != params.size()) {
    throw FormatError(FormatError::Kind::shape_mismatch, "checkpoint: expected " + std::to_string(params.size()) +
                                                             " tensors, found " + std::to_string(n_tensors));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i];
    read_tensor(r, param_names[i], p);
  }
  for (std::size_t i = 0; i < params.size(); ++i) read_tensor(r, param_names[i] + ".velocity", model.velocity()[i]);
  if (r.remaining() != 0) {
    throw FormatError(FormatError::Kind::truncated,
                      "checkpoint: " + std::to_string(r.remaining()) + " trailing bytes after last tensor");
  }
  return {std::move(model), state};
}

void save_checkpoint(const SegNet& model, const RunState& state, const std::filesystem::path& path) {
  write_file_bytes(path, encode_checkpoint(model, state));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file_bytes(path)); }

std::string checkpoint_file_name(int completed_epochs) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "epoch_%02d.sgck", completed_epochs);
  return buf;
}

}  // namespace proxyseg
