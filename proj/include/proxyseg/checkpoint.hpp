#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "proxyseg/model.hpp"
#include "proxyseg/trainer.hpp"

namespace proxyseg {

// Binary checkpoint: magic "SGCK", u16 version, model config, epoch,
// iteration, named RNG streams, then every parameter tensor followed by every
// velocity buffer (name, shape, little-endian f32 values).
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
  SegNet model;
  RunState state;
};

std::vector<std::uint8_t> encode_checkpoint(const SegNet& model, const RunState& state);
// Throws FormatError (bad magic, version mismatch, truncation, shape mismatch
// against the embedded config) without returning a partial model.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const SegNet& model, const RunState& state, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// "epoch_07.sgck" for a checkpoint taken after 7 completed epochs.
std::string checkpoint_file_name(int completed_epochs);

}  // namespace proxyseg
