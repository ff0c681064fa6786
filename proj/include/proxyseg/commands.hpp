#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

namespace proxyseg {

struct GenDataOptions {
  std::optional<std::filesystem::path> config;
  std::filesystem::path out;
  std::uint64_t seed = 0;
};

// Writes source, target, val_source and val_target packs plus .meta.json
// sidecars. The two validation packs share their scenes.
void cmd_gen_data(const GenDataOptions& options);

struct TrainOptions {
  std::optional<std::filesystem::path> config;
  std::filesystem::path out;
  std::optional<std::string> mode;
  std::uint64_t seed = 0;
  // Directory holding source/target/val_target packs; overrides config paths.
  std::optional<std::filesystem::path> data_dir;
  std::optional<std::filesystem::path> resume;
  bool progress = true;  // per-epoch lines on stderr
};

// Runs (or resumes) a training run and returns the summary it wrote.
nlohmann::json cmd_train(const TrainOptions& options);

struct EvalOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path data;
  std::filesystem::path out;
  bool absent_as_zero = false;
};

nlohmann::json cmd_eval(const EvalOptions& options);

struct VisualizeOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path data;
  std::filesystem::path out;
  std::size_t count = 4;
};

void cmd_visualize(const VisualizeOptions& options);

// Full command line: parses, dispatches, maps failures to exit codes
// (1 usage, 2 data or format, 3 numeric).
int run_cli(int argc, const char* const* argv);

}  // namespace proxyseg
