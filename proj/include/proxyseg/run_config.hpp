#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "proxyseg/synth_data.hpp"
#include "proxyseg/trainer.hpp"

namespace proxyseg {

struct DataCounts {
  std::size_t source = 500;
  std::size_t target = 500;
  std::size_t validation = 100;
  bool operator==(const DataCounts&) const = default;
};

/// Everything a CLI invocation can configure: the training run plus the
/// benchmark generator settings used by gen-data.
struct RunConfig {
  TrainConfig train;
  SceneSpec scene;
  DomainParams source_domain = DomainParams::source_default();
  DomainParams target_domain = DomainParams::target_default();
  DataCounts counts;

  void validate() const;
};

// JSON with every field present. parse_run_config accepts any subset of the
// same keys, fills the rest with defaults and rejects unknown keys.
nlohmann::json to_json(const RunConfig& config);
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

nlohmann::json to_json(const SceneSpec& spec);
nlohmann::json to_json(const DomainParams& params);

}  // namespace proxyseg
