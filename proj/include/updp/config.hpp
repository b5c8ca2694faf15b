#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "updp/pipeline.hpp"

namespace updp {

/// Sizes and seeds of the reference components a run is built from.
struct ModelConfig {
  std::size_t D = 16;             ///< embedding / feature dimension
  std::size_t pool_grid = 8;      ///< image encoder block grid
  std::size_t image_h = 32;       ///< generator output height
  std::size_t image_w = 32;
  std::size_t min_count = 1;      ///< vocabulary frequency cut-off
  std::uint64_t embedding_seed = 1;
  std::uint64_t encoder_seed = 2;
  std::uint64_t generator_seed = 3;

  void validate() const;
};

/// A full run configuration: PipelineConfig fields at the top level of the
/// config file plus an optional "model" object.
struct RunConfig {
  PipelineConfig pipeline;
  ModelConfig model;
};

/// Parses the JSON config text. Missing fields keep their defaults; unknown
/// fields and out-of-range values throw ParseError.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Canonical JSON (sorted keys, every field present).
std::string canonical_config_json(const RunConfig& cfg);

/// SHA-256 of the canonical JSON, lowercase hex.
std::string config_fingerprint(const RunConfig& cfg);

std::string sha256_hex(std::string_view data);

std::string_view to_string(SelectionMode m);
std::string_view to_string(PairReport p);
std::string_view to_string(PromptInit p);

}  // namespace updp
