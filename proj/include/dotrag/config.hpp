#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "dotrag/engine.hpp"
#include "dotrag/providers.hpp"

namespace dotrag {

/// Everything a CLI run needs. Layers: defaults, then the JSON config file
/// (flat dotted keys), then command-line flags. The API key is read from the
/// environment only.
struct RunConfig {
  std::string provider_mode = "live";  // live | mock
  std::string mock_script;
  HttpSettings http;
  int parse_retries = 2;
  long embed_dim = 0;  // 0: 256 for the mock embedder, http.embed_dim for live
  std::uint64_t seed = 0;

  EngineParams engine;

  std::string index_path;
  std::string prompts_dir;
  std::string ground_truth;
  std::string trace_path;

  int prep_max_retries = 3;
  double prep_tau_dedup = 0.60;
  std::size_t prep_batch_size = 10;
  bool prep_dedup = true;
  std::string prep_schema;

  bool verbose = false;

  static constexpr long kMockDim = 256;

  /// Applies flat dotted keys; unknown keys and an "api_key" entry fail.
  void apply_json(const nlohmann::json& flat);
  void apply_file(const std::filesystem::path& path);
  void validate() const;

  long resolved_dim() const;
  std::filesystem::path resolved_prompts_dir() const;
  /// Every setting under its dotted key; secrets replaced.
  nlohmann::json redacted() const;

  ProviderPair make_providers() const;
};

}  // namespace dotrag
