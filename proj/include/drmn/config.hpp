#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>

#include "drmn/model.hpp"
#include "drmn/scene.hpp"
#include "drmn/train.hpp"

// Run configuration file: one `key = value` per line, `#` starts a comment.
// Every key has a default; unknown keys and malformed values are rejected.
namespace drmn {

struct RunConfig {
  ModelConfig model;
  SceneConfig scene;
  TrainConfig train;
  double noise_sigma = 0.05;
  std::size_t scenes = 200;
  std::size_t eval_scenes = 100;
  std::uint64_t seed = 0;
  double threshold = 0.5;

  /// Copies shared fields (image size, channels, phrase_dim) from model to scene.
  void sync();
  void validate() const;

  /// Every key in canonical order, including defaults.
  std::string to_text() const;
  nlohmann::json to_json() const;
};

/// Parse config text on top of the defaults. `source` labels error messages.
RunConfig parse_run_config(std::string_view text, const std::string& source = "config");
RunConfig load_run_config(const std::string& path);

/// Apply one `key = value` assignment.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

}  // namespace drmn
