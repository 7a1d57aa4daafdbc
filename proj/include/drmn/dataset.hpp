#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "drmn/scene.hpp"

// On-disk layout:
//   <dir>/manifest.json          generator config, seed and per-scene seeds
//   <dir>/scene_00000/scene.json objects, phrases, background
//   <dir>/scene_00000/masks.dtf  Y, phrases x (h*w)
//   <dir>/scene_00000/phrases.dtf G, phrases x d
//   <dir>/scene_00000/features_l2.dtf .. features_l5.dtf
namespace drmn {

struct Sample {
  SyntheticScene scene;
  FeaturePyramid pyramid;
};

struct Dataset {
  SceneConfig scene_config;
  double noise_sigma = 0.05;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> scene_seeds;
  std::vector<Sample> samples;
};

/// Scene i draws from RngState(seed).fork(i).
Dataset generate_dataset(const SceneConfig& cfg, double noise_sigma, std::size_t count,
                         std::uint64_t seed);

void save_dataset(const std::filesystem::path& dir, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& dir);

nlohmann::json scene_config_to_json(const SceneConfig& cfg);
SceneConfig scene_config_from_json(const nlohmann::json& j);

}  // namespace drmn
