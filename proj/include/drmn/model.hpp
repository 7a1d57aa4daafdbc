#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "drmn/aggregation.hpp"
#include "drmn/deform_attn.hpp"
#include "drmn/featuremaps.hpp"

namespace drmn {

/// Which parameters the refinement rounds use.
///   rounds     one refinement layer and one cross-attention block for all rounds
///   per-round  a distinct refinement layer and cross-attention block per round
///   encoder    refinement reuses the last encoder layer; cross-attention shared
enum class Sharing { rounds, per_round, encoder };

const char* to_string(Sharing s);
Sharing sharing_from_string(const std::string& name);

struct ModelConfig {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t channels = 32;
  std::size_t phrase_dim = 32;
  std::size_t heads = 4;
  std::size_t points = 4;
  double ffn_ratio = 2.0;
  std::size_t encoder_layers = 2;
  std::size_t rounds = 3;
  std::size_t topk = 50;
  double dropout = 0.1;
  bool ffn_residual = false;
  Sharing sharing = Sharing::rounds;
  double pos_temperature = 10000.0;
  double norm_eps = 1e-6;
  double offset_init = 0.01;

  void validate() const;
  LevelShape match_shape() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

struct Model {
  ModelConfig config;
  Tensor phrase_projection;  // d x c
  std::vector<DeformLayerParams> encoder;
  std::vector<DeformLayerParams> refine;
  std::vector<CrossAttnParams> cross;

  static Model init(const ModelConfig& cfg, RngState& rng);

  NamedTensors named_parameters() const;
  std::vector<Tensor> parameters() const;
  std::size_t parameter_count() const;

  const DeformLayerParams& refine_for_round(std::size_t r) const;
  const CrossAttnParams& cross_for_round(std::size_t r) const;

  void save(const std::filesystem::path& dir) const;
  /// Architecture comes from the bundle metadata.
  static Model load(const std::filesystem::path& dir);
};

struct ForwardResult {
  std::vector<Tensor> history;  // ℋ, rounds + 1 maps of n x (h*w)
  MatchState state;
  std::vector<Tensor> encoded;  // per-level encoder outputs
};

/// Full network on one scene: encoder, fusion, initial matching and the
/// refinement rounds.
ForwardResult forward(Tape& tape, const Model& model, const FeaturePyramid& pyramid,
                      const Tensor& phrases, RngState& rng, bool training);

}  // namespace drmn
