#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "drmn/featuremaps.hpp"
#include "drmn/layers.hpp"

namespace drmn {

/// Learnable state of one multi-scale deformable attention layer.
///
/// Column layouts (M heads, L levels, K points per level per head):
///   offsets  (m*L + l)*K + k -> pair (d_row, d_col), normalized units
///   weights  (m*L + l)*K + k, softmax-normalized jointly over (l, k)
/// Head m reads value channels [m*c/M, (m+1)*c/M).
struct DeformLayerParams {
  std::size_t channels = 0;
  std::size_t heads = 0;
  std::size_t points = 0;
  std::size_t levels = kNumLevels;
  double ffn_ratio = 2.0;

  Tensor offset_weight;  // c x (M*L*K*2)
  Tensor offset_bias;
  Tensor attn_weight;    // c x (M*L*K)
  Tensor attn_bias;
  Tensor value_weight;   // c x c
  Tensor value_bias;
  Tensor output_weight;  // c x c
  Tensor output_bias;
  NormParams norm;
  FfnParams ffn;

  /// Fan-based uniform weights, zero biases, offsets within +-offset_bound.
  static DeformLayerParams init(std::size_t channels, std::size_t heads, std::size_t points,
                                double ffn_ratio, RngState& rng, double offset_bound = 0.01);

  std::size_t head_dim() const { return channels / heads; }
  std::size_t samples_per_head() const { return levels * points; }
  void validate() const;

  void append_named(NamedTensors& out, const std::string& prefix) const;
  void load_named(const Bundle& bundle, const std::string& prefix);
};

struct DeformOptions {
  double dropout = 0.1;
  bool training = false;
  /// Adds the conventional residual around the feed-forward block.
  bool ffn_residual = false;
  double norm_eps = 1e-6;
};

/// The multi-scale maps S = {F_l} a layer samples from.
struct LevelMaps {
  std::vector<Tensor> maps;  // cells_l x c, row-major over the level grid
  std::vector<LevelShape> shapes;
};

struct DeformInput {
  Tensor queries;     // rows x c
  const LevelMaps* maps = nullptr;
  Tensor ref_points;  // rows x 2, one normalized point per query row
};

struct DeformResult {
  Tensor output;     // FFN(norm(V + dropout(V)))
  Tensor attended;   // V: heads concatenated and linearly mapped
  Tensor weights;    // rows x (M*L*K) softmaxed attention
  Tensor locations;  // rows x (M*L*K*2) absolute sampling points
};

/// Weighted multi-scale bilinear sampling: for every query row and head,
/// sum over levels and points of weight * bilinear(value_l[head slice],
/// ref + offset). Differentiable w.r.t. values, offsets and weights.
Tensor ms_deform_sample(Tape& tape, std::span<const Tensor> values,
                        std::span<const LevelShape> shapes, const Tensor& ref_points,
                        const Tensor& offsets, const Tensor& weights, std::size_t heads,
                        std::size_t points);

DeformResult deform_layer_detailed(Tape& tape, const DeformInput& input,
                                   const DeformLayerParams& params, const DeformOptions& opts,
                                   RngState& rng);

Tensor deform_layer(Tape& tape, const DeformInput& input, const DeformLayerParams& params,
                    const DeformOptions& opts, RngState& rng);

/// T sequential layers over the same maps and reference points; T = 0 is
/// the identity.
Tensor stack_encoder(Tape& tape, const Tensor& queries, const LevelMaps& maps,
                     const Tensor& ref_points, std::span<const DeformLayerParams> layers,
                     const DeformOptions& opts, RngState& rng);

}  // namespace drmn
