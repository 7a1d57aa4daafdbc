#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "drmn/deform_attn.hpp"
#include "drmn/featuremaps.hpp"
#include "drmn/layers.hpp"

namespace drmn {

using Selection = std::vector<std::vector<std::size_t>>;

/// Per row, the k column indices with the largest values, ordered by value
/// (descending) and then by index.
Selection topk_select(const Tensor& h, std::size_t k);

/// Multi-head cross-attention from one phrase row onto selected pixel rows,
/// followed by the residual/dropout/norm/FFN update.
struct CrossAttnParams {
  std::size_t channels = 0;
  std::size_t heads = 0;
  double ffn_ratio = 2.0;
  std::vector<Tensor> wq, wk, wv;  // per head, (c/M) x (c/M)
  Tensor output_weight;            // c x c
  Tensor output_bias;
  NormParams norm;
  FfnParams ffn;

  static CrossAttnParams init(std::size_t channels, std::size_t heads, double ffn_ratio,
                              RngState& rng);
  std::size_t head_dim() const { return channels / heads; }
  void validate() const;
  void append_named(NamedTensors& out, const std::string& prefix) const;
  void load_named(const Bundle& bundle, const std::string& prefix);
};

struct CrossAttnResult {
  Tensor row;                   // updated Ĝ[j], 1 x c
  Tensor attended;              // concatenated heads after the output map
  std::vector<Tensor> weights;  // per head, 1 x k
};

CrossAttnResult cross_attend_detailed(Tape& tape, const Tensor& phrase, const Tensor& pixels,
                                      const CrossAttnParams& params, const DeformOptions& opts,
                                      RngState& rng);
Tensor cross_attend(Tape& tape, const Tensor& phrase, const Tensor& pixels,
                    const CrossAttnParams& params, const DeformOptions& opts, RngState& rng);

/// F̂ with rows s replaced by F̂[s] + pos[s] + phrase.
Tensor inject_phrase(Tape& tape, const Tensor& fhat, std::span<const std::size_t> s,
                     const Tensor& pos_rows, const Tensor& phrase);

/// F̂ with rows s re-encoded by a deformable layer over the encoder maps,
/// using ref_points[s] as reference points.
Tensor refine_pixels(Tape& tape, const Tensor& fhat, std::span<const std::size_t> s,
                     const LevelMaps& maps, const Tensor& ref_points,
                     const DeformLayerParams& params, const DeformOptions& opts, RngState& rng);

struct MatchState {
  Tensor fhat;        // cells x c at the matching level
  LevelShape shape;   // matching-level grid
  Tensor ref_points;  // cells x 2
  Tensor ghat;        // n x c
  Tensor h;           // latest n x cells similarities
  Selection selection;
  std::size_t round = 0;
  std::vector<Tensor> history;  // upsampled maps, n x (height*width)
  std::size_t height = 0;
  std::size_t width = 0;
};

/// State after the initial matching: H from the fused map, ℋ = [up(H)].
MatchState begin_rounds(Tape& tape, const Tensor& fused, LevelShape shape, const Tensor& phrases,
                        std::size_t height, std::size_t width);

struct RoundSpec {
  std::size_t k = 50;
  const LevelMaps* maps = nullptr;   // encoder outputs
  const PosEncoder* pos = nullptr;
  std::vector<const DeformLayerParams*> refine;  // one per round
  std::vector<const CrossAttnParams*> cross;     // one per round
  DeformOptions opts;
};

/// Runs refine.size() rounds; each round appends one upsampled map to ℋ.
void run_rounds(Tape& tape, MatchState& state, const RoundSpec& spec, RngState& rng);

}  // namespace drmn
