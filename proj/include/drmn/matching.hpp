#pragma once

#include <cstddef>
#include <span>

#include "drmn/featuremaps.hpp"
#include "drmn/tensor.hpp"

namespace drmn {

/// Pixel features fused at level-3 resolution, row-major over `shape`.
struct FusedMap {
  Tensor features;  // (h/8 * w/8) x c
  LevelShape shape;
};

/// Phrase-to-pixel similarities in (0, 1).
struct SimilarityMap {
  Tensor values;  // n x cells
  std::size_t round = 0;
};

/// Bilinear resampling of a flattened map between grids; cell centres are
/// aligned. Identity when the shapes match.
Tensor resample_level(Tape& tape, const Tensor& map, LevelShape from, LevelShape to);

/// Elementwise mean of maps already at a common shape.
FusedMap fuse(Tape& tape, std::span<const Tensor> maps, LevelShape shape);

/// Resample every level to `target` and fuse.
FusedMap fuse_levels(Tape& tape, std::span<const Tensor> maps, std::span<const LevelShape> shapes,
                     LevelShape target);

/// Ĝ = G V^g.
Tensor project_phrases(Tape& tape, const Tensor& phrases, const Tensor& projection);

/// H = sigmoid(Ĝ Fᵀ).
Tensor similarity(Tape& tape, const Tensor& phrases, const Tensor& pixels);

/// Upsample n x cells similarities on `shape` to n x (height*width).
Tensor upsample_similarity(Tape& tape, const Tensor& h, LevelShape shape, std::size_t height,
                           std::size_t width);

}  // namespace drmn
