#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "drmn/ops.hpp"
#include "drmn/tensor.hpp"

namespace drmn {

/// Pyramid levels l = 2..5 (strides 4, 8, 16, 32).
inline constexpr std::array<int, 4> kPyramidLevels{2, 3, 4, 5};
inline constexpr std::size_t kNumLevels = kPyramidLevels.size();
/// Index of level 3, the resolution similarity maps are computed at.
inline constexpr std::size_t kMatchLevel = 1;

struct LevelShape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t cells() const noexcept { return rows * cols; }
  friend bool operator==(const LevelShape&, const LevelShape&) = default;
};

/// Level shapes (h/2^l, w/2^l) for l = 2..5; h and w must be multiples of 32.
std::vector<LevelShape> pyramid_shapes(std::size_t height, std::size_t width);

/// Normalized cell centres ((i+0.5)/rows, (j+0.5)/cols), row-major.
Tensor make_grid(LevelShape shape);

/// 2D sinusoidal encoding. The first c/2 channels encode the row coordinate,
/// the rest the column coordinate; within each half, channel pairs (2q, 2q+1)
/// hold sin/cos of p / temperature^(2q / (c/2)).
class PosEncoder {
 public:
  explicit PosEncoder(std::size_t channels, double temperature = 10000.0);

  std::size_t channels() const noexcept { return channels_; }
  double temperature() const noexcept { return temperature_; }

  Tensor encode(const Tensor& pts) const;

 private:
  std::size_t channels_;
  double temperature_;
};

/// Per-level flattened features F_l, reference grids p_l and level shapes.
struct FeaturePyramid {
  std::size_t channels = 0;
  std::vector<LevelShape> shapes;
  std::vector<Tensor> features;    // F_l: cells x c
  std::vector<Tensor> ref_points;  // p_l: cells x 2

  std::size_t total_rows() const;
  std::size_t level_offset(std::size_t level_index) const;
  /// catrow of the reference grids over all levels.
  Tensor stacked_ref_points(Tape& tape) const;
};

/// Split a catrow'd tensor back into per-level blocks.
std::vector<Tensor> split_levels(Tape& tape, const Tensor& stacked,
                                 std::span<const LevelShape> shapes);

}  // namespace drmn
