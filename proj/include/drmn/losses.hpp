#pragma once

#include <span>
#include <vector>

#include "drmn/tensor.hpp"

namespace drmn {

struct LossConfig {
  double lambda_bce = 1.0;
  double lambda_dice = 1.0;
  double dice_eps = 1e-6;

  void validate() const;
};

/// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] inside the log.
inline constexpr double kProbClamp = 1e-12;

/// Mean binary cross-entropy over all n*h*w entries.
Tensor bce_loss(Tape& tape, const Tensor& h, const Tensor& y);
/// (1/n) sum_j (1 - 2 sum H Y / (sum H + sum Y + eps)).
Tensor dice_loss(Tape& tape, const Tensor& h, const Tensor& y, double eps);

struct LossBreakdown {
  Tensor total;
  double bce = 0.0;   // unweighted, summed over maps
  double dice = 0.0;
  std::vector<double> per_map;  // weighted bce + dice of each map
};

/// Maps that carry the loss: the refinement rounds 1..I, or the initial
/// map alone when there are no rounds.
std::span<const Tensor> supervised_maps(std::span<const Tensor> history);

/// Weighted BCE + Dice summed over the given maps.
LossBreakdown total_loss(Tape& tape, std::span<const Tensor> history, const Tensor& y,
                         const LossConfig& cfg);

/// Binary masks H >= threshold.
Tensor infer_masks(const Tensor& h, double threshold = 0.5);

}  // namespace drmn
