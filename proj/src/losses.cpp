#include "drmn/losses.hpp"

#include <algorithm>
#include <cmath>

#include "drmn/errors.hpp"
#include "drmn/ops.hpp"

namespace drmn {

void LossConfig::validate() const {
  if (!(lambda_bce >= 0.0) || !std::isfinite(lambda_bce)) throw ConfigError("lambda_bce must be >= 0");
  if (!(lambda_dice >= 0.0) || !std::isfinite(lambda_dice)) throw ConfigError("lambda_dice must be >= 0");
  if (!(dice_eps >= 0.0) || !std::isfinite(dice_eps)) throw ConfigError("dice_eps must be >= 0");
}

namespace {

void check_pair(const Tensor& h, const Tensor& y, const char* op) {
  if (h.rank() != 2 || h.shape() != y.shape()) {
    throw DimensionError(std::string(op) + ": prediction " + shape_string(h.shape()) +
                         " vs target " + shape_string(y.shape()));
  }
}

}  // namespace

Tensor bce_loss(Tape& tape, const Tensor& h, const Tensor& y) {
  check_pair(h, y, "bce_loss");
  auto hv = h.data();
  auto yv = y.data();
  const std::size_t count = hv.size();
  const double inv = 1.0 / static_cast<double>(count);
  double acc = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double p = std::clamp(hv[i], kProbClamp, 1.0 - kProbClamp);
    acc -= yv[i] * std::log(p) + (1.0 - yv[i]) * std::log(1.0 - p);
  }
  return tape.record("bce_loss", {}, {acc * inv}, {h}, [h, y, inv](std::span<const double> g) {
    double* gh = Tape::grad_buffer(h);
    if (!gh) return;
    auto hv = h.data();
    auto yv = y.data();
    for (std::size_t i = 0; i < hv.size(); ++i) {
      if (hv[i] < kProbClamp || hv[i] > 1.0 - kProbClamp) continue;
      gh[i] += g[0] * inv * ((1.0 - yv[i]) / (1.0 - hv[i]) - yv[i] / hv[i]);
    }
  });
}

Tensor dice_loss(Tape& tape, const Tensor& h, const Tensor& y, double eps) {
  check_pair(h, y, "dice_loss");
  const std::size_t n = h.rows(), m = h.cols();
  auto hv = h.data();
  auto yv = y.data();
  std::vector<double> inter(n, 0.0), denom(n, eps);
  double loss = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < m; ++k) {
      inter[j] += hv[j * m + k] * yv[j * m + k];
      denom[j] += hv[j * m + k] + yv[j * m + k];
    }
    if (denom[j] == 0.0) throw NumericError("dice_loss: empty prediction and target with eps = 0");
    loss += 1.0 - 2.0 * inter[j] / denom[j];
  }
  loss /= static_cast<double>(n);
  return tape.record("dice_loss", {}, {loss}, {h},
                     [h, y, n, m, inter = std::move(inter), denom = std::move(denom)](
                         std::span<const double> g) {
                       double* gh = Tape::grad_buffer(h);
                       if (!gh) return;
                       auto yv = y.data();
                       const double s = g[0] / static_cast<double>(n);
                       for (std::size_t j = 0; j < n; ++j) {
                         const double d2 = denom[j] * denom[j];
                         for (std::size_t k = 0; k < m; ++k) {
                           gh[j * m + k] -= s * 2.0 * (yv[j * m + k] * denom[j] - inter[j]) / d2;
                         }
                       }
                     });
}

std::span<const Tensor> supervised_maps(std::span<const Tensor> history) {
  return history.size() > 1 ? history.subspan(1) : history;
}

LossBreakdown total_loss(Tape& tape, std::span<const Tensor> history, const Tensor& y,
                         const LossConfig& cfg) {
  if (history.empty()) throw ContractError("total_loss: empty prediction history");
  cfg.validate();
  LossBreakdown out;
  for (const Tensor& h : history) {
    Tensor b = bce_loss(tape, h, y);
    Tensor d = dice_loss(tape, h, y, cfg.dice_eps);
    Tensor term = add(tape, scale(tape, b, cfg.lambda_bce), scale(tape, d, cfg.lambda_dice));
    out.bce += b.item();
    out.dice += d.item();
    out.per_map.push_back(term.item());
    out.total = out.total.defined() ? add(tape, out.total, term) : term;
  }
  return out;
}

Tensor infer_masks(const Tensor& h, double threshold) {
  std::vector<double> v(h.size());
  auto hv = h.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = hv[i] >= threshold ? 1.0 : 0.0;
  return Tensor(h.shape(), std::move(v));
}

}  // namespace drmn
