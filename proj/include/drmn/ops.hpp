#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "drmn/rng.hpp"
#include "drmn/tensor.hpp"

// Differentiable primitives. Every op takes the tape it records onto first;
// pass Tape::inference() to evaluate without recording.
namespace drmn {

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& a, double factor);
/// a[m x n] + row[n], broadcast over rows.
Tensor add_row(Tape& tape, const Tensor& a, const Tensor& row);

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor transpose(Tape& tape, const Tensor& a);
/// x W + b; `bias` may be undefined.
Tensor linear(Tape& tape, const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor relu(Tape& tape, const Tensor& x);
Tensor sigmoid(Tape& tape, const Tensor& x);
/// Max-subtracted softmax along `axis`.
Tensor softmax(Tape& tape, const Tensor& x, std::size_t axis);
/// Normalize to zero mean / unit variance along `axis`, then apply the
/// per-position `scale` and `shift` (both of extent dim(axis)).
Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& scale, const Tensor& shift,
                  std::size_t axis, double eps);
/// Inverted dropout. Identity when `training` is false or `rate` is 0.
Tensor dropout(Tape& tape, const Tensor& x, double rate, RngState& rng, bool training);

/// Sample map[h x w x c] at normalized (row, col) points pts[k x 2] -> [k x c].
/// Cell (i, j) is centred at ((i+0.5)/h, (j+0.5)/w). Inside [0,1]^2 the read
/// is bilinear between centres and edge-clamped in the outer half cell;
/// points outside [0,1]^2 read zero.
Tensor bilinear_sample(Tape& tape, const Tensor& map, const Tensor& pts);

Tensor reshape(Tape& tape, const Tensor& x, Shape shape);
Tensor concat_rows(Tape& tape, std::span<const Tensor> parts);
Tensor concat_cols(Tape& tape, std::span<const Tensor> parts);
Tensor slice_rows(Tape& tape, const Tensor& x, std::size_t begin, std::size_t count);
Tensor slice_cols(Tape& tape, const Tensor& x, std::size_t begin, std::size_t count);
Tensor gather_rows(Tape& tape, const Tensor& x, std::span<const std::size_t> index);
/// Copy of x with rows `index` replaced by `rows`. Indices must be distinct.
Tensor scatter_rows(Tape& tape, const Tensor& x, std::span<const std::size_t> index,
                    const Tensor& rows);

Tensor sum(Tape& tape, const Tensor& x);
Tensor mean(Tape& tape, const Tensor& x);

namespace detail {

/// Bilinear tap on an h x w grid for one normalized coordinate pair. Weights
/// index the four corners (y0,x0), (y0,x1), (y1,x0), (y1,x1); dwy/dwx are the
/// derivatives of those weights w.r.t. the normalized row/col coordinate.
struct BilinearTap {
  bool inside = false;
  std::size_t y0 = 0, y1 = 0, x0 = 0, x1 = 0;
  double w[4] = {0, 0, 0, 0};
  double dwy[4] = {0, 0, 0, 0};
  double dwx[4] = {0, 0, 0, 0};

  std::size_t corner(std::size_t i, std::size_t width) const {
    const std::size_t y = (i < 2) ? y0 : y1;
    const std::size_t x = (i % 2 == 0) ? x0 : x1;
    return y * width + x;
  }
};

BilinearTap bilinear_tap(double py, double px, std::size_t height, std::size_t width);

}  // namespace detail

}  // namespace drmn
