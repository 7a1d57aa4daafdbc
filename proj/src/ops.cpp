#include "drmn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "drmn/errors.hpp"

namespace drmn {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

void require_matrix(const Tensor& a, const char* op) {
  if (a.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_string(a.shape()));
  }
}

// Splits a shape around `axis` into (outer, extent, inner) strides.
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) + " invalid for " +
                         shape_string(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

// ---------------------------------------------------------------- elementwise

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto x = a.data();
  auto y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return tape.record("add", a.shape(), std::move(out), {a, b},
                     [a, b](std::span<const double> g) {
                       Tape::accumulate(a, g);
                       Tape::accumulate(b, g);
                     });
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto x = a.data();
  auto y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return tape.record("sub", a.shape(), std::move(out), {a, b},
                     [a, b](std::span<const double> g) {
                       Tape::accumulate(a, g);
                       if (double* gb = Tape::grad_buffer(b)) {
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                       }
                     });
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto x = a.data();
  auto y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return tape.record("mul", a.shape(), std::move(out), {a, b},
                     [a, b](std::span<const double> g) {
                       auto x = a.data();
                       auto y = b.data();
                       if (double* ga = Tape::grad_buffer(a)) {
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
                       }
                       if (double* gb = Tape::grad_buffer(b)) {
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
                       }
                     });
}

Tensor scale(Tape& tape, const Tensor& a, double factor) {
  auto x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
  return tape.record("scale", a.shape(), std::move(out), {a},
                     [a, factor](std::span<const double> g) {
                       if (double* ga = Tape::grad_buffer(a)) {
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
                       }
                     });
}

Tensor add_row(Tape& tape, const Tensor& a, const Tensor& row) {
  require_matrix(a, "add_row");
  const std::size_t m = a.rows(), n = a.cols();
  if (row.size() != n) {
    throw DimensionError("add_row: row of " + std::to_string(row.size()) + " values for " +
                         shape_string(a.shape()));
  }
  auto x = a.data();
  auto r = row.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x[i * n + j] + r[j];
  return tape.record("add_row", a.shape(), std::move(out), {a, row},
                     [a, row, m, n](std::span<const double> g) {
                       Tape::accumulate(a, g);
                       if (double* gr = Tape::grad_buffer(row)) {
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t j = 0; j < n; ++j) gr[j] += g[i * n + j];
                       }
                     });
}

// ---------------------------------------------------------------- linear algebra

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner extents differ, " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  auto x = a.data();
  auto y = b.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* o = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = x[i * k + p];
      if (s == 0.0) continue;
      const double* yr = y.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += s * yr[j];
    }
  }
  return tape.record("matmul", {m, n}, std::move(out), {a, b},
                     [a, b, m, k, n](std::span<const double> g) {
                       auto x = a.data();
                       auto y = b.data();
                       if (double* ga = Tape::grad_buffer(a)) {
                         // ga = g b^T
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             double acc = 0.0;
                             for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * y[p * n + j];
                             ga[i * k + p] += acc;
                           }
                       }
                       if (double* gb = Tape::grad_buffer(b)) {
                         // gb = a^T g
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             const double s = x[i * k + p];
                             if (s == 0.0) continue;
                             for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += s * g[i * n + j];
                           }
                       }
                     });
}

Tensor transpose(Tape& tape, const Tensor& a) {
  require_matrix(a, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  auto x = a.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x[i * n + j];
  return tape.record("transpose", {n, m}, std::move(out), {a},
                     [a, m, n](std::span<const double> g) {
                       if (double* ga = Tape::grad_buffer(a)) {
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
                       }
                     });
}

Tensor linear(Tape& tape, const Tensor& x, const Tensor& weight, const Tensor& bias) {
  Tensor y = matmul(tape, x, weight);
  return bias.defined() ? add_row(tape, y, bias) : y;
}

// ---------------------------------------------------------------- activations

Tensor relu(Tape& tape, const Tensor& x) {
  auto v = x.data();
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] > 0.0 ? v[i] : 0.0;
  return tape.record("relu", x.shape(), std::move(out), {x}, [x](std::span<const double> g) {
    if (double* gx = Tape::grad_buffer(x)) {
      auto v = x.data();
      for (std::size_t i = 0; i < g.size(); ++i)
        if (v[i] > 0.0) gx[i] += g[i];
    }
  });
}

Tensor sigmoid(Tape& tape, const Tensor& x) {
  auto v = x.data();
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    // Branch on sign so exp never overflows.
    if (v[i] >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-v[i]));
    } else {
      const double e = std::exp(v[i]);
      out[i] = e / (1.0 + e);
    }
  }
  std::vector<double> saved = out;
  return tape.record("sigmoid", x.shape(), std::move(out), {x},
                     [x, saved = std::move(saved)](std::span<const double> g) {
                       if (double* gx = Tape::grad_buffer(x)) {
                         for (std::size_t i = 0; i < g.size(); ++i)
                           gx[i] += g[i] * saved[i] * (1.0 - saved[i]);
                       }
                     });
}

Tensor softmax(Tape& tape, const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis, "softmax");
  auto v = x.data();
  std::vector<double> out(v.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.extent * s.inner + in;
      double mx = v[base];
      for (std::size_t a = 1; a < s.extent; ++a) mx = std::max(mx, v[base + a * s.inner]);
      double total = 0.0;
      for (std::size_t a = 0; a < s.extent; ++a) {
        const double e = std::exp(v[base + a * s.inner] - mx);
        out[base + a * s.inner] = e;
        total += e;
      }
      for (std::size_t a = 0; a < s.extent; ++a) out[base + a * s.inner] /= total;
    }
  }
  std::vector<double> saved = out;
  return tape.record(
      "softmax", x.shape(), std::move(out), {x},
      [x, s, saved = std::move(saved)](std::span<const double> g) {
        double* gx = Tape::grad_buffer(x);
        if (!gx) return;
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t in = 0; in < s.inner; ++in) {
            const std::size_t base = o * s.extent * s.inner + in;
            double dot = 0.0;
            for (std::size_t a = 0; a < s.extent; ++a) {
              const std::size_t i = base + a * s.inner;
              dot += g[i] * saved[i];
            }
            for (std::size_t a = 0; a < s.extent; ++a) {
              const std::size_t i = base + a * s.inner;
              gx[i] += saved[i] * (g[i] - dot);
            }
          }
        }
      });
}

Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& scale, const Tensor& shift,
                  std::size_t axis, double eps) {
  const AxisSplit s = split_axis(x.shape(), axis, "layer_norm");
  if (s.extent < 2) throw DimensionError("layer_norm: normalized axis needs extent >= 2");
  if (scale.size() != s.extent || shift.size() != s.extent) {
    throw DimensionError("layer_norm: scale/shift must have " + std::to_string(s.extent) +
                         " entries");
  }
  if (!(eps >= 0.0)) throw ParameterError("layer_norm: eps must be non-negative");
  auto v = x.data();
  auto gamma = scale.data();
  auto beta = shift.data();
  std::vector<double> out(v.size());
  std::vector<double> xhat(v.size());
  std::vector<double> inv_std(s.outer * s.inner);
  const double n = static_cast<double>(s.extent);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.extent * s.inner + in;
      double mu = 0.0;
      for (std::size_t a = 0; a < s.extent; ++a) mu += v[base + a * s.inner];
      mu /= n;
      double var = 0.0;
      for (std::size_t a = 0; a < s.extent; ++a) {
        const double d = v[base + a * s.inner] - mu;
        var += d * d;
      }
      var /= n;
      const double inv = 1.0 / std::sqrt(var + eps);
      inv_std[o * s.inner + in] = inv;
      for (std::size_t a = 0; a < s.extent; ++a) {
        const std::size_t i = base + a * s.inner;
        xhat[i] = (v[i] - mu) * inv;
        out[i] = xhat[i] * gamma[a] + beta[a];
      }
    }
  }
  return tape.record(
      "layer_norm", x.shape(), std::move(out), {x, scale, shift},
      [x, scale, shift, s, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          std::span<const double> g) {
        auto gamma = scale.data();
        double* gx = Tape::grad_buffer(x);
        double* gg = Tape::grad_buffer(scale);
        double* gb = Tape::grad_buffer(shift);
        const double n = static_cast<double>(s.extent);
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t in = 0; in < s.inner; ++in) {
            const std::size_t base = o * s.extent * s.inner + in;
            double sum_g = 0.0, sum_gx = 0.0;
            for (std::size_t a = 0; a < s.extent; ++a) {
              const std::size_t i = base + a * s.inner;
              const double gh = g[i] * gamma[a];
              sum_g += gh;
              sum_gx += gh * xhat[i];
              if (gg) gg[a] += g[i] * xhat[i];
              if (gb) gb[a] += g[i];
            }
            if (!gx) continue;
            const double inv = inv_std[o * s.inner + in];
            for (std::size_t a = 0; a < s.extent; ++a) {
              const std::size_t i = base + a * s.inner;
              const double gh = g[i] * gamma[a];
              gx[i] += inv / n * (n * gh - sum_g - xhat[i] * sum_gx);
            }
          }
        }
      });
}

Tensor dropout(Tape& tape, const Tensor& x, double rate, RngState& rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ParameterError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  auto v = x.data();
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(v.size());
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    mask[i] = rng.uniform() >= rate ? keep_scale : 0.0;
    out[i] = v[i] * mask[i];
  }
  return tape.record("dropout", x.shape(), std::move(out), {x},
                     [x, mask = std::move(mask)](std::span<const double> g) {
                       if (double* gx = Tape::grad_buffer(x)) {
                         for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
                       }
                     });
}

// ---------------------------------------------------------------- sampling

namespace detail {

BilinearTap bilinear_tap(double py, double px, std::size_t height, std::size_t width) {
  BilinearTap t;
  if (!(py >= 0.0 && py <= 1.0 && px >= 0.0 && px <= 1.0)) return t;
  t.inside = true;

  auto axis = [](double p, std::size_t extent, std::size_t& lo, std::size_t& hi, double& frac,
                 double& dfrac) {
    const double hi_pix = static_cast<double>(extent - 1);
    double pix = p * static_cast<double>(extent) - 0.5;
    dfrac = static_cast<double>(extent);
    if (pix <= 0.0) {
      pix = 0.0;
      dfrac = 0.0;
    } else if (pix >= hi_pix) {
      pix = hi_pix;
      dfrac = 0.0;
    }
    lo = static_cast<std::size_t>(std::floor(pix));
    hi = std::min(lo + 1, extent - 1);
    frac = pix - static_cast<double>(lo);
  };

  double fy, fx, dfy, dfx;
  axis(py, height, t.y0, t.y1, fy, dfy);
  axis(px, width, t.x0, t.x1, fx, dfx);

  t.w[0] = (1.0 - fy) * (1.0 - fx);
  t.w[1] = (1.0 - fy) * fx;
  t.w[2] = fy * (1.0 - fx);
  t.w[3] = fy * fx;

  t.dwy[0] = -(1.0 - fx) * dfy;
  t.dwy[1] = -fx * dfy;
  t.dwy[2] = (1.0 - fx) * dfy;
  t.dwy[3] = fx * dfy;

  t.dwx[0] = -(1.0 - fy) * dfx;
  t.dwx[1] = (1.0 - fy) * dfx;
  t.dwx[2] = -fy * dfx;
  t.dwx[3] = fy * dfx;
  return t;
}

}  // namespace detail

Tensor bilinear_sample(Tape& tape, const Tensor& map, const Tensor& pts) {
  if (map.rank() != 3) {
    throw DimensionError("bilinear_sample: map must be h x w x c, got " +
                         shape_string(map.shape()));
  }
  if (pts.rank() != 2 || pts.cols() != 2) {
    throw DimensionError("bilinear_sample: points must be k x 2, got " +
                         shape_string(pts.shape()));
  }
  const std::size_t h = map.dim(0), w = map.dim(1), c = map.dim(2), k = pts.rows();
  auto m = map.data();
  auto p = pts.data();
  std::vector<double> out(k * c, 0.0);
  std::vector<detail::BilinearTap> taps(k);
  for (std::size_t r = 0; r < k; ++r) {
    taps[r] = detail::bilinear_tap(p[2 * r], p[2 * r + 1], h, w);
    const auto& t = taps[r];
    if (!t.inside) continue;
    for (std::size_t q = 0; q < 4; ++q) {
      if (t.w[q] == 0.0) continue;
      const double* src = m.data() + t.corner(q, w) * c;
      for (std::size_t ch = 0; ch < c; ++ch) out[r * c + ch] += t.w[q] * src[ch];
    }
  }
  return tape.record(
      "bilinear_sample", {k, c}, std::move(out), {map, pts},
      [map, pts, w, c, k, taps = std::move(taps)](std::span<const double> g) {
        auto m = map.data();
        double* gm = Tape::grad_buffer(map);
        double* gp = Tape::grad_buffer(pts);
        for (std::size_t r = 0; r < k; ++r) {
          const auto& t = taps[r];
          if (!t.inside) continue;
          const double* gr = g.data() + r * c;
          for (std::size_t q = 0; q < 4; ++q) {
            const std::size_t cell = t.corner(q, w);
            if (gm && t.w[q] != 0.0) {
              for (std::size_t ch = 0; ch < c; ++ch) gm[cell * c + ch] += t.w[q] * gr[ch];
            }
            if (gp) {
              double dot = 0.0;
              const double* src = m.data() + cell * c;
              for (std::size_t ch = 0; ch < c; ++ch) dot += src[ch] * gr[ch];
              gp[2 * r] += t.dwy[q] * dot;
              gp[2 * r + 1] += t.dwx[q] * dot;
            }
          }
        }
      });
}

// ---------------------------------------------------------------- structure

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw DimensionError("reshape: " + shape_string(x.shape()) + " -> " + shape_string(shape));
  }
  return tape.record("reshape", std::move(shape), x.to_vector(), {x},
                     [x](std::span<const double> g) { Tape::accumulate(x, g); });
}

Tensor concat_rows(Tape& tape, std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  const std::size_t c = parts[0].cols();
  std::size_t rows = 0;
  for (const Tensor& t : parts) {
    if (t.cols() != c) throw DimensionError("concat_rows: column counts differ");
    rows += t.rows();
  }
  std::vector<double> out;
  out.reserve(rows * c);
  for (const Tensor& t : parts) out.insert(out.end(), t.data().begin(), t.data().end());
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return tape.record("concat_rows", {rows, c}, std::move(out), inputs,
                     [inputs](std::span<const double> g) {
                       std::size_t offset = 0;
                       for (const Tensor& t : inputs) {
                         Tape::accumulate(t, g.subspan(offset, t.size()));
                         offset += t.size();
                       }
                     });
}

Tensor concat_cols(Tape& tape, std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t r = parts[0].rows();
  std::size_t cols = 0;
  for (const Tensor& t : parts) {
    if (t.rows() != r) throw DimensionError("concat_cols: row counts differ");
    cols += t.cols();
  }
  std::vector<double> out(r * cols);
  std::size_t offset = 0;
  for (const Tensor& t : parts) {
    const std::size_t tc = t.cols();
    auto d = t.data();
    for (std::size_t i = 0; i < r; ++i)
      std::copy_n(d.begin() + i * tc, tc, out.begin() + i * cols + offset);
    offset += tc;
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return tape.record("concat_cols", {r, cols}, std::move(out), inputs,
                     [inputs, r, cols](std::span<const double> g) {
                       std::size_t offset = 0;
                       for (const Tensor& t : inputs) {
                         const std::size_t tc = t.cols();
                         if (double* gt = Tape::grad_buffer(t)) {
                           for (std::size_t i = 0; i < r; ++i)
                             for (std::size_t j = 0; j < tc; ++j)
                               gt[i * tc + j] += g[i * cols + offset + j];
                         }
                         offset += tc;
                       }
                     });
}

Tensor slice_rows(Tape& tape, const Tensor& x, std::size_t begin, std::size_t count) {
  require_matrix(x, "slice_rows");
  if (count == 0 || begin + count > x.rows()) {
    throw DimensionError("slice_rows: range out of bounds for " + shape_string(x.shape()));
  }
  const std::size_t c = x.cols();
  auto d = x.data();
  std::vector<double> out(d.begin() + begin * c, d.begin() + (begin + count) * c);
  return tape.record("slice_rows", {count, c}, std::move(out), {x},
                     [x, begin, c](std::span<const double> g) {
                       if (double* gx = Tape::grad_buffer(x)) {
                         for (std::size_t i = 0; i < g.size(); ++i) gx[begin * c + i] += g[i];
                       }
                     });
}

Tensor slice_cols(Tape& tape, const Tensor& x, std::size_t begin, std::size_t count) {
  require_matrix(x, "slice_cols");
  if (count == 0 || begin + count > x.cols()) {
    throw DimensionError("slice_cols: range out of bounds for " + shape_string(x.shape()));
  }
  const std::size_t r = x.rows(), c = x.cols();
  auto d = x.data();
  std::vector<double> out(r * count);
  for (std::size_t i = 0; i < r; ++i)
    std::copy_n(d.begin() + i * c + begin, count, out.begin() + i * count);
  return tape.record("slice_cols", {r, count}, std::move(out), {x},
                     [x, begin, count, r, c](std::span<const double> g) {
                       if (double* gx = Tape::grad_buffer(x)) {
                         for (std::size_t i = 0; i < r; ++i)
                           for (std::size_t j = 0; j < count; ++j)
                             gx[i * c + begin + j] += g[i * count + j];
                       }
                     });
}

Tensor gather_rows(Tape& tape, const Tensor& x, std::span<const std::size_t> index) {
  require_matrix(x, "gather_rows");
  if (index.empty()) throw ContractError("gather_rows: empty index");
  const std::size_t c = x.cols();
  auto d = x.data();
  std::vector<double> out(index.size() * c);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= x.rows()) {
      throw ContractError("gather_rows: index " + std::to_string(index[i]) + " out of range");
    }
    std::copy_n(d.begin() + index[i] * c, c, out.begin() + i * c);
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return tape.record("gather_rows", {index.size(), c}, std::move(out), {x},
                     [x, idx = std::move(idx), c](std::span<const double> g) {
                       if (double* gx = Tape::grad_buffer(x)) {
                         for (std::size_t i = 0; i < idx.size(); ++i)
                           for (std::size_t j = 0; j < c; ++j) gx[idx[i] * c + j] += g[i * c + j];
                       }
                     });
}

Tensor scatter_rows(Tape& tape, const Tensor& x, std::span<const std::size_t> index,
                    const Tensor& rows) {
  require_matrix(x, "scatter_rows");
  require_matrix(rows, "scatter_rows");
  const std::size_t c = x.cols();
  if (rows.cols() != c || rows.rows() != index.size()) {
    throw DimensionError("scatter_rows: " + shape_string(rows.shape()) + " rows for " +
                         std::to_string(index.size()) + " indices into " +
                         shape_string(x.shape()));
  }
  std::vector<char> hit(x.rows(), 0);
  for (std::size_t i : index) {
    if (i >= x.rows()) throw ContractError("scatter_rows: index " + std::to_string(i) + " out of range");
    if (hit[i]) throw ContractError("scatter_rows: duplicate index " + std::to_string(i));
    hit[i] = 1;
  }
  std::vector<double> out = x.to_vector();
  auto src = rows.data();
  for (std::size_t i = 0; i < index.size(); ++i)
    std::copy_n(src.begin() + i * c, c, out.begin() + index[i] * c);
  std::vector<std::size_t> idx(index.begin(), index.end());
  return tape.record("scatter_rows", x.shape(), std::move(out), {x, rows},
                     [x, rows, idx = std::move(idx), hit = std::move(hit), c](
                         std::span<const double> g) {
                       if (double* gx = Tape::grad_buffer(x)) {
                         for (std::size_t r = 0; r < hit.size(); ++r) {
                           if (hit[r]) continue;
                           for (std::size_t j = 0; j < c; ++j) gx[r * c + j] += g[r * c + j];
                         }
                       }
                       if (double* gr = Tape::grad_buffer(rows)) {
                         for (std::size_t i = 0; i < idx.size(); ++i)
                           for (std::size_t j = 0; j < c; ++j) gr[i * c + j] += g[idx[i] * c + j];
                       }
                     });
}

// ---------------------------------------------------------------- reductions

Tensor sum(Tape& tape, const Tensor& x) {
  auto d = x.data();
  const double total = std::accumulate(d.begin(), d.end(), 0.0);
  return tape.record("sum", {}, {total}, {x}, [x](std::span<const double> g) {
    if (double* gx = Tape::grad_buffer(x)) {
      for (std::size_t i = 0; i < x.size(); ++i) gx[i] += g[0];
    }
  });
}

Tensor mean(Tape& tape, const Tensor& x) {
  auto d = x.data();
  const double n = static_cast<double>(d.size());
  const double total = std::accumulate(d.begin(), d.end(), 0.0);
  return tape.record("mean", {}, {total / n}, {x}, [x, n](std::span<const double> g) {
    if (double* gx = Tape::grad_buffer(x)) {
      for (std::size_t i = 0; i < x.size(); ++i) gx[i] += g[0] / n;
    }
  });
}

}  // namespace drmn
