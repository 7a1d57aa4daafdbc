#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "drmn/ops.hpp"
#include "drmn/rng.hpp"
#include "drmn/tensor.hpp"

namespace support {

using drmn::RngState;
using drmn::Shape;
using drmn::Tape;
using drmn::Tensor;

/// Shared non-recording tape.
inline Tape& inf() {
  static Tape t = Tape::inference();
  return t;
}

inline Tensor random_tensor(Shape shape, RngState& rng, double lo = -1.0, double hi = 1.0, bool grad = false) {
  std::vector<double> v(drmn::shape_size(shape));
  for (double& a : v) a = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v), grad);
}

/// Fixed random weighting so a vector-valued output becomes a scalar loss
/// whose gradient exercises every output element.
inline Tensor project_to_scalar(Tape& tape, const Tensor& out, std::uint64_t seed = 99) {
  RngState rng(seed);
  const Tensor w = random_tensor(out.shape(), rng);
  return drmn::sum(tape, drmn::mul(tape, out, w));
}

struct GradReport {
  double rel_err = 0.0;
  double max_analytic = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "param[i]" of the largest deviation
};

/// Central differences against the taped gradient of the scalar `loss(tape)`
/// w.r.t. every element of `params`. rel-err = max|a - n| / max(max|n|, 1e-8).
inline GradReport gradcheck(const std::function<Tensor(Tape&)>& loss, const std::vector<Tensor>& params,
                            double h = 1e-5) {
  for (const Tensor& p : params) {
    Tensor q = p;
    q.zero_grad();
  }
  Tape tape;
  tape.backward(loss(tape));

  GradReport r;
  double max_num = 0.0, max_dev = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor p = params[pi];
    const std::vector<double> analytic = p.grad();
    std::vector<double> vals = p.to_vector();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double orig = vals[i];
      vals[i] = orig + h;
      p.assign(vals);
      Tape up = Tape::inference();
      const double fp = loss(up).item();
      vals[i] = orig - h;
      p.assign(vals);
      Tape dn = Tape::inference();
      const double fm = loss(dn).item();
      vals[i] = orig;
      p.assign(vals);
      const double num = (fp - fm) / (2.0 * h);
      max_num = std::max(max_num, std::abs(num));
      r.max_analytic = std::max(r.max_analytic, std::abs(analytic[i]));
      const double dev = std::abs(analytic[i] - num);
      if (dev > max_dev) {
        max_dev = dev;
        r.worst = "param" + std::to_string(pi) + "[" + std::to_string(i) + "]";
      }
      ++r.checked;
    }
  }
  r.rel_err = max_dev / std::max(max_num, 1e-8);
  return r;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) return INFINITY;
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

inline double max_abs_diff(const Tensor& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return INFINITY;
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace support
