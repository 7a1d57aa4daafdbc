#pragma once

#include <cstddef>
#include <string>

#include "drmn/dtf.hpp"
#include "drmn/ops.hpp"
#include "drmn/rng.hpp"

namespace drmn {

/// W ~ U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, RngState& rng);
Tensor uniform_tensor(Shape shape, double bound, RngState& rng);

struct NormParams {
  Tensor scale;
  Tensor shift;

  static NormParams init(std::size_t channels);
  void append_named(NamedTensors& out, const std::string& prefix) const;
  void load_named(const Bundle& bundle, const std::string& prefix);
};

/// Two-layer perceptron relu(x W1 + b1) W2 + b2 with hidden width r * c.
struct FfnParams {
  Tensor w1, b1, w2, b2;

  static FfnParams init(std::size_t channels, std::size_t hidden, RngState& rng);
  void append_named(NamedTensors& out, const std::string& prefix) const;
  void load_named(const Bundle& bundle, const std::string& prefix);
};

Tensor norm(Tape& tape, const Tensor& x, const NormParams& p, double eps);
Tensor feed_forward(Tape& tape, const Tensor& x, const FfnParams& p);

/// Hidden width of a feed-forward block for ratio r.
std::size_t ffn_hidden(std::size_t channels, double ratio);

/// Load `name` from a bundle into an existing tensor, keeping its grad flag.
void load_into(Tensor& dst, const Bundle& bundle, const std::string& name);

}  // namespace drmn
