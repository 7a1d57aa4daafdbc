#include "drmn/layers.hpp"

#include <cmath>

#include "drmn/errors.hpp"

namespace drmn {

Tensor uniform_tensor(Shape shape, double bound, RngState& rng) {
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = rng.uniform(-bound, bound);
  return Tensor(std::move(shape), std::move(v), true);
}

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, RngState& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return uniform_tensor({fan_in, fan_out}, bound, rng);
}

NormParams NormParams::init(std::size_t channels) {
  return {Tensor::full({channels}, 1.0, true), Tensor::zeros({channels}, true)};
}

void NormParams::append_named(NamedTensors& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".scale", scale);
  out.emplace_back(prefix + ".shift", shift);
}

void NormParams::load_named(const Bundle& bundle, const std::string& prefix) {
  load_into(scale, bundle, prefix + ".scale");
  load_into(shift, bundle, prefix + ".shift");
}

FfnParams FfnParams::init(std::size_t channels, std::size_t hidden, RngState& rng) {
  FfnParams p;
  p.w1 = xavier_uniform(channels, hidden, rng);
  p.b1 = Tensor::zeros({hidden}, true);
  p.w2 = xavier_uniform(hidden, channels, rng);
  p.b2 = Tensor::zeros({channels}, true);
  return p;
}

void FfnParams::append_named(NamedTensors& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".w1", w1);
  out.emplace_back(prefix + ".b1", b1);
  out.emplace_back(prefix + ".w2", w2);
  out.emplace_back(prefix + ".b2", b2);
}

void FfnParams::load_named(const Bundle& bundle, const std::string& prefix) {
  load_into(w1, bundle, prefix + ".w1");
  load_into(b1, bundle, prefix + ".b1");
  load_into(w2, bundle, prefix + ".w2");
  load_into(b2, bundle, prefix + ".b2");
}

Tensor norm(Tape& tape, const Tensor& x, const NormParams& p, double eps) {
  return layer_norm(tape, x, p.scale, p.shift, x.rank() - 1, eps);
}

Tensor feed_forward(Tape& tape, const Tensor& x, const FfnParams& p) {
  Tensor hidden = relu(tape, linear(tape, x, p.w1, p.b1));
  return linear(tape, hidden, p.w2, p.b2);
}

std::size_t ffn_hidden(std::size_t channels, double ratio) {
  if (!(ratio > 0.0)) throw ConfigError("ffn ratio must be positive");
  const auto hidden = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(channels)));
  if (hidden == 0) throw ConfigError("ffn hidden width rounds to zero");
  return hidden;
}

void load_into(Tensor& dst, const Bundle& bundle, const std::string& name) {
  const Tensor& src = bundle.at(name);
  if (src.shape() != dst.shape()) {
    throw IoError("checkpoint tensor '" + name + "' has shape " + shape_string(src.shape()) +
                  ", model expects " + shape_string(dst.shape()));
  }
  dst.assign(src.data());
}

}  // namespace drmn
