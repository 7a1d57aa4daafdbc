#include "drmn/deform_attn.hpp"

#include <string>

#include "drmn/errors.hpp"

namespace drmn {

DeformLayerParams DeformLayerParams::init(std::size_t channels, std::size_t heads,
                                          std::size_t points, double ffn_ratio, RngState& rng,
                                          double offset_bound) {
  DeformLayerParams p;
  p.channels = channels;
  p.heads = heads;
  p.points = points;
  p.ffn_ratio = ffn_ratio;
  if (heads == 0 || points == 0 || channels == 0 || channels % heads != 0) {
    throw ConfigError("deformable layer needs heads dividing channels and points >= 1");
  }
  const std::size_t samples = heads * p.levels * points;
  p.offset_weight = uniform_tensor({channels, samples * 2}, offset_bound, rng);
  p.offset_bias = Tensor::zeros({samples * 2}, true);
  p.attn_weight = xavier_uniform(channels, samples, rng);
  p.attn_bias = Tensor::zeros({samples}, true);
  p.value_weight = xavier_uniform(channels, channels, rng);
  p.value_bias = Tensor::zeros({channels}, true);
  p.output_weight = xavier_uniform(channels, channels, rng);
  p.output_bias = Tensor::zeros({channels}, true);
  p.norm = NormParams::init(channels);
  p.ffn = FfnParams::init(channels, ffn_hidden(channels, ffn_ratio), rng);
  return p;
}

void DeformLayerParams::validate() const {
  if (heads == 0 || channels % heads != 0) {
    throw ConfigError("value dimension per head must be exactly c / M");
  }
  const std::size_t samples = heads * levels * points;
  auto expect = [](const Tensor& t, Shape shape, const char* name) {
    if (t.shape() != shape) {
      throw DimensionError(std::string("deform layer ") + name + ": expected " +
                           shape_string(shape) + ", got " + shape_string(t.shape()));
    }
  };
  expect(offset_weight, {channels, samples * 2}, "offset_weight");
  expect(offset_bias, {samples * 2}, "offset_bias");
  expect(attn_weight, {channels, samples}, "attn_weight");
  expect(attn_bias, {samples}, "attn_bias");
  expect(value_weight, {channels, channels}, "value_weight");
  expect(value_bias, {channels}, "value_bias");
  expect(output_weight, {channels, channels}, "output_weight");
  expect(output_bias, {channels}, "output_bias");
}

void DeformLayerParams::append_named(NamedTensors& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".offset_weight", offset_weight);
  out.emplace_back(prefix + ".offset_bias", offset_bias);
  out.emplace_back(prefix + ".attn_weight", attn_weight);
  out.emplace_back(prefix + ".attn_bias", attn_bias);
  out.emplace_back(prefix + ".value_weight", value_weight);
  out.emplace_back(prefix + ".value_bias", value_bias);
  out.emplace_back(prefix + ".output_weight", output_weight);
  out.emplace_back(prefix + ".output_bias", output_bias);
  norm.append_named(out, prefix + ".norm");
  ffn.append_named(out, prefix + ".ffn");
}

void DeformLayerParams::load_named(const Bundle& bundle, const std::string& prefix) {
  load_into(offset_weight, bundle, prefix + ".offset_weight");
  load_into(offset_bias, bundle, prefix + ".offset_bias");
  load_into(attn_weight, bundle, prefix + ".attn_weight");
  load_into(attn_bias, bundle, prefix + ".attn_bias");
  load_into(value_weight, bundle, prefix + ".value_weight");
  load_into(value_bias, bundle, prefix + ".value_bias");
  load_into(output_weight, bundle, prefix + ".output_weight");
  load_into(output_bias, bundle, prefix + ".output_bias");
  norm.load_named(bundle, prefix + ".norm");
  ffn.load_named(bundle, prefix + ".ffn");
}

Tensor ms_deform_sample(Tape& tape, std::span<const Tensor> values,
                        std::span<const LevelShape> shapes, const Tensor& ref_points,
                        const Tensor& offsets, const Tensor& weights, std::size_t heads,
                        std::size_t points) {
  const std::size_t levels = values.size();
  if (levels == 0 || shapes.size() != levels) {
    throw DimensionError("ms_deform_sample: need one shape per value map");
  }
  const std::size_t c = values[0].cols();
  if (heads == 0 || c % heads != 0) throw DimensionError("ms_deform_sample: heads must divide c");
  const std::size_t dh = c / heads;
  const std::size_t rows = ref_points.rows();
  const std::size_t samples = heads * levels * points;
  if (ref_points.cols() != 2) throw DimensionError("ms_deform_sample: reference points must be rows x 2");
  if (offsets.rows() != rows || offsets.cols() != samples * 2) {
    throw DimensionError("ms_deform_sample: offsets " + shape_string(offsets.shape()) +
                         " do not match " + std::to_string(rows) + " x " + std::to_string(samples * 2));
  }
  if (weights.rows() != rows || weights.cols() != samples) {
    throw DimensionError("ms_deform_sample: weights " + shape_string(weights.shape()) +
                         " do not match " + std::to_string(rows) + " x " + std::to_string(samples));
  }
  for (std::size_t l = 0; l < levels; ++l) {
    if (values[l].cols() != c || values[l].rows() != shapes[l].cells()) {
      throw DimensionError("ms_deform_sample: value map " + std::to_string(l) + " is " +
                           shape_string(values[l].shape()));
    }
  }

  auto ref = ref_points.data();
  auto off = offsets.data();
  auto wts = weights.data();
  std::vector<detail::BilinearTap> taps(rows * samples);
  std::vector<double> out(rows * c, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t m = 0; m < heads; ++m) {
      double* dst = out.data() + r * c + m * dh;
      for (std::size_t l = 0; l < levels; ++l) {
        auto v = values[l].data();
        const std::size_t width = shapes[l].cols;
        for (std::size_t k = 0; k < points; ++k) {
          const std::size_t s = (m * levels + l) * points + k;
          const double py = ref[2 * r] + off[r * samples * 2 + 2 * s];
          const double px = ref[2 * r + 1] + off[r * samples * 2 + 2 * s + 1];
          auto& tap = taps[r * samples + s];
          tap = detail::bilinear_tap(py, px, shapes[l].rows, width);
          if (!tap.inside) continue;
          const double a = wts[r * samples + s];
          for (std::size_t q = 0; q < 4; ++q) {
            const double wq = a * tap.w[q];
            if (wq == 0.0) continue;
            const double* src = v.data() + tap.corner(q, width) * c + m * dh;
            for (std::size_t ch = 0; ch < dh; ++ch) dst[ch] += wq * src[ch];
          }
        }
      }
    }
  }

  std::vector<Tensor> inputs(values.begin(), values.end());
  inputs.push_back(offsets);
  inputs.push_back(weights);
  inputs.push_back(ref_points);
  std::vector<Tensor> value_maps(values.begin(), values.end());
  std::vector<LevelShape> level_shapes(shapes.begin(), shapes.end());
  return tape.record(
      "ms_deform_sample", {rows, c}, std::move(out), std::move(inputs),
      [value_maps = std::move(value_maps), level_shapes = std::move(level_shapes), offsets, weights, ref_points,
       taps = std::move(taps), rows, c, dh, heads, levels, points, samples](
          std::span<const double> g) {
        auto wts = weights.data();
        double* g_off = Tape::grad_buffer(offsets);
        double* g_w = Tape::grad_buffer(weights);
        double* g_ref = Tape::grad_buffer(ref_points);
        std::vector<double*> g_val(levels);
        for (std::size_t l = 0; l < levels; ++l) g_val[l] = Tape::grad_buffer(value_maps[l]);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t m = 0; m < heads; ++m) {
            const double* go = g.data() + r * c + m * dh;
            for (std::size_t l = 0; l < levels; ++l) {
              auto v = value_maps[l].data();
              const std::size_t width = level_shapes[l].cols;
              for (std::size_t k = 0; k < points; ++k) {
                const std::size_t s = (m * levels + l) * points + k;
                const auto& tap = taps[r * samples + s];
                if (!tap.inside) continue;
                const double a = wts[r * samples + s];
                double sampled_dot = 0.0, dy = 0.0, dx = 0.0;
                for (std::size_t q = 0; q < 4; ++q) {
                  const std::size_t cell = tap.corner(q, width);
                  const double* src = v.data() + cell * c + m * dh;
                  double dot = 0.0;
                  for (std::size_t ch = 0; ch < dh; ++ch) dot += src[ch] * go[ch];
                  sampled_dot += tap.w[q] * dot;
                  dy += tap.dwy[q] * dot;
                  dx += tap.dwx[q] * dot;
                  if (g_val[l] && tap.w[q] != 0.0) {
                    double* gv = g_val[l] + cell * c + m * dh;
                    const double wq = a * tap.w[q];
                    for (std::size_t ch = 0; ch < dh; ++ch) gv[ch] += wq * go[ch];
                  }
                }
                if (g_w) g_w[r * samples + s] += sampled_dot;
                if (g_off) {
                  g_off[r * samples * 2 + 2 * s] += a * dy;
                  g_off[r * samples * 2 + 2 * s + 1] += a * dx;
                }
                if (g_ref) {
                  g_ref[r * 2] += a * dy;
                  g_ref[r * 2 + 1] += a * dx;
                }
              }
            }
          }
        }
      });
}

DeformResult deform_layer_detailed(Tape& tape, const DeformInput& input,
                                   const DeformLayerParams& params, const DeformOptions& opts,
                                   RngState& rng) {
  if (input.maps == nullptr) throw ContractError("deform_layer: no sampling maps");
  const LevelMaps& maps = *input.maps;
  const Tensor& q = input.queries;
  if (q.rank() != 2 || q.cols() != params.channels) {
    throw DimensionError("deform_layer: queries " + shape_string(q.shape()) + " for c = " +
                         std::to_string(params.channels));
  }
  if (input.ref_points.rank() != 2 || input.ref_points.rows() != q.rows() ||
      input.ref_points.cols() != 2) {
    throw ContractError("deform_layer: need exactly one reference point per query row (" +
                        std::to_string(q.rows()) + " queries, reference points " +
                        shape_string(input.ref_points.shape()) + ")");
  }
  if (maps.maps.size() != params.levels || maps.shapes.size() != params.levels) {
    throw DimensionError("deform_layer: expected " + std::to_string(params.levels) + " levels");
  }
  params.validate();

  const std::size_t rows = q.rows();
  const std::size_t samples = params.heads * params.samples_per_head();

  // Offsets and attention weights are both conditioned on the query.
  Tensor offsets = linear(tape, q, params.offset_weight, params.offset_bias);
  Tensor logits = linear(tape, q, params.attn_weight, params.attn_bias);
  logits = reshape(tape, logits, {rows * params.heads, params.samples_per_head()});
  Tensor weights = reshape(tape, softmax(tape, logits, 1), {rows, samples});

  std::vector<Tensor> values;
  values.reserve(params.levels);
  for (const Tensor& f : maps.maps) values.push_back(linear(tape, f, params.value_weight, params.value_bias));

  Tensor sampled = ms_deform_sample(tape, values, maps.shapes, input.ref_points, offsets, weights,
                                    params.heads, params.points);
  Tensor attended = linear(tape, sampled, params.output_weight, params.output_bias);

  Tensor mixed = add(tape, attended, dropout(tape, attended, opts.dropout, rng, opts.training));
  Tensor normed = norm(tape, mixed, params.norm, opts.norm_eps);
  Tensor out = feed_forward(tape, normed, params.ffn);
  if (opts.ffn_residual) out = add(tape, normed, out);

  std::vector<double> loc(rows * samples * 2);
  auto off = offsets.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t s = 0; s < samples; ++s) {
      loc[(r * samples + s) * 2] = input.ref_points(r, 0) + off[(r * samples + s) * 2];
      loc[(r * samples + s) * 2 + 1] = input.ref_points(r, 1) + off[(r * samples + s) * 2 + 1];
    }
  }
  return {out, attended, weights, Tensor::matrix(rows, samples * 2, std::move(loc))};
}

Tensor deform_layer(Tape& tape, const DeformInput& input, const DeformLayerParams& params,
                    const DeformOptions& opts, RngState& rng) {
  return deform_layer_detailed(tape, input, params, opts, rng).output;
}

Tensor stack_encoder(Tape& tape, const Tensor& queries, const LevelMaps& maps,
                     const Tensor& ref_points, std::span<const DeformLayerParams> layers,
                     const DeformOptions& opts, RngState& rng) {
  Tensor x = queries;
  for (const DeformLayerParams& layer : layers) {
    x = deform_layer(tape, DeformInput{x, &maps, ref_points}, layer, opts, rng);
  }
  return x;
}

}  // namespace drmn
