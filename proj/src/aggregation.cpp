#include "drmn/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "drmn/errors.hpp"
#include "drmn/matching.hpp"

namespace drmn {

Selection topk_select(const Tensor& h, std::size_t k) {
  if (h.rank() != 2) throw DimensionError("topk_select: H must be a matrix");
  const std::size_t n = h.rows(), cells = h.cols();
  if (k == 0 || k > cells) {
    throw ConfigError("top-k size " + std::to_string(k) + " must be in [1, " +
                      std::to_string(cells) + "]");
  }
  auto v = h.data();
  Selection out(n);
  std::vector<std::size_t> idx(cells);
  for (std::size_t j = 0; j < n; ++j) {
    const double* row = v.data() + j * cells;
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [row](std::size_t a, std::size_t b) {
                        return row[a] > row[b] || (row[a] == row[b] && a < b);
                      });
    out[j].assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return out;
}

CrossAttnParams CrossAttnParams::init(std::size_t channels, std::size_t heads, double ffn_ratio,
                                      RngState& rng) {
  if (heads == 0 || channels % heads != 0) {
    throw ConfigError("cross-attention heads must divide the channel count");
  }
  CrossAttnParams p;
  p.channels = channels;
  p.heads = heads;
  p.ffn_ratio = ffn_ratio;
  const std::size_t dh = channels / heads;
  for (std::size_t m = 0; m < heads; ++m) {
    p.wq.push_back(xavier_uniform(dh, dh, rng));
    p.wk.push_back(xavier_uniform(dh, dh, rng));
    p.wv.push_back(xavier_uniform(dh, dh, rng));
  }
  p.output_weight = xavier_uniform(channels, channels, rng);
  p.output_bias = Tensor::zeros({channels}, true);
  p.norm = NormParams::init(channels);
  p.ffn = FfnParams::init(channels, ffn_hidden(channels, ffn_ratio), rng);
  return p;
}

void CrossAttnParams::validate() const {
  if (heads == 0 || channels % heads != 0) {
    throw ConfigError("cross-attention head dim must be exactly c / M");
  }
  const std::size_t dh = channels / heads;
  if (wq.size() != heads || wk.size() != heads || wv.size() != heads) {
    throw DimensionError("cross-attention: one projection triple per head");
  }
  for (std::size_t m = 0; m < heads; ++m) {
    for (const Tensor* t : {&wq[m], &wk[m], &wv[m]}) {
      if (t->shape() != Shape{dh, dh}) {
        throw DimensionError("cross-attention head projection " + shape_string(t->shape()));
      }
    }
  }
  if (output_weight.shape() != Shape{channels, channels}) {
    throw DimensionError("cross-attention output projection " + shape_string(output_weight.shape()));
  }
}

void CrossAttnParams::append_named(NamedTensors& out, const std::string& prefix) const {
  for (std::size_t m = 0; m < heads; ++m) {
    const std::string h = prefix + ".head" + std::to_string(m);
    out.emplace_back(h + ".wq", wq[m]);
    out.emplace_back(h + ".wk", wk[m]);
    out.emplace_back(h + ".wv", wv[m]);
  }
  out.emplace_back(prefix + ".output_weight", output_weight);
  out.emplace_back(prefix + ".output_bias", output_bias);
  norm.append_named(out, prefix + ".norm");
  ffn.append_named(out, prefix + ".ffn");
}

void CrossAttnParams::load_named(const Bundle& bundle, const std::string& prefix) {
  for (std::size_t m = 0; m < heads; ++m) {
    const std::string h = prefix + ".head" + std::to_string(m);
    load_into(wq[m], bundle, h + ".wq");
    load_into(wk[m], bundle, h + ".wk");
    load_into(wv[m], bundle, h + ".wv");
  }
  load_into(output_weight, bundle, prefix + ".output_weight");
  load_into(output_bias, bundle, prefix + ".output_bias");
  norm.load_named(bundle, prefix + ".norm");
  ffn.load_named(bundle, prefix + ".ffn");
}

CrossAttnResult cross_attend_detailed(Tape& tape, const Tensor& phrase, const Tensor& pixels,
                                      const CrossAttnParams& params, const DeformOptions& opts,
                                      RngState& rng) {
  params.validate();
  const std::size_t c = params.channels;
  if (phrase.rank() != 2 || phrase.rows() != 1 || phrase.cols() != c) {
    throw DimensionError("cross_attend: phrase row " + shape_string(phrase.shape()));
  }
  if (pixels.rank() != 2 || pixels.cols() != c || pixels.rows() == 0) {
    throw DimensionError("cross_attend: pixel rows " + shape_string(pixels.shape()));
  }
  const std::size_t dh = params.head_dim();
  const double inv_sqrt_c = 1.0 / std::sqrt(static_cast<double>(c));

  CrossAttnResult res;
  std::vector<Tensor> heads;
  for (std::size_t m = 0; m < params.heads; ++m) {
    Tensor q = matmul(tape, slice_cols(tape, phrase, m * dh, dh), params.wq[m]);
    Tensor kv = slice_cols(tape, pixels, m * dh, dh);
    Tensor k = matmul(tape, kv, params.wk[m]);
    Tensor v = matmul(tape, kv, params.wv[m]);
    Tensor logits = scale(tape, matmul(tape, q, transpose(tape, k)), inv_sqrt_c);
    Tensor a = softmax(tape, logits, 1);
    res.weights.push_back(a);
    heads.push_back(matmul(tape, a, v));
  }
  res.attended = linear(tape, concat_cols(tape, heads), params.output_weight, params.output_bias);

  Tensor gbar = dropout(tape, add(tape, res.attended, phrase), opts.dropout, rng, opts.training);
  Tensor normed = norm(tape, add(tape, phrase, gbar), params.norm, opts.norm_eps);
  res.row = feed_forward(tape, normed, params.ffn);
  if (opts.ffn_residual) res.row = add(tape, normed, res.row);
  return res;
}

Tensor cross_attend(Tape& tape, const Tensor& phrase, const Tensor& pixels,
                    const CrossAttnParams& params, const DeformOptions& opts, RngState& rng) {
  return cross_attend_detailed(tape, phrase, pixels, params, opts, rng).row;
}

Tensor inject_phrase(Tape& tape, const Tensor& fhat, std::span<const std::size_t> s,
                     const Tensor& pos_rows, const Tensor& phrase) {
  if (pos_rows.rank() != 2 || pos_rows.rows() != s.size() || pos_rows.cols() != fhat.cols()) {
    throw DimensionError("inject_phrase: positional rows " + shape_string(pos_rows.shape()));
  }
  if (phrase.size() != fhat.cols()) {
    throw DimensionError("inject_phrase: phrase " + shape_string(phrase.shape()));
  }
  Tensor rows = add(tape, gather_rows(tape, fhat, s), pos_rows);
  rows = add_row(tape, rows, reshape(tape, phrase, {fhat.cols()}));
  return scatter_rows(tape, fhat, s, rows);
}

Tensor refine_pixels(Tape& tape, const Tensor& fhat, std::span<const std::size_t> s,
                     const LevelMaps& maps, const Tensor& ref_points,
                     const DeformLayerParams& params, const DeformOptions& opts, RngState& rng) {
  Tensor rows = gather_rows(tape, fhat, s);
  Tensor ref = gather_rows(tape, ref_points, s);
  Tensor refined = deform_layer(tape, DeformInput{rows, &maps, ref}, params, opts, rng);
  return scatter_rows(tape, fhat, s, refined);
}

MatchState begin_rounds(Tape& tape, const Tensor& fused, LevelShape shape, const Tensor& phrases,
                        std::size_t height, std::size_t width) {
  MatchState st;
  st.fhat = fused;
  st.shape = shape;
  st.ref_points = make_grid(shape);
  st.ghat = phrases;
  st.height = height;
  st.width = width;
  st.h = similarity(tape, phrases, fused);
  st.history.push_back(upsample_similarity(tape, st.h, shape, height, width));
  return st;
}

void run_rounds(Tape& tape, MatchState& state, const RoundSpec& spec, RngState& rng) {
  if (spec.maps == nullptr || spec.pos == nullptr) throw ContractError("run_rounds: incomplete spec");
  if (spec.refine.size() != spec.cross.size()) {
    throw ContractError("run_rounds: refine and cross-attention parameters per round differ in count");
  }
  Tape inference = Tape::inference();
  const Tensor pos_all = spec.pos->encode(state.ref_points);
  const std::size_t n = state.ghat.rows();
  for (std::size_t r = 0; r < spec.refine.size(); ++r) {
    state.selection = topk_select(state.h, spec.k);
    for (std::size_t j = 0; j < n; ++j) {
      const auto& s = state.selection[j];
      Tensor g_row = slice_rows(tape, state.ghat, j, 1);
      Tensor pos_rows = gather_rows(inference, pos_all, s);
      state.fhat = inject_phrase(tape, state.fhat, s, pos_rows, g_row);
      state.fhat = refine_pixels(tape, state.fhat, s, *spec.maps, state.ref_points,
                                 *spec.refine[r], spec.opts, rng);
      Tensor keys = gather_rows(tape, state.fhat, s);
      Tensor updated = cross_attend(tape, g_row, keys, *spec.cross[r], spec.opts, rng);
      const std::size_t jj[1] = {j};
      state.ghat = scatter_rows(tape, state.ghat, jj, updated);
    }
    state.h = similarity(tape, state.ghat, state.fhat);
    state.history.push_back(upsample_similarity(tape, state.h, state.shape, state.height, state.width));
    ++state.round;
  }
}

}  // namespace drmn
