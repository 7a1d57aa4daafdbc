#include <doctest.h>

#include "drmn/aggregation.hpp"
#include "drmn/errors.hpp"
#include "drmn/matching.hpp"
#include "drmn/model.hpp"
#include "fixtures.hpp"

using namespace drmn;
using support::inf;
using support::random_tensor;

namespace {

DeformOptions no_dropout() {
  DeformOptions o;
  o.training = false;
  return o;
}

ModelConfig tiny_config(std::size_t rounds) {
  ModelConfig c;
  c.height = c.width = 32;
  c.channels = 8;
  c.phrase_dim = 8;
  c.heads = 2;
  c.points = 2;
  c.encoder_layers = 1;
  c.rounds = rounds;
  c.topk = 3;
  return c;
}

}  // namespace

TEST_CASE("topk_select") {
  const Tensor h = Tensor::matrix(2, 3, {0.1, 0.9, 0.5, 0.3, 0.3, 0.3});
  const Selection s = topk_select(h, 2);
  CHECK(s[0] == std::vector<std::size_t>{1, 2});
  CHECK(s[1] == std::vector<std::size_t>{0, 1});
  CHECK(topk_select(h, 3)[0] == std::vector<std::size_t>{1, 2, 0});
  CHECK_THROWS_AS(topk_select(h, 0), ConfigError);
  CHECK_THROWS_AS(topk_select(h, 4), ConfigError);

  RngState rng(1);
  const Tensor r = random_tensor({3, 40}, rng);
  const Selection sel = topk_select(r, 7);
  for (std::size_t j = 0; j < 3; ++j) {
    std::vector<double> row(r.data().begin() + j * 40, r.data().begin() + (j + 1) * 40);
    CHECK(sel[j] == ref::topk(row, 7));
  }
}

TEST_CASE("inject_phrase") {
  RngState rng(2);
  const Tensor f = random_tensor({10, 4}, rng);
  const std::vector<std::size_t> s{3, 7, 1};
  CHECK(inject_phrase(inf(), f, s, Tensor::zeros({3, 4}), Tensor::zeros({1, 4})).to_vector() == f.to_vector());

  const std::vector<std::size_t> one{4};
  const Tensor out = inject_phrase(inf(), f, one, random_tensor({1, 4}, rng), random_tensor({1, 4}, rng));
  std::size_t changed = 0;
  for (std::size_t r = 0; r < 10; ++r) {
    bool diff = false;
    for (std::size_t c = 0; c < 4; ++c) diff |= out(r, c) != f(r, c);
    changed += diff;
    if (r != 4) CHECK_FALSE(diff);
  }
  CHECK(changed == 1);

  const Tensor pos = random_tensor({3, 4}, rng);
  const Tensor g = random_tensor({1, 4}, rng);
  const Tensor o2 = inject_phrase(inf(), f, s, pos, g);
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t c = 0; c < 4; ++c) CHECK(o2(s[a], c) == f(s[a], c) + pos(a, c) + g[c]);
  }
}

TEST_CASE("refine_pixels touches only the selection") {
  RngState rng(3);
  const std::size_t c = 8;
  auto p = DeformLayerParams::init(c, 2, 2, 2.0, rng);
  fixtures::randomize(p, rng);
  const LevelMaps maps = fixtures::random_levels(32, 32, c, rng);
  const Tensor f = random_tensor({16, c}, rng);
  const Tensor refs = make_grid({4, 4});
  const std::vector<std::size_t> s{5, 0, 11};
  RngState r1(1), r2(1);
  const Tensor out = refine_pixels(inf(), f, s, maps, refs, p, no_dropout(), r1);
  const Tensor direct = deform_layer(inf(), {gather_rows(inf(), f, s), &maps, gather_rows(inf(), refs, s)}, p,
                                     no_dropout(), r2);
  for (std::size_t r = 0; r < 16; ++r) {
    const auto it = std::find(s.begin(), s.end(), r);
    for (std::size_t ch = 0; ch < c; ++ch) {
      if (it == s.end()) {
        CHECK(out(r, ch) == f(r, ch));
      } else {
        CHECK(out(r, ch) == direct(static_cast<std::size_t>(it - s.begin()), ch));
      }
    }
  }

  // zero offsets and identity value/output maps: the layer's attended rows
  // are the mean cross-level read at each selected point
  auto z = DeformLayerParams::init(c, 2, 1, 2.0, rng);
  z.offset_weight.assign(std::vector<double>(z.offset_weight.size(), 0.0));
  z.attn_weight.assign(std::vector<double>(z.attn_weight.size(), 0.0));
  std::vector<double> id(c * c, 0.0);
  for (std::size_t i = 0; i < c; ++i) id[i * c + i] = 1.0;
  z.value_weight.assign(id);
  z.output_weight.assign(id);
  RngState r3(1);
  const DeformResult d =
      deform_layer_detailed(inf(), {gather_rows(inf(), f, s), &maps, gather_rows(inf(), refs, s)}, z, no_dropout(), r3);
  const auto lv = fixtures::to_ref(maps);
  for (std::size_t a = 0; a < s.size(); ++a) {
    std::vector<double> want(c, 0.0);
    for (const auto& l : lv) {
      const auto v = ref::bilinear(l.map, l.rows, l.cols, 0, c, refs(s[a], 0), refs(s[a], 1));
      for (std::size_t ch = 0; ch < c; ++ch) want[ch] += v[ch] / 4.0;
    }
    for (std::size_t ch = 0; ch < c; ++ch) CHECK(std::abs(d.attended(a, ch) - want[ch]) < 1e-13);
  }
}

TEST_CASE("disjoint selections commute") {
  RngState rng(4);
  const std::size_t c = 8;
  auto p = DeformLayerParams::init(c, 2, 2, 2.0, rng);
  fixtures::randomize(p, rng);
  const LevelMaps maps = fixtures::random_levels(32, 32, c, rng);
  const Tensor f = random_tensor({16, c}, rng);
  const Tensor refs = make_grid({4, 4});
  const std::vector<std::size_t> s1{1, 2, 9}, s2{4, 15, 0};
  const Tensor pos1 = random_tensor({3, c}, rng), pos2 = random_tensor({3, c}, rng);
  const Tensor g1 = random_tensor({1, c}, rng), g2 = random_tensor({1, c}, rng);
  auto step = [&](const Tensor& x, const std::vector<std::size_t>& s, const Tensor& pos, const Tensor& g) {
    RngState r(0);
    return refine_pixels(inf(), inject_phrase(inf(), x, s, pos, g), s, maps, refs, p, no_dropout(), r);
  };
  const Tensor ab = step(step(f, s1, pos1, g1), s2, pos2, g2);
  const Tensor ba = step(step(f, s2, pos2, g2), s1, pos1, g1);
  CHECK(ab.to_vector() == ba.to_vector());
}

TEST_CASE("cross attention") {
  RngState rng(5);
  const std::size_t c = 8;
  auto p = CrossAttnParams::init(c, 2, 2.0, rng);
  fixtures::randomize(p, rng);

  SUBCASE("single key") {
    const Tensor g = random_tensor({1, c}, rng);
    const Tensor key = random_tensor({1, c}, rng);
    RngState r(0);
    const CrossAttnResult res = cross_attend_detailed(inf(), g, key, p, no_dropout(), r);
    for (const auto& w : res.weights) CHECK(w.item() == 1.0);
    std::vector<double> heads;
    for (std::size_t m = 0; m < 2; ++m) {
      std::vector<double> part(key.data().begin() + m * 4, key.data().begin() + (m + 1) * 4);
      const auto v = ref::vec_mat(part, p.wv[m]);
      heads.insert(heads.end(), v.begin(), v.end());
    }
    CHECK(support::max_abs_diff(res.attended, ref::affine(heads, p.output_weight, p.output_bias)) < 1e-14);
  }
  SUBCASE("identical keys") {
    const Tensor g = random_tensor({1, c}, rng);
    const Tensor row = random_tensor({1, c}, rng);
    const std::vector<Tensor> rows(5, row);
    RngState r(0);
    const CrossAttnResult res = cross_attend_detailed(inf(), g, concat_rows(inf(), rows), p, no_dropout(), r);
    for (const auto& w : res.weights) {
      for (double v : w.to_vector()) CHECK(std::abs(v - 0.2) < 1e-15);
    }
  }
  SUBCASE("hand evaluation, one head") {
    auto p1 = CrossAttnParams::init(c, 1, 2.0, rng);
    fixtures::randomize(p1, rng);
    const Tensor g = random_tensor({1, c}, rng);
    const Tensor keys = random_tensor({3, c}, rng);
    RngState r(0);
    const CrossAttnResult res = cross_attend_detailed(inf(), g, keys, p1, no_dropout(), r);
    const auto want = ref::cross(ref::Mat(g).row(0), ref::Mat(keys), p1, false, 1e-6);
    CHECK(support::max_abs_diff(res.weights[0], want.weights[0]) < 1e-10);
    CHECK(support::max_abs_diff(res.row, want.row) < 1e-10);
  }
  SUBCASE("two heads with residual FFN") {
    const Tensor g = random_tensor({1, c}, rng);
    const Tensor keys = random_tensor({6, c}, rng);
    DeformOptions o = no_dropout();
    o.ffn_residual = true;
    RngState r(0);
    const Tensor got = cross_attend(inf(), g, keys, p, o, r);
    CHECK(support::max_abs_diff(got, ref::cross(ref::Mat(g).row(0), ref::Mat(keys), p, true, 1e-6).row) < 1e-10);
  }
  SUBCASE("gradients") {
    const Tensor g = random_tensor({1, c}, rng, -1, 1, true);
    const Tensor keys = random_tensor({4, c}, rng, -1, 1, true);
    NamedTensors named;
    p.append_named(named, "x");
    auto params = fixtures::tensors_of(named);
    params.push_back(g);
    params.push_back(keys);
    DeformOptions o;
    o.training = true;
    o.dropout = 0.2;
    const auto rep = support::gradcheck(
        [&](Tape& t) {
          RngState r(8);
          return support::project_to_scalar(t, cross_attend(t, g, keys, p, o, r));
        },
        params);
    CAPTURE(rep.worst);
    CHECK(rep.rel_err < 1e-4);
  }
}

TEST_CASE("rounds") {
  RngState rng(6);
  const FeaturePyramid pyr = fixtures::random_pyramid(32, 32, 8, rng);
  const Tensor phrases = random_tensor({2, 8}, rng);

  SUBCASE("no rounds keeps only the initial map") {
    RngState init(1);
    Model m = Model::init(tiny_config(0), init);
    fixtures::randomize(m, rng);
    RngState r(0);
    const ForwardResult f = forward(inf(), m, pyr, phrases, r, false);
    REQUIRE(f.history.size() == 1);
    const auto want = ref::alg1(m, pyr, phrases);
    CHECK(support::max_abs_diff(f.history[0], want.history[0].v) < 1e-10);
  }
  SUBCASE("frozen parameters and seed give identical maps") {
    RngState init(2);
    const Model m = Model::init(tiny_config(1), init);
    RngState a(3), b(3);
    const auto x = forward(inf(), m, pyr, phrases, a, true);
    const auto y = forward(inf(), m, pyr, phrases, b, true);
    REQUIRE(x.history.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) CHECK(x.history[i].to_vector() == y.history[i].to_vector());
  }
  SUBCASE("two rounds against the straight-line transcription") {
    for (Sharing sh : {Sharing::rounds, Sharing::per_round, Sharing::encoder}) {
      CAPTURE(to_string(sh));
      ModelConfig cfg = tiny_config(2);
      cfg.sharing = sh;
      RngState init(4);
      Model m = Model::init(cfg, init);
      fixtures::randomize(m, rng);
      RngState r(0);
      const ForwardResult f = forward(inf(), m, pyr, phrases, r, false);
      const auto want = ref::alg1(m, pyr, phrases);
      REQUIRE(f.history.size() == 3);
      for (std::size_t i = 0; i < 3; ++i) {
        CHECK(f.history[i].shape() == Shape{2, 32 * 32});
        CHECK(support::max_abs_diff(f.history[i], want.history[i].v) < 1e-10);
      }
      CHECK(support::max_abs_diff(f.state.ghat, want.ghat.v) < 1e-10);
      CHECK(support::max_abs_diff(f.state.fhat, want.fhat.v) < 1e-10);
    }
  }
  SUBCASE("run_rounds bookkeeping") {
    RngState init(5);
    const Model m = Model::init(tiny_config(2), init);
    RngState r(0);
    const ForwardResult f = forward(inf(), m, pyr, phrases, r, false);
    CHECK(f.state.round == 2);
    CHECK(f.state.history.size() == 3);
    REQUIRE(f.state.selection.size() == 2);
    for (const auto& s : f.state.selection) CHECK(s.size() == 3);
  }
}
