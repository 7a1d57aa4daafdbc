#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "drmn/dataset.hpp"
#include "drmn/losses.hpp"
#include "drmn/matching.hpp"
#include "drmn/train.hpp"
#include "fixtures.hpp"

// Finite-difference cases shared by the unit tests and the acceptance run.
// Lambdas capture by value; tensor copies share storage with `params`.
namespace grad_cases {

using namespace drmn;
using support::project_to_scalar;
using support::random_tensor;

struct Case {
  std::string name;
  std::function<Tensor(Tape&)> loss;
  std::vector<Tensor> params;
};

inline std::vector<Case> primitives(std::uint64_t seed) {
  RngState rng(seed);
  const Tensor a = random_tensor({3, 4}, rng, -1, 1, true);
  const Tensor b = random_tensor({3, 4}, rng, -1, 1, true);
  const Tensor w = random_tensor({4, 5}, rng, -1, 1, true);
  const Tensor bias = random_tensor({5}, rng, -1, 1, true);
  const Tensor row = random_tensor({4}, rng, -1, 1, true);
  const Tensor sc = random_tensor({4}, rng, 0.5, 1.5, true);
  const Tensor sh = random_tensor({4}, rng, -1, 1, true);
  // relu inputs kept away from the kink
  std::vector<double> rv;
  for (int i = 0; i < 12; ++i) rv.push_back((rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(0.1, 1.0));
  const Tensor r = Tensor::matrix(3, 4, rv, true);
  const std::vector<std::size_t> idx{2, 0};
  const Tensor rows = random_tensor({2, 4}, rng, -1, 1, true);
  const Tensor map = random_tensor({4, 5, 3}, rng, -1, 1, true);
  std::vector<double> pts;
  for (int i = 0; i < 20; ++i) {
    pts.push_back(rng.uniform(0.15, 0.85));
    pts.push_back(rng.uniform(0.12, 0.88));
  }
  const Tensor p = Tensor::matrix(20, 2, pts, true);

  return {
      {"add", [=](Tape& t) { return project_to_scalar(t, add(t, a, b)); }, {a, b}},
      {"sub", [=](Tape& t) { return project_to_scalar(t, sub(t, a, b)); }, {a, b}},
      {"mul", [=](Tape& t) { return project_to_scalar(t, mul(t, a, b)); }, {a, b}},
      {"scale", [=](Tape& t) { return project_to_scalar(t, scale(t, a, -1.7)); }, {a}},
      {"add_row", [=](Tape& t) { return project_to_scalar(t, add_row(t, a, row)); }, {a, row}},
      {"matmul", [=](Tape& t) { return project_to_scalar(t, matmul(t, a, w)); }, {a, w}},
      {"transpose", [=](Tape& t) { return project_to_scalar(t, transpose(t, a)); }, {a}},
      {"linear", [=](Tape& t) { return project_to_scalar(t, linear(t, a, w, bias)); }, {a, w, bias}},
      {"relu", [=](Tape& t) { return project_to_scalar(t, relu(t, r)); }, {r}},
      {"sigmoid", [=](Tape& t) { return project_to_scalar(t, sigmoid(t, a)); }, {a}},
      {"softmax0", [=](Tape& t) { return project_to_scalar(t, softmax(t, a, 0)); }, {a}},
      {"softmax1", [=](Tape& t) { return project_to_scalar(t, softmax(t, a, 1)); }, {a}},
      {"layer_norm", [=](Tape& t) { return project_to_scalar(t, layer_norm(t, a, sc, sh, 1, 1e-6)); }, {a, sc, sh}},
      {"dropout",
       [=](Tape& t) {
         RngState d(77);
         return project_to_scalar(t, dropout(t, a, 0.4, d, true));
       },
       {a}},
      {"reshape", [=](Tape& t) { return project_to_scalar(t, reshape(t, a, {2, 6})); }, {a}},
      {"concat_rows",
       [=](Tape& t) {
         const std::vector<Tensor> parts{a, b};
         return project_to_scalar(t, concat_rows(t, parts));
       },
       {a, b}},
      {"concat_cols",
       [=](Tape& t) {
         const std::vector<Tensor> parts{a, b};
         return project_to_scalar(t, concat_cols(t, parts));
       },
       {a, b}},
      {"slice_rows", [=](Tape& t) { return project_to_scalar(t, slice_rows(t, a, 1, 2)); }, {a}},
      {"slice_cols", [=](Tape& t) { return project_to_scalar(t, slice_cols(t, a, 1, 2)); }, {a}},
      {"gather_rows", [=](Tape& t) { return project_to_scalar(t, gather_rows(t, a, idx)); }, {a}},
      {"scatter_rows", [=](Tape& t) { return project_to_scalar(t, scatter_rows(t, a, idx, rows)); }, {a, rows}},
      {"sum", [=](Tape& t) { return scale(t, sum(t, mul(t, a, a)), 0.5); }, {a}},
      {"mean", [=](Tape& t) { return mean(t, mul(t, a, b)); }, {a, b}},
      {"bilinear_sample", [=](Tape& t) { return project_to_scalar(t, bilinear_sample(t, map, p)); }, {map, p}},
  };
}

/// h = w = 32, c = 8, M = 2, T = 1, I = 1, k = 3, two phrases; loss over
/// every parameter of the model.
inline Case end_to_end(std::uint64_t seed) {
  ModelConfig mc;
  mc.height = mc.width = 32;
  mc.channels = mc.phrase_dim = 8;
  mc.heads = 2;
  mc.points = 2;
  mc.encoder_layers = 1;
  mc.rounds = 1;
  mc.topk = 3;
  RngState init(seed);
  auto model = std::make_shared<Model>(Model::init(mc, init));
  fixtures::randomize(*model, init);

  SceneConfig sc;
  sc.height = sc.width = 32;
  sc.channels = sc.phrase_dim = 8;
  sc.min_objects = sc.max_objects = 2;
  sc.plural_prob = 0.0;
  auto sample = std::make_shared<Sample>();
  for (std::uint64_t s = seed;; ++s) {
    const Dataset d = generate_dataset(sc, 0.05, 1, s);
    if (d.samples[0].scene.phrases.size() == 2) {
      *sample = d.samples[0];
      break;
    }
  }
  return {"end_to_end",
          [=](Tape& t) {
            RngState r(5);
            return sample_loss(t, *model, *sample, LossConfig{}, r, true).loss.total;
          },
          fixtures::tensors_of(model->named_parameters())};
}

/// Layers, losses and the full tiny model.
inline std::vector<Case> composites(std::uint64_t seed) {
  RngState rng(seed);
  std::vector<Case> out;
  const std::size_t c = 8;

  {
    auto p = DeformLayerParams::init(c, 2, 2, 2.0, rng);
    fixtures::randomize(p, rng, 0.05);
    const LevelMaps maps = fixtures::random_levels(32, 32, c, rng, true);
    const Tensor q = random_tensor({4, c}, rng, -1, 1, true);
    const Tensor refs = fixtures::random_points(4, rng, 0.25, 0.75, true);
    NamedTensors named;
    p.append_named(named, "p");
    auto params = fixtures::tensors_of(named);
    params.push_back(q);
    params.push_back(refs);
    for (const auto& m : maps.maps) params.push_back(m);
    DeformOptions o;
    o.training = true;
    o.dropout = 0.1;
    out.push_back({"deform_layer",
                   [=](Tape& t) {
                     RngState d(42);
                     return project_to_scalar(t, deform_layer(t, {q, &maps, refs}, p, o, d));
                   },
                   params});
  }
  {
    auto p = CrossAttnParams::init(c, 2, 2.0, rng);
    fixtures::randomize(p, rng);
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
    out.push_back({"cross_attend",
                   [=](Tape& t) {
                     RngState r(8);
                     return project_to_scalar(t, cross_attend(t, g, keys, p, o, r));
                   },
                   params});
  }
  {
    const LevelMaps m = fixtures::random_levels(32, 32, 4, rng, true);
    const Tensor g = random_tensor({2, 3}, rng, -1, 1, true);
    const Tensor v = random_tensor({3, 4}, rng, -1, 1, true);
    std::vector<Tensor> params{g, v};
    for (const auto& t : m.maps) params.push_back(t);
    out.push_back({"matching",
                   [=](Tape& t) {
                     const FusedMap f = fuse_levels(t, m.maps, m.shapes, m.shapes[kMatchLevel]);
                     const Tensor h = similarity(t, project_phrases(t, g, v), f.features);
                     return project_to_scalar(t, upsample_similarity(t, h, f.shape, 32, 32));
                   },
                   params});
  }
  {
    const Tensor logits = random_tensor({2, 6}, rng, -2, 2, true);
    const Tensor y = Tensor::matrix(2, 6, {1, 1, 0, 0, 1, 0, 0, 0, 0, 1, 1, 1});
    out.push_back({"bce_dice",
                   [=](Tape& t) {
                     const Tensor h = sigmoid(t, logits);
                     return add(t, bce_loss(t, h, y), dice_loss(t, h, y, 1e-6));
                   },
                   {logits}});
  }
  out.push_back(end_to_end(seed));
  return out;
}

}  // namespace grad_cases
