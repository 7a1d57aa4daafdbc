#include <doctest.h>

#include "drmn/errors.hpp"
#include "drmn/matching.hpp"
#include "fixtures.hpp"

using namespace drmn;
using support::inf;
using support::random_tensor;

TEST_CASE("resample_level") {
  RngState rng(1);
  const Tensor m = random_tensor({16, 3}, rng);
  CHECK(resample_level(inf(), m, {4, 4}, {4, 4}).same_storage(m));

  const Tensor constant = Tensor::full({4, 2}, 2.5);
  for (const LevelShape to : {LevelShape{4, 4}, LevelShape{8, 8}, LevelShape{1, 1}, LevelShape{3, 5}}) {
    const Tensor r = resample_level(inf(), constant, {2, 2}, to);
    CHECK(r.rows() == to.cells());
    for (double v : r.to_vector()) CHECK(std::abs(v - 2.5) < 1e-15);
  }

  // 2x2 -> 4x4: target centres map to source pixel coordinates
  // -0.25, 0.25, 0.75, 1.25, clamped to 0, 0.25, 0.75, 1
  const double a = 1, b = 2, c = 3, d = 4;
  const Tensor src = Tensor::matrix(4, 1, {a, b, c, d});
  const Tensor up = resample_level(inf(), src, {2, 2}, {4, 4});
  CHECK(up(0, 0) == a);
  CHECK(up(3, 0) == b);
  CHECK(up(12, 0) == c);
  CHECK(up(15, 0) == d);
  CHECK(std::abs(up(5, 0) - (0.5625 * a + 0.1875 * b + 0.1875 * c + 0.0625 * d)) < 1e-15);
  CHECK(std::abs(up(1, 0) - (0.75 * a + 0.25 * b)) < 1e-15);
  CHECK(std::abs(up(6, 0) - (0.5625 * b + 0.1875 * a + 0.1875 * d + 0.0625 * c)) < 1e-15);
}

TEST_CASE("fuse") {
  RngState rng(2);
  const LevelShape s{2, 3};
  const Tensor x = random_tensor({6, 4}, rng);
  const std::vector<Tensor> same{x, x, x, x};
  CHECK(support::max_abs_diff(fuse(inf(), same, s).features, x) < 1e-15);

  const Tensor z = Tensor::zeros({6, 4});
  const std::vector<Tensor> lin{z, z, z, scale(inf(), x, 4.0)};
  CHECK(support::max_abs_diff(fuse(inf(), lin, s).features, x) < 1e-15);

  std::vector<Tensor> maps;
  for (int i = 0; i < 4; ++i) maps.push_back(random_tensor({6, 4}, rng));
  const Tensor f = fuse(inf(), maps, s).features;
  for (std::size_t i = 0; i < 24; ++i) {
    CHECK(std::abs(f[i] - (maps[0][i] + maps[1][i] + maps[2][i] + maps[3][i]) / 4.0) < 1e-15);
  }
  std::vector<Tensor> scaled;
  for (const auto& m : maps) scaled.push_back(scale(inf(), m, -2.5));
  CHECK(support::max_abs_diff(fuse(inf(), scaled, s).features, scale(inf(), f, -2.5)) < 1e-14);

  const std::vector<Tensor> bad{x, random_tensor({5, 4}, rng)};
  CHECK_THROWS_AS(fuse(inf(), bad, s), ContractError);
}

TEST_CASE("fuse_levels matches the reference resampler") {
  RngState rng(3);
  const LevelMaps m = fixtures::random_levels(64, 32, 4, rng);
  const FusedMap f = fuse_levels(inf(), m.maps, m.shapes, m.shapes[kMatchLevel]);
  CHECK(f.shape == m.shapes[kMatchLevel]);
  ref::Mat want(f.shape.cells(), 4);
  for (std::size_t l = 0; l < 4; ++l) {
    const ref::Mat r = ref::resample(ref::Mat(m.maps[l]), m.shapes[l].rows, m.shapes[l].cols, f.shape.rows, f.shape.cols);
    for (std::size_t i = 0; i < r.v.size(); ++i) want.v[i] += r.v[i] / 4.0;
  }
  CHECK(support::max_abs_diff(f.features, want.v) < 1e-14);
}

TEST_CASE("phrase projection") {
  RngState rng(4);
  const Tensor g = random_tensor({3, 4}, rng);
  std::vector<double> id(16, 0.0);
  for (int i = 0; i < 4; ++i) id[i * 5] = 1.0;
  CHECK(project_phrases(inf(), g, Tensor::matrix(4, 4, id)).to_vector() == g.to_vector());
  const Tensor v = random_tensor({4, 6}, rng);
  for (double x : project_phrases(inf(), Tensor::zeros({3, 4}), v).to_vector()) CHECK(x == 0.0);
  CHECK_THROWS_AS(project_phrases(inf(), g, random_tensor({5, 4}, rng)), DimensionError);
}

TEST_CASE("similarity") {
  const Tensor g = Tensor::matrix(1, 2, {1, 0});
  const Tensor f = Tensor::matrix(3, 2, {0, 1, 0, -2, 0, 5});
  for (double v : similarity(inf(), g, f).to_vector()) CHECK(v == 0.5);
  const Tensor pix = Tensor::matrix(1, 3, {0.3, -0.2, 0.5});
  const Tensor big = scale(inf(), pix, 1000.0);
  CHECK(std::abs(similarity(inf(), big, pix).item() - 1.0) < 1e-12);
  RngState rng(5);
  const Tensor h = similarity(inf(), random_tensor({2, 4}, rng), random_tensor({7, 4}, rng));
  CHECK(h.shape() == Shape{2, 7});
  for (double v : h.to_vector()) CHECK((v > 0.0 && v < 1.0));
}

TEST_CASE("upsample_similarity") {
  RngState rng(6);
  const Tensor h = random_tensor({2, 16}, rng, 0, 1);
  const Tensor up = upsample_similarity(inf(), h, {4, 4}, 32, 32);
  CHECK(up.shape() == Shape{2, 1024});
  const ref::Mat want = ref::upsample(ref::Mat(h), 4, 4, 32, 32);
  CHECK(support::max_abs_diff(up, want.v) < 1e-14);
}

TEST_CASE("matching gradients") {
  RngState rng(7);
  LevelMaps m = fixtures::random_levels(32, 32, 4, rng, true);
  const Tensor g = random_tensor({2, 3}, rng, -1, 1, true);
  const Tensor v = random_tensor({3, 4}, rng, -1, 1, true);
  std::vector<Tensor> params{g, v};
  for (const auto& t : m.maps) params.push_back(t);
  const auto rep = support::gradcheck(
      [&](Tape& t) {
        const FusedMap f = fuse_levels(t, m.maps, m.shapes, m.shapes[kMatchLevel]);
        const Tensor h = similarity(t, project_phrases(t, g, v), f.features);
        return support::project_to_scalar(t, upsample_similarity(t, h, f.shape, 32, 32));
      },
      params);
  CAPTURE(rep.worst);
  CHECK(rep.rel_err < 1e-4);
}
