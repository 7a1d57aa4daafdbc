#include <doctest.h>

#include <cmath>
#include <numeric>

#include "drmn/errors.hpp"
#include "drmn/ops.hpp"
#include "grad_cases.hpp"
#include "support.hpp"

using namespace drmn;
using support::gradcheck;
using support::random_tensor;

namespace {

Tape inf() { return Tape::inference(); }

}  // namespace

TEST_CASE("tensor construction") {
  CHECK_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(Tensor({0, 2}, {}), DimensionError);
  CHECK_THROWS_AS(Tensor::vector({1.0, NAN}), NumericError);
  CHECK_THROWS_AS(Tensor::vector({INFINITY}), NumericError);
  const Tensor t = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t(1, 2) == 6.0);
  Tensor copy = t;
  CHECK(copy.same_storage(t));
  CHECK_FALSE(t.detach().same_storage(t));
  CHECK_THROWS_AS(copy.assign(std::vector<double>{1, 2}), DimensionError);
  CHECK_THROWS_AS(copy.assign(std::vector<double>{1, 2, 3, 4, 5, NAN}), NumericError);
}

TEST_CASE("matmul examples") {
  Tape t = inf();
  const Tensor id = Tensor::matrix(2, 2, {1, 0, 0, 1});
  const Tensor m = Tensor::matrix(2, 2, {1, 2, 3, 4});
  CHECK(matmul(t, id, m).to_vector() == m.to_vector());
  const Tensor a = Tensor::matrix(2, 2, {1, 0, 0, 0});
  const Tensor b = Tensor::matrix(2, 1, {0, 5});
  CHECK(matmul(t, a, b).to_vector() == std::vector<double>{0, 0});
  CHECK_THROWS_AS(matmul(t, m, Tensor::matrix(3, 1, {1, 2, 3})), DimensionError);
}

TEST_CASE("matmul gradient of sum") {
  RngState rng(3);
  const Tensor a = random_tensor({3, 4}, rng, -1, 1, true);
  const Tensor b = random_tensor({4, 2}, rng, -1, 1, true);
  const auto r = gradcheck([&](Tape& t) { return sum(t, matmul(t, a, b)); }, {a, b});
  CHECK(r.rel_err < 1e-6);
}

TEST_CASE("softmax examples") {
  Tape t = inf();
  auto s = softmax(t, Tensor::vector({0, 0, 0}), 0).to_vector();
  for (double v : s) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  s = softmax(t, Tensor::vector({1000, 1000}), 0).to_vector();
  CHECK(s[0] == 0.5);
  CHECK(s[1] == 0.5);
  s = softmax(t, Tensor::vector({0, std::log(3.0)}), 0).to_vector();
  CHECK(std::abs(s[0] - 0.25) < 1e-15);
  CHECK(std::abs(s[1] - 0.75) < 1e-15);
}

TEST_CASE("softmax rows sum to one along either axis") {
  RngState rng(5);
  const Tensor x = random_tensor({3, 5}, rng, -4, 4);
  Tape t = inf();
  const Tensor a = softmax(t, x, 1);
  for (std::size_t i = 0; i < 3; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < 5; ++j) s += a(i, j);
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
  const Tensor b = softmax(t, x, 0);
  for (std::size_t j = 0; j < 5; ++j) {
    double s = 0;
    for (std::size_t i = 0; i < 3; ++i) s += b(i, j);
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("sigmoid examples") {
  Tape t = inf();
  CHECK(sigmoid(t, Tensor::scalar(0.0)).item() == 0.5);
  CHECK(std::abs(sigmoid(t, Tensor::scalar(50.0)).item() - 1.0) < 1e-12);
  RngState rng(1);
  const Tensor x = random_tensor({10}, rng, -8, 8);
  const auto p = sigmoid(t, x).to_vector();
  const auto n = sigmoid(t, scale(t, x, -1.0)).to_vector();
  for (std::size_t i = 0; i < 10; ++i) CHECK(std::abs(p[i] + n[i] - 1.0) < 1e-15);
  // no overflow at extreme logits
  CHECK(sigmoid(t, Tensor::scalar(-800.0)).item() >= 0.0);
}

TEST_CASE("layer norm examples") {
  Tape t = inf();
  const Tensor one4 = Tensor::vector({1, 1, 1, 1});
  const Tensor zero4 = Tensor::vector({0, 0, 0, 0});
  CHECK(layer_norm(t, Tensor::vector({1, 1, 1, 1}), one4, zero4, 0, 1e-6).to_vector() ==
        std::vector<double>{0, 0, 0, 0});
  const auto v = layer_norm(t, Tensor::vector({-1, 1}), Tensor::vector({1, 1}), Tensor::vector({0, 0}), 0, 1e-6)
                     .to_vector();
  CHECK(std::abs(v[0] + 1.0) < 1e-5);
  CHECK(std::abs(v[1] - 1.0) < 1e-5);

  RngState rng(8);
  const std::size_t n = 64;
  const Tensor x = random_tensor({n}, rng, -3, 5);
  const auto y = layer_norm(t, x, Tensor::full({n}, 1.0), Tensor::zeros({n}), 0, 1e-12).to_vector();
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double var = 0;
  for (double a : y) var += (a - mean) * (a - mean);
  var /= n;
  CHECK(std::abs(mean) < 1e-10);
  CHECK(std::abs(var - 1.0) < 1e-6);
}

TEST_CASE("dropout") {
  RngState rng(4);
  const Tensor x = random_tensor({5, 3}, rng);
  Tape t = inf();
  RngState d(1);
  CHECK(dropout(t, x, 0.0, d, true).to_vector() == x.to_vector());
  CHECK(dropout(t, x, 0.5, d, false).to_vector() == x.to_vector());
  CHECK_THROWS_AS(dropout(t, x, 1.0, d, true), ParameterError);

  const std::size_t n = 100000;
  const Tensor ones = Tensor::full({n}, 1.0);
  RngState d2(11);
  const auto y = dropout(t, ones, 0.5, d2, true).to_vector();
  std::size_t kept = 0;
  for (double v : y) {
    CHECK((v == 0.0 || v == 2.0));
    kept += v != 0.0;
  }
  CHECK(std::abs(static_cast<double>(kept) / n - 0.5) < 0.01);

  RngState a(5), b(5);
  CHECK(dropout(t, ones, 0.3, a, true).to_vector() == dropout(t, ones, 0.3, b, true).to_vector());
}

TEST_CASE("bilinear sampling examples") {
  Tape t = inf();
  // 2x2 map, 1 channel
  const Tensor map({2, 2, 1}, {1, 2, 3, 4});
  auto at = [&](double y, double x) { return bilinear_sample(t, map, Tensor::matrix(1, 2, {y, x})).item(); };
  CHECK(at(0.25, 0.25) == 1.0);
  CHECK(at(0.25, 0.75) == 2.0);
  CHECK(at(0.75, 0.25) == 3.0);
  CHECK(at(0.75, 0.75) == 4.0);
  CHECK(at(0.5, 0.5) == doctest::Approx(2.5).epsilon(1e-15));
  // outer half cell clamps to the edge value
  CHECK(at(0.0, 0.0) == 1.0);
  CHECK(at(1.0, 1.0) == 4.0);
  // outside the unit square reads zero
  CHECK(at(-0.01, 0.5) == 0.0);
  CHECK(at(0.5, 1.01) == 0.0);

  // multi-channel node read
  RngState rng(2);
  const Tensor m3 = random_tensor({3, 4, 5}, rng);
  const Tensor p = Tensor::matrix(1, 2, {(1 + 0.5) / 3.0, (2 + 0.5) / 4.0});
  const auto v = bilinear_sample(t, m3, p).to_vector();
  for (std::size_t ch = 0; ch < 5; ++ch) CHECK(std::abs(v[ch] - m3[(1 * 4 + 2) * 5 + ch]) < 1e-15);
}

TEST_CASE("bilinear gradient w.r.t. points and map") {
  RngState rng(21);
  const Tensor map = random_tensor({4, 5, 3}, rng, -1, 1, true);
  // 20 interior points, kept clear of the edge clamp band
  std::vector<double> pts;
  for (int i = 0; i < 20; ++i) {
    pts.push_back(rng.uniform(0.15, 0.85));
    pts.push_back(rng.uniform(0.12, 0.88));
  }
  const Tensor p = Tensor::matrix(20, 2, pts, true);
  const auto r = gradcheck(
      [&](Tape& t) { return support::project_to_scalar(t, bilinear_sample(t, map, p)); }, {map, p});
  CHECK(r.rel_err < 1e-4);
}

TEST_CASE("autodiff basics") {
  RngState rng(7);
  Tensor x = random_tensor({6}, rng, -1, 1, true);
  {
    Tape t;
    t.backward(sum(t, x));
    for (double g : x.grad()) CHECK(g == 1.0);
  }
  x.zero_grad();
  {
    Tape t;
    t.backward(sum(t, mul(t, x, x)));
    const auto g = x.grad();
    for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(g[i] - 2 * x[i]) < 1e-15);
  }
  // gradients accumulate until cleared
  {
    Tape t;
    t.backward(sum(t, x));
    const auto g = x.grad();
    for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(g[i] - (2 * x[i] + 1)) < 1e-15);
  }
  Tape t;
  const Tensor l = sum(t, x);
  t.backward(l);
  CHECK_THROWS_AS(t.backward(l), ContractError);
  Tape t2;
  CHECK_THROWS_AS(t2.backward(x), ContractError);
  Tape t3;
  CHECK_THROWS_AS(t3.backward(sum(t3, Tensor::vector({1, 2}))), ContractError);
  // inference tapes record nothing
  Tape t4 = Tape::inference();
  const Tensor y = mul(t4, x, x);
  CHECK_FALSE(y.requires_grad());
  CHECK(t4.size() == 0);
}

TEST_CASE("shape errors") {
  Tape t = inf();
  const Tensor a = Tensor::matrix(2, 2, {1, 2, 3, 4});
  const Tensor b = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK_THROWS_AS(add(t, a, b), DimensionError);
  CHECK_THROWS_AS(mul(t, a, b), DimensionError);
  CHECK_THROWS_AS(add_row(t, a, Tensor::vector({1, 2, 3})), DimensionError);
  CHECK_THROWS_AS(reshape(t, a, {3}), DimensionError);
  CHECK_THROWS_AS(slice_rows(t, a, 1, 2), DimensionError);
  const std::vector<std::size_t> dup{0, 0};
  CHECK_THROWS_AS(scatter_rows(t, a, dup, a), ContractError);
  const std::vector<std::size_t> bad{5};
  CHECK_THROWS_AS(gather_rows(t, a, bad), ContractError);
  CHECK_THROWS_AS(bilinear_sample(t, a, Tensor::matrix(1, 2, {0.5, 0.5})), DimensionError);
}

TEST_CASE("row ops") {
  Tape t = inf();
  const Tensor a = Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6});
  const std::vector<std::size_t> idx{2, 0};
  CHECK(gather_rows(t, a, idx).to_vector() == std::vector<double>{5, 6, 1, 2});
  const Tensor rows = Tensor::matrix(2, 2, {9, 9, 7, 7});
  CHECK(scatter_rows(t, a, idx, rows).to_vector() == std::vector<double>{7, 7, 3, 4, 9, 9});
  CHECK(a.to_vector() == std::vector<double>{1, 2, 3, 4, 5, 6});
  const std::vector<Tensor> parts{a, rows};
  CHECK(concat_rows(t, parts).rows() == 5);
  CHECK(slice_cols(t, a, 1, 1).to_vector() == std::vector<double>{2, 4, 6});
  CHECK(transpose(t, a).to_vector() == std::vector<double>{1, 3, 5, 2, 4, 6});
  CHECK(add_row(t, a, Tensor::vector({10, 20})).to_vector() == std::vector<double>{11, 22, 13, 24, 15, 26});
  CHECK(mean(t, a).item() == 3.5);
}

TEST_CASE("every primitive passes a finite-difference check") {
  for (const auto& c : grad_cases::primitives(13)) {
    CAPTURE(c.name);
    const auto rep = gradcheck(c.loss, c.params);
    CAPTURE(rep.worst);
    CHECK(rep.rel_err < 1e-4);
  }
}
