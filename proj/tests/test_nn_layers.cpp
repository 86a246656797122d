#include <cmath>
#include <numbers>

#include <doctest.h>

#include "cmit/error.hpp"
#include "cmit/nn.hpp"
#include "cmit/rng.hpp"

using namespace cmit;

TEST_CASE("layer norm: constant vector maps to beta") {
  LayerNorm ln(4);
  Tensor x({1, 1, 4});
  for (std::size_t i = 0; i < 4; ++i) x[i] = 7.0;
  Tensor y = ln.forward(x);
  for (std::size_t i = 0; i < 4; ++i) CHECK(y[i] == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("layer norm: hand-computed pair") {
  LayerNorm ln(2);
  Tensor x({1, 1, 2});
  x[0] = 1.0;
  x[1] = 3.0;
  Tensor y = ln.forward(x);
  CHECK(y[0] == doctest::Approx(-1.0).epsilon(1e-7));
  CHECK(y[1] == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("layer norm: per-position mean 0 and variance 1") {
  Rng rng(5);
  LayerNorm ln(16);
  Tensor x({3, 4, 16});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal(2.0, 5.0);
  Tensor y = ln.forward(x);
  CHECK(y.same_shape(x));
  for (std::size_t g = 0; g < 12; ++g) {
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < 16; ++i) mean += y[g * 16 + i];
    mean /= 16.0;
    for (std::size_t i = 0; i < 16; ++i) {
      var += (y[g * 16 + i] - mean) * (y[g * 16 + i] - mean);
    }
    var /= 16.0;
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(var == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("cloud norm: constant group maps to exactly 1") {
  CloudNorm cn(8, CloudNormConfig{});
  Rng rng(3);
  Tensor x({2, 3, 8});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 123.456;
  Tensor y = cn.forward(x, &rng, true);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == 1.0);
}

TEST_CASE("cloud norm: deterministic two-point case") {
  CloudNorm cn(2, CloudNormConfig{});
  Tensor x({1, 1, 2});
  x[0] = 0.0;
  x[1] = 2.0;
  Tensor y = cn.forward(x, nullptr, false);
  const double en = std::sqrt(std::numbers::pi / 2.0);
  const double expected = std::exp(-0.5 / (en * en));  // ~0.727377
  CHECK(y[0] == doctest::Approx(expected).epsilon(1e-12));
  CHECK(y[1] == doctest::Approx(expected).epsilon(1e-12));
  CHECK(y[0] == doctest::Approx(0.72738).epsilon(1e-4));
}

TEST_CASE("cloud norm: stochastic forward is seed-deterministic") {
  Tensor x({4, 3, 8});
  Rng fill(9);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = fill.normal(0.0, 2.0);

  CloudNorm cn1(8, CloudNormConfig{});
  CloudNorm cn2(8, CloudNormConfig{});
  Rng r1(77), r2(77), r3(78);
  Tensor y1 = cn1.forward(x, &r1, true);
  Tensor y2 = cn2.forward(x, &r2, true);
  bool identical = true;
  for (std::size_t i = 0; i < y1.size(); ++i) identical = identical && y1[i] == y2[i];
  CHECK(identical);

  Tensor y3 = cn1.forward(x, &r3, true);
  bool differs = false;
  for (std::size_t i = 0; i < y1.size(); ++i) differs = differs || y1[i] != y3[i];
  CHECK(differs);
}

TEST_CASE("cloud norm: outputs in (0, 1], shape preserved") {
  Rng rng(31);
  CloudNorm cn(8, CloudNormConfig{});
  Rng noise(13);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor x({2, 5, 8});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal(0.0, 100.0);
    Tensor y = cn.forward(x, &noise, true);
    CHECK(y.same_shape(x));
    for (std::size_t i = 0; i < y.size(); ++i) {
      CHECK(y[i] > 0.0);
      CHECK(y[i] <= 1.0);
    }
  }
}

TEST_CASE("cloud norm: rejects groups narrower than 2") {
  CHECK_THROWS_AS(CloudNorm(1, CloudNormConfig{}), ConfigError);
}

TEST_CASE("softmax: uniform on equal logits, rows sum to 1") {
  Tensor x({1, 3});
  Tensor y = softmax(x);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(y[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }

  Rng rng(77);
  Tensor z({4, 5, 9});
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = rng.normal(0.0, 30.0);
  Tensor s = softmax(z);
  for (std::size_t g = 0; g < 20; ++g) {
    double sum = 0.0;
    for (std::size_t i = 0; i < 9; ++i) sum += s[g * 9 + i];
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("mse: zero at perfect prediction") {
  Tensor a({5});
  for (std::size_t i = 0; i < 5; ++i) a[i] = static_cast<double>(i) - 2.0;
  CHECK(mse_loss(a, a) == 0.0);
}

TEST_CASE("attention: single position reduces to the value path") {
  Rng rng(21);
  MultiHeadAttention attn(8, 2, rng);
  Tensor x({1, 1, 8});
  for (std::size_t i = 0; i < 8; ++i) x[i] = rng.normal01();
  Tensor y = attn.forward(x);

  // with one position the softmax weight is 1, so out = wo(wv(x))
  Rng rng2(21);
  Linear wq(8, 8, rng2, "q"), wk(8, 8, rng2, "k"), wv(8, 8, rng2, "v"), wo(8, 8, rng2, "o");
  Tensor expected = wo.forward(wv.forward(x));
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(y[i] == doctest::Approx(expected[i]).epsilon(1e-12));
  }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Rng rng(1);
  Linear lin(3, 3, rng, "lin");
  const Tensor before = lin.w;
  Adam opt(0.001);
  Adam::zero_grad(lin.params());
  opt.step(lin.params());
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(lin.w[i] == before[i]);
}

TEST_CASE("adam: first bias-corrected step moves by about lr") {
  Tensor p({1}), g({1});
  p[0] = 1.0;
  g[0] = 1.0;
  std::vector<ParamRef> refs{{"p", &p, &g}};
  Adam opt(0.001);
  opt.step(refs);
  CHECK(p[0] == doctest::Approx(0.999).epsilon(1e-9));
}

TEST_CASE("adam: drives a quadratic bowl to the minimum") {
  Tensor p({1}), g({1});
  p[0] = 1.0;
  std::vector<ParamRef> refs{{"p", &p, &g}};
  Adam opt(0.01);

  // scalar reference implementation, updated in lockstep
  double rp = 1.0, m = 0.0, v = 0.0;
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8, lr = 0.01;
  for (int t = 1; t <= 500; ++t) {
    g[0] = 2.0 * p[0];
    opt.step(refs);
    const double rg = 2.0 * rp;
    m = b1 * m + (1 - b1) * rg;
    v = b2 * v + (1 - b2) * rg * rg;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    rp -= lr * mh / (std::sqrt(vh) + eps);
    CHECK(p[0] == doctest::Approx(rp).epsilon(1e-12));
  }
  CHECK(std::abs(p[0]) < 0.01);
}

TEST_CASE("adam: non-finite gradient is a hard failure") {
  Tensor p({1}), g({1});
  g[0] = std::numeric_limits<double>::quiet_NaN();
  std::vector<ParamRef> refs{{"p", &p, &g}};
  Adam opt;
  CHECK_THROWS_AS(opt.step(refs), NumericError);
}

TEST_CASE("gelu: matches erf form and its derivative at sample points") {
  CHECK(gelu(0.0) == 0.0);
  CHECK(gelu(10.0) == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(gelu_grad(0.0) == doctest::Approx(0.5).epsilon(1e-12));
}
