#include "cmit/cloud.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include <doctest.h>

#include "cmit/error.hpp"
#include "cmit/rng.hpp"

using namespace cmit;

TEST_CASE("membership: exact values") {
  CHECK(membership(5.0, 5.0, 3.7) == 1.0);
  // one entropy unit away from the center the degree is e^{-1/2}
  CHECK(membership(2.0 + 0.9, 2.0, 0.9) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  CHECK(membership(-3.0 + 1.7, -3.0, 1.7) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  CHECK(membership(2.0, 0.0, 1.0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
}

TEST_CASE("membership: domain and argument errors") {
  CHECK_THROWS_AS(membership(1.0, 0.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(membership(1.0, 0.0, -2.0), std::domain_error);
  CHECK_THROWS_AS(membership(std::nan(""), 0.0, 1.0), ArgumentError);
}

TEST_CASE("membership: bounds, symmetry, monotonicity") {
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const double ex = rng.normal(0.0, 10.0);
    const double enp = 0.01 + 5.0 * rng.uniform01();
    const double d = rng.normal(0.0, 3.0 * enp);
    const double u = membership(ex + d, ex, enp);
    CHECK(u > 0.0);
    CHECK(u <= 1.0);
    if (d != 0.0) CHECK(u < 1.0);
    CHECK(membership(ex + d, ex, enp) == doctest::Approx(membership(ex - d, ex, enp)).epsilon(1e-12));
    // strictly decreasing in |x - ex|
    CHECK(membership(ex + 1.5 * d, ex, enp) <= u);
  }
}

TEST_CASE("forward_generate: degenerate hyper-entropy pins en_prime") {
  const auto drops = forward_generate({10.0, 2.0, 0.0}, 3, 99);
  REQUIRE(drops.size() == 3);
  for (const auto& d : drops) {
    CHECK(d.en_prime == 2.0);
    CHECK(d.u == membership(d.x, 10.0, d.en_prime));
    CHECK(d.u > 0.0);
    CHECK(d.u <= 1.0);
  }
}

TEST_CASE("forward_generate: seeded determinism") {
  const auto a = forward_generate({0.0, 1.0, 0.1}, 500, 123);
  const auto b = forward_generate({0.0, 1.0, 0.1}, 500, 123);
  const auto c = forward_generate({0.0, 1.0, 0.1}, 500, 124);
  REQUIRE(a.size() == b.size());
  bool all_equal = true;
  bool any_differs_from_c = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    all_equal = all_equal && a[i].x == b[i].x && a[i].u == b[i].u &&
                a[i].en_prime == b[i].en_prime;
    any_differs_from_c = any_differs_from_c || a[i].x != c[i].x;
  }
  CHECK(all_equal);
  CHECK(any_differs_from_c);
}

TEST_CASE("forward_generate: errors") {
  CHECK_THROWS_AS(forward_generate({0.0, 1.0, 0.1}, 0, 1), ArgumentError);
  CHECK_THROWS_AS(forward_generate({0.0, -1.0, 0.1}, 5, 1), ArgumentError);
}

// Monte Carlo oracle: the sample mean of n=1e5 drops has std about
// 1/sqrt(n) ~ 0.003; +-0.02 is a generous multiple of that.
TEST_CASE("forward_generate: sample mean concentrates at ex") {
  const auto drops = forward_generate({0.0, 1.0, 0.1}, 100000, 7);
  double mean = 0.0;
  for (const auto& d : drops) mean += d.x;
  mean /= static_cast<double>(drops.size());
  CHECK(std::abs(mean) < 0.02);
}

TEST_CASE("reverse_generate: constant samples give (c, 0, 0) exactly") {
  const std::vector<double> samples(17, 3.14);
  const auto d = reverse_generate(samples);
  CHECK(d.ex == 3.14);
  CHECK(d.en == 0.0);
  CHECK(d.he == 0.0);
}

TEST_CASE("reverse_generate: hand-computed two-point case") {
  const std::vector<double> samples{0.0, 2.0};
  const auto d = reverse_generate(samples, VarianceMode::population);
  CHECK(d.ex == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(d.en == doctest::Approx(std::sqrt(std::numbers::pi / 2.0)).epsilon(1e-12));
  // S^2(population) = 1, he = sqrt(|1 - pi/2|)
  CHECK(d.he == doctest::Approx(std::sqrt(std::numbers::pi / 2.0 - 1.0)).epsilon(1e-12));

  const auto ds = reverse_generate(samples, VarianceMode::sample);
  // S^2(sample) = 2
  CHECK(ds.he == doctest::Approx(std::sqrt(std::abs(2.0 - std::numbers::pi / 2.0))).epsilon(1e-12));
  CHECK(ds.ex == d.ex);
  CHECK(ds.en == d.en);
}

TEST_CASE("reverse_generate: argument errors") {
  CHECK_THROWS_AS(reverse_generate(std::vector<double>{1.0}), ArgumentError);
  CHECK_THROWS_AS(reverse_generate(std::vector<double>{}), ArgumentError);
  CHECK_THROWS_AS(reverse_generate(std::vector<double>{1.0, std::nan("")}), ArgumentError);
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(reverse_generate(std::vector<double>{1.0, inf}), ArgumentError);
}

// Monte Carlo oracle: E|x - mu| = sigma sqrt(2/pi) makes the entropy estimator
// consistent for sigma; on pure normal data the hyper-entropy tends to 0 from
// above (it is a sqrt of a noisy absolute difference).
TEST_CASE("reverse_generate: consistency on standard normal samples") {
  Rng rng(11);
  std::vector<double> samples(100000);
  for (double& s : samples) s = rng.normal01();
  const auto d = reverse_generate(samples);
  CHECK(std::abs(d.ex) < 0.02);
  CHECK(std::abs(d.en - 1.0) < 0.02);
  CHECK(d.he >= 0.0);
  CHECK(d.he < 0.15);
}

// Roundtrip oracle; tolerances calibrated by a pre-build Monte Carlo sweep
// (200 seeds: |ex err| <= 0.024, |en err| <= 0.014, |he err| <= 0.046).
TEST_CASE("roundtrip: forward then reverse recovers the descriptor") {
  const CloudDescriptor truth{10.0, 2.0, 0.2};
  const auto drops = forward_generate(truth, 100000, 2024);
  std::vector<double> xs(drops.size());
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = drops[i].x;
  const auto d = reverse_generate(xs);
  CHECK(std::abs(d.ex - truth.ex) < 0.05);
  CHECK(std::abs(d.en - truth.en) < 0.05);
  CHECK(d.he - truth.he < 0.15);
  CHECK(d.he > 0.0);
}
