#include "cmit/cloud.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cmit/error.hpp"
#include "cmit/rng.hpp"

namespace cmit {

bool CloudDescriptor::valid() const {
  return std::isfinite(ex) && std::isfinite(en) && std::isfinite(he) && en >= 0.0 &&
         he >= 0.0;
}

double membership(double x, double ex, double en_prime) {
  if (!std::isfinite(x) || !std::isfinite(ex) || !std::isfinite(en_prime)) {
    throw ArgumentError("membership: non-finite input");
  }
  if (en_prime <= 0.0) {
    throw std::domain_error("membership: en_prime must be positive");
  }
  const double d = x - ex;
  return std::exp(-(d * d) / (2.0 * en_prime * en_prime));
}

std::vector<CloudDrop> forward_generate(const CloudDescriptor& desc, std::size_t n,
                                        std::uint64_t seed) {
  if (!desc.valid()) {
    throw ArgumentError("forward_generate: invalid descriptor");
  }
  if (n == 0) {
    throw ArgumentError("forward_generate: n must be >= 1");
  }
  Rng rng(seed);
  std::vector<CloudDrop> drops;
  drops.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double en_prime = rng.normal(desc.en, desc.he);
    // Resample nonpositive draws; with he == 0 the draw is degenerate at en,
    // so fall through to the floor instead of looping forever.
    while (en_prime <= 0.0 && desc.he > 0.0) {
      en_prime = rng.normal(desc.en, desc.he);
    }
    en_prime = std::max(en_prime, kEntropyFloor);
    const double x = rng.normal(desc.ex, en_prime);
    drops.push_back({x, membership(x, desc.ex, en_prime), en_prime});
  }
  return drops;
}

CloudDescriptor reverse_generate(std::span<const double> samples, VarianceMode mode) {
  if (samples.size() < 2) {
    throw ArgumentError("reverse_generate: need at least 2 samples");
  }
  double lo = samples[0];
  double hi = samples[0];
  double sum = 0.0;
  for (double v : samples) {
    if (!std::isfinite(v)) {
      throw ArgumentError("reverse_generate: non-finite sample");
    }
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    sum += v;
  }
  const double n = static_cast<double>(samples.size());
  // A constant sample is (c, 0, 0) exactly; computing it through the mean
  // would leave rounding residue in the deviations.
  if (lo == hi) {
    return {lo, 0.0, 0.0};
  }
  const double ex = sum / n;
  double abs_dev = 0.0;
  double sq_dev = 0.0;
  for (double v : samples) {
    const double d = v - ex;
    abs_dev += std::abs(d);
    sq_dev += d * d;
  }
  const double en = std::sqrt(std::numbers::pi / 2.0) * (abs_dev / n);
  const double divisor = mode == VarianceMode::population ? n : n - 1.0;
  const double s2 = sq_dev / divisor;
  const double he = std::sqrt(std::abs(s2 - en * en));
  return {ex, en, he};
}

}  // namespace cmit
