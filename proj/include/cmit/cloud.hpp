#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace cmit {

/// Numerical characterization of a qualitative concept: expectation,
/// entropy (spread) and hyper-entropy (spread of the spread).
struct CloudDescriptor {
  double ex = 0.0;
  double en = 0.0;
  double he = 0.0;

  /// true iff ex is finite and en, he are finite and nonnegative.
  bool valid() const;
};

/// One realization of a concept: the value, its certainty degree, and the
/// entropy realization that produced it.
struct CloudDrop {
  double x = 0.0;
  double u = 0.0;        // in (0, 1]
  double en_prime = 0.0; // > 0
};

enum class VarianceMode { population, sample };

/// Entropy floor applied wherever an entropy realization enters a denominator.
inline constexpr double kEntropyFloor = 1e-8;

/// Certainty degree of x under a concept centered at ex with entropy
/// realization en_prime: exp(-(x-ex)^2 / (2 en_prime^2)).
/// Throws ArgumentError on non-finite input, std::domain_error if en_prime <= 0.
double membership(double x, double ex, double en_prime);

/// Draws n realizations: en_prime ~ Normal(en, he^2) resampled until positive
/// (floored at kEntropyFloor when he == 0 leaves it nonpositive), then
/// x ~ Normal(ex, en_prime^2), u = membership(x, ex, en_prime).
/// Deterministic for a fixed seed.
std::vector<CloudDrop> forward_generate(const CloudDescriptor& desc, std::size_t n,
                                        std::uint64_t seed);

/// Estimates a descriptor from samples:
///   ex = mean, en = sqrt(pi/2) * mean|x - ex|, he = sqrt(|S^2 - en^2|).
/// S^2 uses the population divisor by default. Requires >= 2 finite samples.
CloudDescriptor reverse_generate(std::span<const double> samples,
                                 VarianceMode mode = VarianceMode::population);

}  // namespace cmit
