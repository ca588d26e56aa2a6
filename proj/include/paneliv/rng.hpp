#pragma once

#include <cstdint>
#include <random>

namespace paneliv {

// SplitMix64-derived child seed; deterministic across platforms.
// Distinct (a, b) pairs map to well-separated streams of one master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0);

// Deterministic random source.  All distributions are implemented here
// (rather than via std::*_distribution) so that sequences are identical
// across standard-library implementations.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // Uniform on [0, 1) with 53-bit resolution.
    double uniform();

    // Uniform integer on [0, n); n must be positive.
    std::uint64_t uniform_int(std::uint64_t n);

    // Standard normal via Box-Muller (cosine branch only).
    double normal();

    // Poisson draw; Knuth multiplication below mean 30, Hormann PTRS above.
    long poisson(double mean);

  private:
    std::mt19937_64 gen_;
};

}  // namespace paneliv
