#pragma once

// Every random draw in the project comes from std::mt19937_64, whose output
// sequence is fixed by the C++ standard. The distribution helpers below are
// spelled out here rather than taken from <random>, because the standard
// distributions are implementation-defined and would break cross-platform
// reproducibility.
//
//   stream seed  = splitmix64 chain over (seed, stream id, index)
//   uniform_below(n): 64-bit rejection sampling, r % n over r >= (2^64 - n) % n
//   uniform01:   (r >> 11) * 2^-53
//   shuffle:     Fisher-Yates, i from n-1 down to 1, j = uniform_below(i + 1)

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace evoprune::rng {

enum class Stream : std::uint64_t {
  shuffle = 1,
  init = 2,
  synthetic = 3,
};

std::uint64_t splitmix64(std::uint64_t& state);

// Seed for the `index`-th generator of a given stream.
std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t index);

std::mt19937_64 make_engine(std::uint64_t seed, Stream stream, std::uint64_t index);

std::uint64_t uniform_below(std::mt19937_64& gen, std::uint64_t bound);

double uniform01(std::mt19937_64& gen);

// Uniform on [lo, hi).
double uniform(std::mt19937_64& gen, double lo, double hi);

template <typename T>
void shuffle(std::span<T> values, std::mt19937_64& gen) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(gen, i));
    std::swap(values[i - 1], values[j]);
  }
}

}  // namespace evoprune::rng
