#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "evoprune/data.hpp"
#include "evoprune/rng.hpp"

namespace evoprune::testing {

// Deterministic, learnable toy classification data: each class lights up its
// own block of features, plus uniform noise.
inline Dataset synthetic_dataset(std::size_t samples, std::size_t dim, std::uint64_t seed,
                                 Split split = Split::train) {
  auto gen = rng::make_engine(seed, rng::Stream::synthetic, 100 + static_cast<std::uint64_t>(split));
  Matrix<float> images(samples, dim);
  std::vector<std::uint8_t> labels(samples);
  const std::size_t block = dim / kNumClasses == 0 ? 1 : dim / kNumClasses;
  for (std::size_t s = 0; s < samples; ++s) {
    const auto label = static_cast<std::uint8_t>(rng::uniform_below(gen, kNumClasses));
    labels[s] = label;
    for (std::size_t k = 0; k < dim; ++k) {
      images(s, k) = static_cast<float>(rng::uniform(gen, 0.0, 0.3));
    }
    for (std::size_t k = label * block; k < std::min(dim, (label + 1u) * block); ++k) {
      images(s, k) += 0.7f;
    }
  }
  return make_dataset(std::move(images), std::move(labels), split);
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("evoprune_test_" + std::to_string(stamp) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace evoprune::testing
