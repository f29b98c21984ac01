#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "evoprune/tensor.hpp"

namespace evoprune {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
inline constexpr std::uint8_t kNumClasses = 10;

enum class Split { train, test };

struct Dataset {
  Matrix<float> images;               // samples x pixels, values in [0, 1]
  std::vector<std::uint8_t> labels;   // class indices 0-9
  Split split = Split::train;

  std::size_t size() const { return labels.size(); }
  std::size_t input_dim() const { return images.cols(); }
};

struct Batch {
  Matrix<float> inputs;
  std::vector<std::uint8_t> targets;
  std::vector<std::size_t> indices;  // rows of the source dataset

  std::size_t size() const { return targets.size(); }
};

// IDX3 image stream -> count x (rows*cols) matrix, pixels divided by 255.
Matrix<float> parse_idx_images(std::span<const std::uint8_t> bytes);

// IDX1 label stream -> class indices. Bytes above 9 raise DomainError.
std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes);

// Reads a whole file; gzip-compressed input is inflated transparently.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

// Looks for the standard MNIST file names (plain or .gz) under `dir`.
std::filesystem::path find_mnist_file(const std::filesystem::path& dir, Split split,
                                      bool labels);

Dataset load_mnist(const std::filesystem::path& dir, Split split);

Dataset make_dataset(Matrix<float> images, std::vector<std::uint8_t> labels, Split split);

// Permutation of 0..n-1 drawn from the shuffle stream for (seed, epoch).
std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed,
                                           std::uint64_t epoch);

// The epoch permutation cut into consecutive chunks of batch_size; the last
// chunk holds the remainder.
std::vector<std::vector<std::size_t>> epoch_batch_indices(std::size_t n, std::size_t batch_size,
                                                          std::uint64_t seed,
                                                          std::uint64_t epoch);

Batch gather_batch(const Dataset& dataset, std::span<const std::size_t> indices);

std::vector<Batch> make_epoch_batches(const Dataset& dataset, std::size_t batch_size,
                                      std::uint64_t seed, std::uint64_t epoch);

// Builds IDX byte streams; used by tests and fixtures.
std::vector<std::uint8_t> encode_idx_images(std::span<const std::uint8_t> pixels,
                                            std::uint32_t count, std::uint32_t rows,
                                            std::uint32_t cols);
std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels);

}  // namespace evoprune
