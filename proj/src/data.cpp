#include "evoprune/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <numeric>

#include "evoprune/error.hpp"
#include "evoprune/rng.hpp"

namespace evoprune {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void check_magic(std::span<const std::uint8_t> bytes, std::size_t header, std::uint32_t magic,
                 const char* what) {
  if (bytes.size() < header) {
    throw FormatError(std::string(what) + ": stream shorter than its " +
                      std::to_string(header) + "-byte header");
  }
  const std::uint32_t got = read_be32(bytes, 0);
  if (got != magic) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s: bad magic 0x%08X (expected 0x%08X)", what, got, magic);
    throw FormatError(buf);
  }
}

}  // namespace

Matrix<float> parse_idx_images(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t kHeader = 16;
  check_magic(bytes, kHeader, kIdxImageMagic, "idx images");
  const std::size_t count = read_be32(bytes, 4);
  const std::size_t rows = read_be32(bytes, 8);
  const std::size_t cols = read_be32(bytes, 12);
  const std::size_t pixels = rows * cols;
  const std::size_t payload = bytes.size() - kHeader;
  const bool consistent =
      pixels == 0 ? payload == 0 : (payload % pixels == 0 && payload / pixels == count);
  if (!consistent) {
    throw TruncationError("idx images: header declares " + std::to_string(count) + " x " +
                          std::to_string(pixels) + " pixels but payload holds " +
                          std::to_string(bytes.size() - kHeader) + " bytes");
  }
  Matrix<float> images(count, pixels);
  const std::uint8_t* src = bytes.data() + kHeader;
  float* dst = images.data();
  for (std::size_t i = 0; i < count * pixels; ++i) {
    dst[i] = static_cast<float>(src[i]) / 255.0f;
  }
  return images;
}

std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t kHeader = 8;
  check_magic(bytes, kHeader, kIdxLabelMagic, "idx labels");
  const std::size_t count = read_be32(bytes, 4);
  if (bytes.size() - kHeader != count) {
    throw TruncationError("idx labels: header declares " + std::to_string(count) +
                          " labels but payload holds " + std::to_string(bytes.size() - kHeader) +
                          " bytes");
  }
  std::vector<std::uint8_t> labels(bytes.begin() + kHeader, bytes.end());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= kNumClasses) {
      throw DomainError("idx labels: label " + std::to_string(labels[i]) + " at index " +
                        std::to_string(i) + " is outside 0-9");
    }
  }
  return labels;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  // gzread passes uncompressed files through unchanged.
  gzFile file = gzopen(path.c_str(), "rb");
  if (file == nullptr) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> out;
  std::array<std::uint8_t, 1 << 16> chunk{};
  for (;;) {
    const int n = gzread(file, chunk.data(), static_cast<unsigned>(chunk.size()));
    if (n < 0) {
      int errnum = 0;
      std::string msg = gzerror(file, &errnum);
      gzclose(file);
      throw std::runtime_error("read error in " + path.string() + ": " + msg);
    }
    if (n == 0) break;
    out.insert(out.end(), chunk.begin(), chunk.begin() + n);
  }
  gzclose(file);
  return out;
}

std::filesystem::path find_mnist_file(const std::filesystem::path& dir, Split split,
                                      bool labels) {
  const std::string prefix = split == Split::train ? "train" : "t10k";
  const std::string kind = labels ? "labels" : "images";
  const std::string idx = labels ? "idx1" : "idx3";
  for (const std::string& stem :
       {prefix + "-" + kind + "-" + idx + "-ubyte", prefix + "-" + kind + "." + idx + "-ubyte"}) {
    for (const std::string& suffix : {std::string{}, std::string{".gz"}}) {
      auto candidate = dir / (stem + suffix);
      if (std::filesystem::is_regular_file(candidate)) return candidate;
    }
  }
  throw std::runtime_error("MNIST " + kind + " file (" + prefix + "-" + kind + "-" + idx +
                           "-ubyte[.gz]) not found in " + dir.string());
}

Dataset make_dataset(Matrix<float> images, std::vector<std::uint8_t> labels, Split split) {
  if (images.rows() != labels.size()) {
    throw ContractViolation("dataset: " + std::to_string(images.rows()) + " images vs " +
                            std::to_string(labels.size()) + " labels");
  }
  return Dataset{std::move(images), std::move(labels), split};
}

Dataset load_mnist(const std::filesystem::path& dir, Split split) {
  auto images = parse_idx_images(read_file_bytes(find_mnist_file(dir, split, false)));
  auto labels = parse_idx_labels(read_file_bytes(find_mnist_file(dir, split, true)));
  return make_dataset(std::move(images), std::move(labels), split);
}

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed,
                                           std::uint64_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto gen = rng::make_engine(seed, rng::Stream::shuffle, epoch);
  rng::shuffle(std::span<std::size_t>(order), gen);
  return order;
}

std::vector<std::vector<std::size_t>> epoch_batch_indices(std::size_t n, std::size_t batch_size,
                                                          std::uint64_t seed,
                                                          std::uint64_t epoch) {
  if (batch_size == 0) throw ContractViolation("batch_size must be at least 1");
  const auto order = epoch_permutation(n, seed, epoch);
  std::vector<std::vector<std::size_t>> batches;
  batches.reserve((n + batch_size - 1) / batch_size);
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t stop = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return batches;
}

Batch gather_batch(const Dataset& dataset, std::span<const std::size_t> indices) {
  Batch batch;
  batch.inputs = Matrix<float>(indices.size(), dataset.input_dim());
  batch.targets.resize(indices.size());
  batch.indices.assign(indices.begin(), indices.end());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto src = dataset.images.row(indices[r]);
    std::copy(src.begin(), src.end(), batch.inputs.row(r).begin());
    batch.targets[r] = dataset.labels[indices[r]];
  }
  return batch;
}

std::vector<Batch> make_epoch_batches(const Dataset& dataset, std::size_t batch_size,
                                      std::uint64_t seed, std::uint64_t epoch) {
  std::vector<Batch> out;
  for (const auto& idx : epoch_batch_indices(dataset.size(), batch_size, seed, epoch)) {
    out.push_back(gather_batch(dataset, idx));
  }
  return out;
}

std::vector<std::uint8_t> encode_idx_images(std::span<const std::uint8_t> pixels,
                                            std::uint32_t count, std::uint32_t rows,
                                            std::uint32_t cols) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + pixels.size());
  write_be32(out, kIdxImageMagic);
  write_be32(out, count);
  write_be32(out, rows);
  write_be32(out, cols);
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + labels.size());
  write_be32(out, kIdxLabelMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

}  // namespace evoprune
