#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mlmkl/types.hpp"

namespace mlmkl {

inline constexpr Index kImagePixels = 784;

struct Dataset {
  Matrix features;  // n x 784, values in [0, 1]
  std::vector<int> labels;
  std::string name;

  Index size() const noexcept { return features.rows(); }
  /// Feature range [0,1], labels in 0..9, one label per row, n > 0.
  void validate() const;
};

/// Whitespace-separated text rows of 784 pixel values followed by the label.
Dataset load_amat(const std::filesystem::path& path);
void write_amat(const std::filesystem::path& path, const Dataset& dataset);

/// Standard MNIST IDX files (images magic 0x00000803, labels 0x00000801).
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Rows of `dataset` at `indices`, in that order.
Dataset subset(const Dataset& dataset, std::span<const Index> indices);

/// Seeded shuffle, then the first n_train rows and the next n_valid rows.
std::pair<Dataset, Dataset> split(const Dataset& dataset, Index n_train, Index n_valid,
                                  std::uint64_t seed);

/// Deterministic permutation of 0..n-1 (Fisher-Yates on mt19937_64 with
/// rejection sampling, identical across standard libraries).
std::vector<Index> seeded_permutation(Index n, std::uint64_t seed);

/// CRC32 over labels and feature bits, as 8 hex digits.
std::string fingerprint(const Matrix& features, std::span<const int> labels);

}  // namespace mlmkl
