#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "mlmkl/data.hpp"
#include "mlmkl/types.hpp"

namespace mlmkl::testing {

inline void quiet(std::string_view) {}

inline Matrix random_matrix(std::mt19937_64& rng, Index rows, Index cols, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  }
  return m;
}

inline Vector random_simplex_point(std::mt19937_64& rng, Index m) {
  std::exponential_distribution<double> expo(1.0);
  Vector v(m);
  for (Index t = 0; t < m; ++t) v(t) = expo(rng);
  return v / v.sum();
}

inline Index uniform_int(std::mt19937_64& rng, Index lo, Index hi) {
  return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

/// Two Gaussian blobs in `dim` dimensions, centred at +/- offset on every axis.
inline Matrix two_blobs(std::mt19937_64& rng, Index per_class, Index dim, double offset,
                        double spread, std::vector<int>& labels, int first_label = 0) {
  std::normal_distribution<double> noise(0.0, spread);
  Matrix x(2 * per_class, dim);
  labels.clear();
  for (Index i = 0; i < 2 * per_class; ++i) {
    const bool second = i >= per_class;
    for (Index k = 0; k < dim; ++k) x(i, k) = (second ? offset : -offset) + noise(rng);
    labels.push_back(second ? first_label + 1 : first_label);
  }
  return x;
}

/// Image-shaped toy data: each class is a random prototype plus pixel noise.
inline Dataset toy_images(std::uint64_t seed, int classes, Index per_class, double noise = 0.05) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, noise);
  Matrix prototypes(classes, kImagePixels);
  for (Index c = 0; c < classes; ++c) {
    for (Index k = 0; k < kImagePixels; ++k) prototypes(c, k) = unit(rng) < 0.3 ? unit(rng) : 0.0;
  }
  Dataset ds;
  ds.name = "toy";
  ds.features.resize(classes * per_class, kImagePixels);
  for (Index i = 0; i < classes * per_class; ++i) {
    const int c = static_cast<int>(i % classes);
    for (Index k = 0; k < kImagePixels; ++k) {
      ds.features(i, k) = std::clamp(prototypes(c, k) + jitter(rng), 0.0, 1.0);
    }
    ds.labels.push_back(c);
  }
  return ds;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("mlmkl-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace mlmkl::testing
