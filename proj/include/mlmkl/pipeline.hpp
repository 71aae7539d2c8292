#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mlmkl/featsel.hpp"
#include "mlmkl/kernels.hpp"
#include "mlmkl/kpca.hpp"
#include "mlmkl/svm.hpp"
#include "mlmkl/umkl.hpp"

namespace mlmkl {

struct LayerConfig {
  std::vector<KernelSpec> base_kernels;
  Index width = 150;
  Index kpca_components = 450;
  double gamma = 0.1;
  Index basis_size = 10;
  SimplexQpOptions solver;

  void validate() const;
};

/// Everything needed to push new rows through one fitted layer.
struct LayerModel {
  KernelWeights mu;
  std::vector<KernelSpec> kernel_specs;
  KpcaModel kpca;
  std::vector<Index> selected;
  Matrix fit_samples;  // rows the layer's Grams were computed on

  Index input_dim() const noexcept { return fit_samples.cols(); }
  Index width() const noexcept { return static_cast<Index>(selected.size()); }
};

struct LayerFit {
  LayerModel model;
  Matrix features;  // every input row mapped through the layer, n x width
  FeatureRanking ranking;
  std::vector<double> objective_trace;
};

/// Fits one layer: kernel weights on the simplex, kernel PCA on the combined
/// Gram, then supervised selection over all rows of X. `fit_rows` picks the
/// rows used for the Grams and KPCA (all rows when empty).
LayerFit fit_layer(const Matrix& features, std::span<const int> labels, const LayerConfig& config,
                   std::span<const Index> fit_rows = {});

/// Selected layer features for arbitrary rows (t x input_dim -> t x width).
Matrix transform_layer(const LayerModel& layer, const Matrix& features);

struct ClassifierConfig {
  KernelSpec kernel = KernelSpec::arc_cosine(1, 1);
  double C = 10.0;
  double tol = 1e-3;
};

struct ModelMetadata {
  std::string config;  // JSON snapshot of the run configuration
  std::string dataset_fingerprint;
  std::uint64_t seed = 0;
  Index subsample = 0;
};

struct MlmklModel {
  std::vector<LayerModel> layers;
  SvmModel classifier;
  ModelMetadata metadata;
};

struct LayerProgress {
  std::size_t layer = 0;
  const LayerFit* fit = nullptr;
  double seconds = 0.0;
};

struct FitOptions {
  Index subsample = 3000;
  std::uint64_t seed = 0;
  ClassifierConfig classifier;
  std::string config_snapshot;
  std::function<void(const LayerProgress&)> on_layer;
};

/// Sorted random subset of 0..n-1 of size min(size, n), determined by seed.
std::vector<Index> draw_subsample(Index n, Index size, std::uint64_t seed);

/// Seed used for the subsample of layer `layer`.
std::uint64_t layer_seed(std::uint64_t seed, std::size_t layer);

/// Greedy layerwise fit followed by the classifier on the last representation.
MlmklModel fit(const Matrix& features, std::span<const int> labels,
               const std::vector<LayerConfig>& configs, const FitOptions& options);

/// Final representation of new rows. Zero rows in, zero rows out.
Matrix transform(const MlmklModel& model, const Matrix& features);

std::vector<int> predict(const MlmklModel& model, const Matrix& features);

inline constexpr std::uint32_t kModelFormatVersion = 1;

std::vector<std::uint8_t> serialize_model(const MlmklModel& model);
/// Throws Truncated, BadMagic, UnsupportedVersion or ChecksumMismatch before
/// constructing anything.
MlmklModel deserialize_model(std::span<const std::uint8_t> bytes);

void save_model(const MlmklModel& model, const std::filesystem::path& path);
MlmklModel load_model(const std::filesystem::path& path);

}  // namespace mlmkl
