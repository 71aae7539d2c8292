#include "mlmkl/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

#include "mlmkl/data.hpp"
#include "mlmkl/error.hpp"

namespace mlmkl {

void LayerConfig::validate() const {
  if (base_kernels.empty()) throw Error(ErrorCode::ConfigError, "layer needs at least one base kernel");
  for (const auto& k : base_kernels) k.validate();
  if (width < 1) throw Error(ErrorCode::ConfigError, "layer width must be >= 1");
  if (width > kpca_components) throw Error(ErrorCode::ConfigError, "layer width exceeds kpca_components");
  if (basis_size < 1) throw Error(ErrorCode::ConfigError, "basis_size must be >= 1");
  if (!(gamma >= 0.0)) throw Error(ErrorCode::ConfigError, "gamma must be nonnegative");
}

namespace {

Matrix take_rows(const Matrix& features, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), features.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = features.row(rows[r]);
  return out;
}

// Combined kernel rows against the layer's fit samples, before KPCA.
Matrix combined_cross(const LayerModel& layer, const Matrix& features) {
  std::vector<Matrix> parts;
  parts.reserve(layer.kernel_specs.size());
  for (const auto& spec : layer.kernel_specs) {
    parts.push_back(cross_gram(features, layer.fit_samples, spec));
  }
  return weighted_sum(parts, layer.mu);
}

}  // namespace

LayerFit fit_layer(const Matrix& features, std::span<const int> labels, const LayerConfig& config,
                   std::span<const Index> fit_rows) {
  config.validate();
  if (features.rows() == 0) throw Error(ErrorCode::InvalidArgument, "no training rows");
  if (static_cast<Index>(labels.size()) != features.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "one label per row required");
  }

  LayerFit out;
  LayerModel& layer = out.model;
  layer.kernel_specs = config.base_kernels;
  layer.fit_samples = fit_rows.empty() ? features : take_rows(features, fit_rows);
  const Matrix& sample = layer.fit_samples;

  // P is the linear Gram of this layer's input (the previous layer's output).
  const Matrix linear_gram = gram(sample, KernelSpec::linear()).values();
  std::vector<Matrix> base_grams;
  base_grams.reserve(config.base_kernels.size());
  for (const auto& spec : config.base_kernels) base_grams.push_back(gram(sample, spec).values());

  if (base_grams.size() == 1) {
    layer.mu = KernelWeights::uniform(1);
  } else {
    const Index basis = std::min(config.basis_size, sample.rows() - 1);
    if (basis != config.basis_size) {
      warn("basis_size reduced to " + std::to_string(basis) + " for " +
           std::to_string(sample.rows()) + " fit samples");
    }
    const UmklProblem problem = make_problem(linear_gram, base_grams, basis, config.gamma);
    SimplexQpResult solved = solve_simplex_qp(assemble_qp(problem), config.solver);
    layer.mu = solved.weights;
    out.objective_trace = std::move(solved.objective_trace);
  }

  const GramMatrix combined = combine(base_grams, layer.mu);
  layer.kpca = fit_kpca(combined, config.kpca_components);

  Index width = config.width;
  if (layer.kpca.components() < width) {
    warn("layer width " + std::to_string(width) + " exceeds the " +
         std::to_string(layer.kpca.components()) + " available components");
    width = layer.kpca.components();
  }
  // Every row goes through the same out-of-sample path used at test time.
  const Matrix projected = transform(layer.kpca, combined_cross(layer, features));
  Selection selection = select_features(projected, labels, width);
  layer.selected = selection.ranking.selected;
  out.ranking = std::move(selection.ranking);
  out.features = std::move(selection.reduced);
  return out;
}

Matrix transform_layer(const LayerModel& layer, const Matrix& features) {
  if (features.cols() != layer.input_dim()) {
    throw Error(ErrorCode::ShapeError, "expected input dimension " + std::to_string(layer.input_dim()) +
                                           ", got " + std::to_string(features.cols()));
  }
  if (features.rows() == 0) return Matrix(0, layer.width());
  return take_columns(transform(layer.kpca, combined_cross(layer, features)), layer.selected);
}

std::uint64_t layer_seed(std::uint64_t seed, std::size_t layer) {
  return seed ^ (0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(layer) + 1));
}

std::vector<Index> draw_subsample(Index n, Index size, std::uint64_t seed) {
  if (size >= n) {
    std::vector<Index> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), Index{0});
    return all;
  }
  std::vector<Index> perm = seeded_permutation(n, seed);
  perm.resize(static_cast<std::size_t>(size));
  std::sort(perm.begin(), perm.end());
  return perm;
}

MlmklModel fit(const Matrix& features, std::span<const int> labels,
               const std::vector<LayerConfig>& configs, const FitOptions& options) {
  if (configs.empty()) throw Error(ErrorCode::ConfigError, "at least one layer required");
  if (options.subsample < 2) throw Error(ErrorCode::ConfigError, "subsample must be >= 2");

  MlmklModel model;
  model.metadata.config = options.config_snapshot;
  model.metadata.dataset_fingerprint = fingerprint(features, labels);
  model.metadata.seed = options.seed;
  model.metadata.subsample = options.subsample;

  Matrix current = features;
  for (std::size_t l = 0; l < configs.size(); ++l) {
    const auto start = std::chrono::steady_clock::now();
    const auto rows = draw_subsample(current.rows(), options.subsample, layer_seed(options.seed, l));
    LayerFit layer_fit = fit_layer(current, labels, configs[l], rows);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (options.on_layer) options.on_layer(LayerProgress{l, &layer_fit, seconds});
    current = std::move(layer_fit.features);
    model.layers.push_back(std::move(layer_fit.model));
  }

  SvmOptions svm;
  svm.C = options.classifier.C;
  svm.tol = options.classifier.tol;
  model.classifier = train_svm(current, labels, options.classifier.kernel, svm);
  return model;
}

Matrix transform(const MlmklModel& model, const Matrix& features) {
  Matrix current = features;
  for (const auto& layer : model.layers) current = transform_layer(layer, current);
  return current;
}

std::vector<int> predict(const MlmklModel& model, const Matrix& features) {
  return predict_samples(model.classifier, transform(model, features));
}

}  // namespace mlmkl
