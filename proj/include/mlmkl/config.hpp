#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include <json.hpp>

#include "mlmkl/pipeline.hpp"

namespace mlmkl {

struct SplitConfig {
  Index train = 0;
  Index valid = 0;
};

/// Grids searched greedily per layer by `mlmkl cv`. An empty grid means
/// "use the layer's configured value".
struct CvGrid {
  std::vector<std::vector<KernelSpec>> kernels;
  std::vector<double> gamma;
  std::vector<Index> width;
  std::vector<double> C;
  int repeats = 1;
};

/// One experiment: layers, subsample size, split, classifier and CV grids.
///
/// JSON layout (unknown keys are rejected):
///   { "layers": [ { "kernels": ["arccos(n=1,L=1)", "rbf(gamma=0.01)"],
///                   "width": 60, "kpca_components": 180,
///                   "gamma": 0.1, "basis_size": 10 } ],
///     "subsample": 1000,
///     "split": { "train": 2000, "valid": 500 },
///     "classifier": { "kernel": "arccos(n=1,L=1)", "C": 10, "tol": 0.001 },
///     "cv": { "kernels": [[...], ...], "gamma": [...], "width": [...],
///             "C": [...], "repeats": 3 } }
struct RunConfig {
  std::vector<LayerConfig> layers;
  Index subsample = 3000;
  std::optional<SplitConfig> split;
  ClassifierConfig classifier;
  CvGrid cv;
};

RunConfig parse_config(const nlohmann::json& json);
RunConfig load_config(const std::filesystem::path& path);
/// Canonical JSON form; parse_config(to_json(c)) reproduces c.
nlohmann::json to_json(const RunConfig& config);

}  // namespace mlmkl
