#include "mlmkl/config.hpp"

#include <fstream>
#include <initializer_list>
#include <set>
#include <string>

#include "mlmkl/error.hpp"

namespace mlmkl {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::ConfigError, where + ": " + what);
}

void reject_unknown(const json& object, const std::string& where,
                    std::initializer_list<const char*> allowed) {
  if (!object.is_object()) config_error(where, "expected an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : object.items()) {
    if (!keys.contains(key)) config_error(where, "unknown key '" + key + "'");
  }
}

double number(const json& value, const std::string& where) {
  if (!value.is_number()) config_error(where, "expected a number");
  return value.get<double>();
}

Index integer(const json& value, const std::string& where) {
  if (!value.is_number_integer()) config_error(where, "expected an integer");
  return value.get<Index>();
}

KernelSpec kernel(const json& value, const std::string& where) {
  if (!value.is_string()) config_error(where, "expected a kernel string such as \"rbf(gamma=0.01)\"");
  try {
    return KernelSpec::parse(value.get<std::string>());
  } catch (const Error& e) {
    config_error(where, e.what());
  }
}

std::vector<KernelSpec> kernel_list(const json& value, const std::string& where) {
  if (!value.is_array() || value.empty()) config_error(where, "expected a nonempty list of kernels");
  std::vector<KernelSpec> out;
  for (std::size_t i = 0; i < value.size(); ++i) {
    out.push_back(kernel(value[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

template <typename T, typename F>
std::vector<T> grid(const json& value, const std::string& where, F convert) {
  if (!value.is_array() || value.empty()) config_error(where, "expected a nonempty list");
  std::vector<T> out;
  for (std::size_t i = 0; i < value.size(); ++i) {
    out.push_back(convert(value[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

LayerConfig parse_layer(const json& j, const std::string& where) {
  reject_unknown(j, where, {"kernels", "width", "kpca_components", "gamma", "basis_size"});
  LayerConfig layer;
  if (!j.contains("kernels")) config_error(where, "missing 'kernels'");
  if (!j.contains("width")) config_error(where, "missing 'width'");
  layer.base_kernels = kernel_list(j["kernels"], where + ".kernels");
  layer.width = integer(j["width"], where + ".width");
  layer.kpca_components =
      j.contains("kpca_components") ? integer(j["kpca_components"], where + ".kpca_components")
                                    : 3 * layer.width;
  if (j.contains("gamma")) layer.gamma = number(j["gamma"], where + ".gamma");
  if (j.contains("basis_size")) layer.basis_size = integer(j["basis_size"], where + ".basis_size");
  try {
    layer.validate();
  } catch (const Error& e) {
    config_error(where, e.what());
  }
  return layer;
}

}  // namespace

RunConfig parse_config(const json& j) {
  reject_unknown(j, "config", {"layers", "subsample", "split", "classifier", "cv"});
  RunConfig config;
  if (!j.contains("layers") || !j["layers"].is_array() || j["layers"].empty()) {
    config_error("config", "'layers' must be a nonempty list");
  }
  for (std::size_t l = 0; l < j["layers"].size(); ++l) {
    config.layers.push_back(parse_layer(j["layers"][l], "layers[" + std::to_string(l) + "]"));
  }
  if (j.contains("subsample")) {
    config.subsample = integer(j["subsample"], "subsample");
    if (config.subsample < 2) config_error("subsample", "must be >= 2");
  }
  if (j.contains("split")) {
    const json& s = j["split"];
    reject_unknown(s, "split", {"train", "valid"});
    SplitConfig split;
    if (!s.contains("train")) config_error("split", "missing 'train'");
    split.train = integer(s["train"], "split.train");
    split.valid = s.contains("valid") ? integer(s["valid"], "split.valid") : 0;
    if (split.train < 1 || split.valid < 0) config_error("split", "sizes must be positive");
    config.split = split;
  }
  if (j.contains("classifier")) {
    const json& c = j["classifier"];
    reject_unknown(c, "classifier", {"kernel", "C", "tol"});
    if (c.contains("kernel")) config.classifier.kernel = kernel(c["kernel"], "classifier.kernel");
    if (c.contains("C")) config.classifier.C = number(c["C"], "classifier.C");
    if (c.contains("tol")) config.classifier.tol = number(c["tol"], "classifier.tol");
    if (!(config.classifier.C > 0.0)) config_error("classifier.C", "must be positive");
    if (!(config.classifier.tol > 0.0)) config_error("classifier.tol", "must be positive");
  }
  if (j.contains("cv")) {
    const json& c = j["cv"];
    reject_unknown(c, "cv", {"kernels", "gamma", "width", "C", "repeats"});
    if (c.contains("kernels")) {
      config.cv.kernels = grid<std::vector<KernelSpec>>(c["kernels"], "cv.kernels", kernel_list);
    }
    if (c.contains("gamma")) config.cv.gamma = grid<double>(c["gamma"], "cv.gamma", number);
    if (c.contains("width")) config.cv.width = grid<Index>(c["width"], "cv.width", integer);
    if (c.contains("C")) config.cv.C = grid<double>(c["C"], "cv.C", number);
    if (c.contains("repeats")) {
      config.cv.repeats = static_cast<int>(integer(c["repeats"], "cv.repeats"));
      if (config.cv.repeats < 1) config_error("cv.repeats", "must be >= 1");
    }
    for (double g : config.cv.gamma) {
      if (!(g >= 0.0)) config_error("cv.gamma", "values must be nonnegative");
    }
    for (Index w : config.cv.width) {
      if (w < 1) config_error("cv.width", "values must be >= 1");
    }
    for (double cc : config.cv.C) {
      if (!(cc > 0.0)) config_error("cv.C", "values must be positive");
    }
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
  return parse_config(j);
}

json to_json(const RunConfig& config) {
  auto kernels = [](const std::vector<KernelSpec>& specs) {
    json out = json::array();
    for (const auto& s : specs) out.push_back(s.to_string());
    return out;
  };
  json j;
  j["layers"] = json::array();
  for (const auto& layer : config.layers) {
    j["layers"].push_back({{"kernels", kernels(layer.base_kernels)},
                           {"width", layer.width},
                           {"kpca_components", layer.kpca_components},
                           {"gamma", layer.gamma},
                           {"basis_size", layer.basis_size}});
  }
  j["subsample"] = config.subsample;
  if (config.split) j["split"] = {{"train", config.split->train}, {"valid", config.split->valid}};
  j["classifier"] = {{"kernel", config.classifier.kernel.to_string()},
                     {"C", config.classifier.C},
                     {"tol", config.classifier.tol}};
  json cv;
  if (!config.cv.kernels.empty()) {
    cv["kernels"] = json::array();
    for (const auto& set : config.cv.kernels) cv["kernels"].push_back(kernels(set));
  }
  if (!config.cv.gamma.empty()) cv["gamma"] = config.cv.gamma;
  if (!config.cv.width.empty()) cv["width"] = config.cv.width;
  if (!config.cv.C.empty()) cv["C"] = config.cv.C;
  cv["repeats"] = config.cv.repeats;
  j["cv"] = cv;
  return j;
}

}  // namespace mlmkl
