#include "mlmkl/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <thread>

#include "mlmkl/config.hpp"
#include "mlmkl/data.hpp"
#include "mlmkl/error.hpp"
#include "mlmkl/pipeline.hpp"

namespace mlmkl::cli {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fixed(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, value);
  return buf;
}

// "images.idx,labels.idx" selects the IDX loader; anything else is amat.
Dataset load_dataset(const std::string& spec) {
  const auto comma = spec.find(',');
  if (comma != std::string::npos) return load_idx(spec.substr(0, comma), spec.substr(comma + 1));
  return load_amat(spec);
}

double error_percent(std::span<const int> predicted, std::span<const int> truth) {
  if (truth.empty()) return 0.0;
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) wrong += predicted[i] != truth[i] ? 1 : 0;
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(truth.size());
}

unsigned job_count(unsigned requested, std::size_t tasks) {
  unsigned jobs = std::max(1u, requested);
  if (const char* cap = std::getenv("MLMKL_THREADS")) {
    const long v = std::strtol(cap, nullptr, 10);
    if (v >= 1) jobs = std::min(jobs, static_cast<unsigned>(v));
  }
  return static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(1, tasks)));
}

// Results are written by index, so output order never depends on scheduling.
void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> failures(count);
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          failures[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
}

struct Splits {
  Dataset train;
  Dataset valid;
};

Splits make_splits(const RunConfig& config, const Dataset& data, std::uint64_t seed) {
  if (!config.split) return {data, Dataset{}};
  auto [train, valid] = split(data, config.split->train, config.split->valid, seed);
  return {std::move(train), std::move(valid)};
}

std::string weights_table(const MlmklModel& model) {
  std::size_t width = 0;
  for (const auto& layer : model.layers) width = std::max<std::size_t>(width, layer.mu.size());
  std::string out = "layer";
  for (std::size_t t = 0; t < width; ++t) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), " %8s", ("k" + std::to_string(t + 1)).c_str());
    out += buf;
  }
  out += '\n';
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%-5zu", l + 1);
    out += buf;
    for (Index t = 0; t < model.layers[l].mu.size(); ++t) {
      std::snprintf(buf, sizeof(buf), " %8.4f", model.layers[l].mu[t]);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

json weights_json(const MlmklModel& model) {
  json layers = json::array();
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    json kernels = json::array();
    for (const auto& k : layer.kernel_specs) kernels.push_back(k.to_string());
    std::vector<double> mu(layer.mu.values().data(), layer.mu.values().data() + layer.mu.size());
    layers.push_back({{"layer", l + 1}, {"kernels", kernels}, {"weights", mu}, {"width", layer.width()}});
  }
  return layers;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string config;
  std::string train;
  std::string out;
  std::string format = "text";
  std::uint64_t seed = 0;
  std::optional<Index> subsample;
};

int cmd_train(const TrainArgs& args, std::ostream& out) {
  const auto total_start = Clock::now();
  RunConfig config = load_config(args.config);
  if (args.subsample) {
    if (*args.subsample < 2) throw Error(ErrorCode::ConfigError, "--subsample must be >= 2");
    config.subsample = *args.subsample;
  }

  auto stage = Clock::now();
  const Dataset data = load_dataset(args.train);
  const Splits splits = make_splits(config, data, args.seed);
  const double load_seconds = seconds_since(stage);

  struct LayerRow {
    double seconds = 0.0;
    std::optional<double> valid_error;
  };
  std::vector<LayerRow> rows;
  Matrix valid_repr = splits.valid.features;
  const bool has_valid = splits.valid.size() > 0;

  FitOptions options;
  options.subsample = config.subsample;
  options.seed = args.seed;
  options.classifier = config.classifier;
  options.config_snapshot = to_json(config).dump();
  options.on_layer = [&](const LayerProgress& progress) {
    LayerRow row;
    row.seconds = progress.seconds;
    if (has_valid) {
      valid_repr = transform_layer(progress.fit->model, valid_repr);
      // The last layer is scored with the final classifier below.
      if (progress.layer + 1 < config.layers.size()) {
        SvmOptions svm;
        svm.C = config.classifier.C;
        svm.tol = config.classifier.tol;
        const SvmModel probe =
            train_svm(progress.fit->features, splits.train.labels, config.classifier.kernel, svm);
        row.valid_error = error_percent(predict_samples(probe, valid_repr), splits.valid.labels);
      }
    }
    rows.push_back(row);
  };

  stage = Clock::now();
  const MlmklModel model = fit(splits.train.features, splits.train.labels, config.layers, options);
  const double fit_seconds = seconds_since(stage);
  if (has_valid) {
    rows.back().valid_error =
        error_percent(predict_samples(model.classifier, valid_repr), splits.valid.labels);
  }
  save_model(model, args.out);
  const double total_seconds = seconds_since(total_start);

  if (args.format == "json") {
    json layers = weights_json(model);
    for (std::size_t l = 0; l < rows.size(); ++l) {
      layers[l]["seconds"] = rows[l].seconds;
      layers[l]["valid_error_percent"] =
          rows[l].valid_error ? json(*rows[l].valid_error) : json(nullptr);
    }
    out << json{{"schema", "mlmkl.train/1"},
                {"model", args.out},
                {"n_train", splits.train.size()},
                {"n_valid", splits.valid.size()},
                {"layers", layers},
                {"seconds", {{"load", load_seconds}, {"fit", fit_seconds}, {"total", total_seconds}}}}
               .dump(2)
        << '\n';
    return 0;
  }

  out << "trained " << model.layers.size() << "-layer model on " << splits.train.size()
      << " samples (" << splits.valid.size() << " validation) -> " << args.out << "\n\n";
  out << "kernel weights per layer\n" << weights_table(model) << '\n';
  out << "validation error by layer (csv)\nlayer,valid_error_percent\n";
  for (std::size_t l = 0; l < rows.size(); ++l) {
    out << l + 1 << ',' << (rows[l].valid_error ? fixed(*rows[l].valid_error, 2) : "") << '\n';
  }
  out << "\nwall clock (s)\n";
  out << "load " << fixed(load_seconds, 3) << '\n';
  for (std::size_t l = 0; l < rows.size(); ++l) {
    out << "layer " << l + 1 << ' ' << fixed(rows[l].seconds, 3) << '\n';
  }
  out << "fit " << fixed(fit_seconds, 3) << '\n';
  out << "total " << fixed(total_seconds, 3) << '\n';
  return 0;
}

// ---------------------------------------------------------------- eval

int cmd_eval(const std::string& model_path, const std::string& test, const std::string& format,
             std::ostream& out) {
  const MlmklModel model = load_model(model_path);
  const Dataset data = load_dataset(test);
  const auto predicted = predict(model, data.features);
  const double error = error_percent(predicted, data.labels);

  std::set<int> class_set(model.classifier.classes.begin(), model.classifier.classes.end());
  class_set.insert(data.labels.begin(), data.labels.end());
  const std::vector<int> classes(class_set.begin(), class_set.end());
  std::map<int, std::size_t> slot;
  for (std::size_t c = 0; c < classes.size(); ++c) slot[classes[c]] = c;
  std::vector<std::vector<long>> confusion(classes.size(), std::vector<long>(classes.size(), 0));
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    ++confusion[slot[data.labels[i]]][slot[predicted[i]]];
  }

  if (format == "json") {
    out << json{{"schema", "mlmkl.eval/1"},
                {"n", data.size()},
                {"error_percent", error},
                {"classes", classes},
                {"confusion", confusion}}
               .dump(2)
        << '\n';
    return 0;
  }
  out << "samples " << data.size() << '\n';
  out << "loss " << fixed(error, 2) << "%\n\n";
  out << "confusion (rows: true, columns: predicted)\n     ";
  for (int c : classes) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), " %6d", c);
    out << buf;
  }
  out << '\n';
  for (std::size_t r = 0; r < classes.size(); ++r) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%5d", classes[r]);
    out << buf;
    for (long v : confusion[r]) {
      std::snprintf(buf, sizeof(buf), " %6ld", v);
      out << buf;
    }
    out << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------- weights

int cmd_weights(const std::string& model_path, const std::string& format, std::ostream& out) {
  const MlmklModel model = load_model(model_path);
  if (format == "json") {
    out << json{{"schema", "mlmkl.weights/1"}, {"layers", weights_json(model)}}.dump(2) << '\n';
  } else {
    out << weights_table(model);
  }
  return 0;
}

// ---------------------------------------------------------------- cv

struct CvArgs {
  std::string config;
  std::string train;
  std::string format = "text";
  std::string out;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  std::optional<Index> subsample;
};

struct Candidate {
  LayerConfig layer;
  std::size_t index = 0;
};

std::vector<Candidate> layer_candidates(const LayerConfig& base, const CvGrid& grid) {
  const auto kernel_sets =
      grid.kernels.empty() ? std::vector<std::vector<KernelSpec>>{base.base_kernels} : grid.kernels;
  const auto gammas = grid.gamma.empty() ? std::vector<double>{base.gamma} : grid.gamma;
  const auto widths = grid.width.empty() ? std::vector<Index>{base.width} : grid.width;
  std::vector<Candidate> out;
  for (const auto& kernels : kernel_sets) {
    for (double gamma : gammas) {
      for (Index width : widths) {
        Candidate c;
        c.layer = base;
        c.layer.base_kernels = kernels;
        c.layer.gamma = gamma;
        c.layer.width = width;
        if (c.layer.kpca_components < width) c.layer.kpca_components = 3 * width;
        c.index = out.size();
        out.push_back(std::move(c));
      }
    }
  }
  return out;
}

struct Stats {
  double mean = 0.0;
  double stdev = 0.0;
};

Stats summarize(const std::vector<double>& values) {
  Stats s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stdev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

int cmd_cv(const CvArgs& args, std::ostream& out) {
  RunConfig config = load_config(args.config);
  if (args.subsample) {
    if (*args.subsample < 2) throw Error(ErrorCode::ConfigError, "--subsample must be >= 2");
    config.subsample = *args.subsample;
  }
  if (!config.split || config.split->valid < 1) {
    throw Error(ErrorCode::ConfigError, "cv needs a split with a nonempty validation set");
  }
  const Dataset data = load_dataset(args.train);
  const Splits splits = make_splits(config, data, args.seed);
  const auto repeats = static_cast<std::size_t>(config.cv.repeats);
  const auto c_grid = config.cv.C.empty() ? std::vector<double>{config.classifier.C} : config.cv.C;

  // Representation of train/valid after the layers chosen so far, per repeat.
  struct Prefix {
    Matrix train;
    Matrix valid;
  };
  std::vector<Prefix> prefix(repeats, Prefix{splits.train.features, splits.valid.features});

  struct Row {
    std::size_t layer;
    std::size_t candidate;
    LayerConfig config;
    double C;
    Stats stats;
    bool chosen = false;
  };
  std::vector<Row> table;
  RunConfig best = config;

  for (std::size_t l = 0; l < config.layers.size(); ++l) {
    const auto candidates = layer_candidates(config.layers[l], config.cv);
    const std::size_t tasks = candidates.size() * repeats;
    // errors[task][c], representations[task]
    std::vector<std::vector<double>> errors(tasks);
    std::vector<Prefix> produced(tasks);

    parallel_for(tasks, job_count(args.jobs, tasks), [&](std::size_t task) {
      const Candidate& cand = candidates[task / repeats];
      const std::size_t r = task % repeats;
      const std::uint64_t seed = args.seed + r;
      const Prefix& in = prefix[r];
      const auto rows = draw_subsample(in.train.rows(), config.subsample, layer_seed(seed, l));
      LayerFit layer_fit = fit_layer(in.train, splits.train.labels, cand.layer, rows);
      Prefix next{std::move(layer_fit.features), transform_layer(layer_fit.model, in.valid)};
      for (double c : c_grid) {
        SvmOptions svm;
        svm.C = c;
        svm.tol = config.classifier.tol;
        const SvmModel probe = train_svm(next.train, splits.train.labels, config.classifier.kernel, svm);
        errors[task].push_back(error_percent(predict_samples(probe, next.valid), splits.valid.labels));
      }
      produced[task] = std::move(next);
    });

    std::size_t best_row = table.size();
    for (const auto& cand : candidates) {
      for (std::size_t ci = 0; ci < c_grid.size(); ++ci) {
        std::vector<double> per_repeat;
        for (std::size_t r = 0; r < repeats; ++r) per_repeat.push_back(errors[cand.index * repeats + r][ci]);
        table.push_back(Row{l, cand.index, cand.layer, c_grid[ci], summarize(per_repeat)});
        if (table.back().stats.mean < table[best_row].stats.mean) best_row = table.size() - 1;
      }
    }
    Row& chosen = table[best_row];
    chosen.chosen = true;
    best.layers[l] = chosen.config;
    best.classifier.C = chosen.C;
    for (std::size_t r = 0; r < repeats; ++r) {
      prefix[r] = std::move(produced[chosen.candidate * repeats + r]);
    }
  }

  const json best_json = to_json(best);
  if (!args.out.empty()) {
    std::ofstream file(args.out);
    if (!file) throw Error(ErrorCode::IoError, "cannot write " + args.out);
    file << best_json.dump(2) << '\n';
  }

  if (args.format == "json") {
    json rows = json::array();
    for (const auto& row : table) {
      json kernels = json::array();
      for (const auto& k : row.config.base_kernels) kernels.push_back(k.to_string());
      rows.push_back({{"layer", row.layer + 1},
                      {"candidate", row.candidate},
                      {"kernels", kernels},
                      {"gamma", row.config.gamma},
                      {"width", row.config.width},
                      {"C", row.C},
                      {"mean_error_percent", row.stats.mean},
                      {"stdev", row.stats.stdev},
                      {"chosen", row.chosen}});
    }
    out << json{{"schema", "mlmkl.cv/1"}, {"repeats", repeats}, {"rows", rows}, {"best", best_json}}.dump(2)
        << '\n';
    return 0;
  }

  out << "greedy layerwise search, " << repeats << " repeat(s) per configuration\n";
  out << "layer cand  gamma       width  C         valid loss %      kernels\n";
  for (const auto& row : table) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-5zu %-5zu %-11s %-6lld %-9s %6s\xC2\xB1%-9s%s", row.layer + 1,
                  row.candidate, fixed(row.config.gamma, 4).c_str(),
                  static_cast<long long>(row.config.width), fixed(row.C, 3).c_str(),
                  fixed(row.stats.mean, 2).c_str(), fixed(row.stats.stdev, 3).c_str(),
                  row.chosen ? " *" : "  ");
    out << buf;
    for (const auto& k : row.config.base_kernels) out << ' ' << k.to_string();
    out << '\n';
  }
  out << "\nbest config\n" << best_json.dump(2) << '\n';
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-layer multiple kernel machines: layerwise unsupervised MKL + kernel PCA"};
  app.name("mlmkl");
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "fit a model and write it to --out");
  train_cmd->add_option("--config", train.config, "JSON experiment config")->required();
  train_cmd->add_option("--train", train.train, "training data (.amat, or images,labels IDX pair)")->required();
  train_cmd->add_option("--out", train.out, "model output path")->required();
  train_cmd->add_option("--seed", train.seed, "seed for split and subsamples");
  train_cmd->add_option("--subsample", train.subsample, "override the config subsample size");
  train_cmd->add_option("--format", train.format)->check(CLI::IsMember({"text", "json"}));

  std::string model_path, test_path, format = "text";
  auto* eval_cmd = app.add_subcommand("eval", "loss and confusion counts on labelled data");
  eval_cmd->add_option("--model", model_path)->required();
  eval_cmd->add_option("--test", test_path)->required();
  eval_cmd->add_option("--format", format)->check(CLI::IsMember({"text", "json"}));

  CvArgs cv;
  auto* cv_cmd = app.add_subcommand("cv", "greedy per-layer grid search on the validation split");
  cv_cmd->add_option("--config", cv.config)->required();
  cv_cmd->add_option("--train", cv.train)->required();
  cv_cmd->add_option("--seed", cv.seed);
  cv_cmd->add_option("--jobs", cv.jobs, "parallel grid points (capped by MLMKL_THREADS)")
      ->check(CLI::PositiveNumber);
  cv_cmd->add_option("--subsample", cv.subsample);
  cv_cmd->add_option("--out", cv.out, "write the chosen config here");
  cv_cmd->add_option("--format", cv.format)->check(CLI::IsMember({"text", "json"}));

  auto* weights_cmd = app.add_subcommand("weights", "per-layer kernel weight table");
  weights_cmd->add_option("--model", model_path)->required();
  weights_cmd->add_option("--format", format)->check(CLI::IsMember({"text", "json"}));

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "mlmkl: " << e.what() << '\n';
    return 2;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train, out);
    if (eval_cmd->parsed()) return cmd_eval(model_path, test_path, format, out);
    if (cv_cmd->parsed()) return cmd_cv(cv, out);
    if (weights_cmd->parsed()) return cmd_weights(model_path, format, out);
  } catch (const Error& e) {
    err << "mlmkl: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "mlmkl: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace mlmkl::cli
