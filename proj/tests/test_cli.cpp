#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <fstream>
#include <sstream>

#include "mlmkl/cli.hpp"
#include "mlmkl/config.hpp"
#include "mlmkl/error.hpp"
#include "mlmkl/pipeline.hpp"
#include "test_support.hpp"

using namespace mlmkl;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

json small_config(std::vector<std::string> kernels, int layers = 2) {
  json cfg;
  cfg["layers"] = json::array();
  for (int l = 0; l < layers; ++l) {
    cfg["layers"].push_back({{"kernels", kernels}, {"width", 6}, {"kpca_components", 12}, {"basis_size", 3}});
  }
  cfg["subsample"] = 30;
  cfg["split"] = {{"train", 36}, {"valid", 12}};
  cfg["classifier"] = {{"kernel", "arccos(n=1,L=1)"}, {"C", 10}};
  return cfg;
}

struct Fixture {
  testing::TempDir dir{"cli"};
  std::string data;

  Fixture() {
    set_warning_sink(&testing::quiet);
    data = (dir / "toy.amat").string();
    write_amat(data, testing::toy_images(71, 3, 16, 0.05));
  }
  ~Fixture() { set_warning_sink(nullptr); }

  std::string config(const json& cfg, const std::string& name = "cfg.json") {
    const auto path = dir / name;
    write_text(path, cfg.dump(2));
    return path.string();
  }
};

}  // namespace

TEST_CASE_FIXTURE(Fixture, "single arc-cosine kernel prints a column of ones") {
  const std::string cfg = config(small_config({"arccos(n=0,L=1)"}));
  const std::string model = (dir / "m.bin").string();
  const Result train = run({"train", "--config", cfg, "--train", data, "--out", model, "--seed", "4"});
  REQUIRE(train.code == 0);
  CHECK(train.out.find("kernel weights per layer") != std::string::npos);
  CHECK(train.out.find("validation error by layer (csv)") != std::string::npos);
  CHECK(train.out.find("layer 1 ") != std::string::npos);

  const Result weights = run({"weights", "--model", model});
  REQUIRE(weights.code == 0);
  std::istringstream lines(weights.out);
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(lines, line)) rows.push_back(line);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].find("k1") != std::string::npos);
  CHECK(rows[1] == "1       1.0000");
  CHECK(rows[2] == "2       1.0000");

  const json j = json::parse(run({"weights", "--model", model, "--format", "json"}).out);
  CHECK(j["schema"] == "mlmkl.weights/1");
  CHECK(j["layers"].size() == 2);
  CHECK(j["layers"][0]["weights"][0].get<double>() == 1.0);
}

TEST_CASE_FIXTURE(Fixture, "weights table has one row per layer for mixed kernels") {
  const std::string cfg =
      config(small_config({"arccos(n=0,L=1)", "arccos(n=1,L=2)", "rbf(gamma=0.05)"}, 3));
  const std::string model = (dir / "m3.bin").string();
  REQUIRE(run({"train", "--config", cfg, "--train", data, "--out", model}).code == 0);
  const Result weights = run({"weights", "--model", model});
  CHECK(std::count(weights.out.begin(), weights.out.end(), '\n') == 4);
  const MlmklModel loaded = load_model(model);
  for (const auto& l : loaded.layers) CHECK(std::abs(l.mu.values().sum() - 1.0) <= 1e-10);
}

TEST_CASE_FIXTURE(Fixture, "eval on separable training data reports zero loss") {
  json cfg = small_config({"arccos(n=1,L=1)", "rbf(gamma=0.05)"});
  cfg.erase("split");
  const std::string model = (dir / "sep.bin").string();
  REQUIRE(run({"train", "--config", config(cfg), "--train", data, "--out", model}).code == 0);
  const Result eval = run({"eval", "--model", model, "--test", data});
  REQUIRE(eval.code == 0);
  CHECK(eval.out.find("loss 0.00%") != std::string::npos);

  const json j = json::parse(run({"eval", "--model", model, "--test", data, "--format", "json"}).out);
  CHECK(j["schema"] == "mlmkl.eval/1");
  CHECK(j["error_percent"].get<double>() == 0.0);
  CHECK(j["classes"] == json::array({0, 1, 2}));
  CHECK(j["confusion"][1][1].get<int>() == 16);
}

TEST_CASE_FIXTURE(Fixture, "cv over a one-point grid returns the config unchanged") {
  json cfg = small_config({"arccos(n=1,L=1)", "rbf(gamma=0.05)"});
  cfg["cv"] = {{"gamma", {0.1}}, {"width", {6}}, {"C", {10}}, {"repeats", 2}};
  const std::string path = config(cfg);
  const std::string best = (dir / "best.json").string();
  const Result cv = run({"cv", "--config", path, "--train", data, "--out", best, "--jobs", "2"});
  REQUIRE(cv.code == 0);
  CHECK(json::parse(slurp(best)) == to_json(load_config(path)));
  CHECK(cv.out.find("2 repeat(s)") != std::string::npos);
  CHECK(cv.out.find("\xC2\xB1") != std::string::npos);

  const json j = json::parse(run({"cv", "--config", path, "--train", data, "--format", "json"}).out);
  CHECK(j["schema"] == "mlmkl.cv/1");
  CHECK(j["rows"].size() == 2);
}

TEST_CASE_FIXTURE(Fixture, "cv prefers the better of two kernel sets") {
  json cfg = small_config({"linear"}, 1);
  cfg["cv"] = {{"kernels", {{"linear"}, {"arccos(n=1,L=1)", "rbf(gamma=0.05)"}}}};
  const Result cv = run({"cv", "--config", config(cfg), "--train", data, "--format", "json"});
  REQUIRE(cv.code == 0);
  const json j = json::parse(cv.out);
  CHECK(j["rows"].size() == 2);
  int chosen = 0;
  for (const auto& row : j["rows"]) chosen += row["chosen"].get<bool>() ? 1 : 0;
  CHECK(chosen == 1);
}

TEST_CASE_FIXTURE(Fixture, "identical flags give byte-identical model files") {
  const std::string cfg = config(small_config({"arccos(n=0,L=1)", "rbf(gamma=0.05)"}));
  const std::string a = (dir / "a.bin").string(), b = (dir / "b.bin").string();
  REQUIRE(run({"train", "--config", cfg, "--train", data, "--out", a, "--seed", "9"}).code == 0);
  REQUIRE(run({"train", "--config", cfg, "--train", data, "--out", b, "--seed", "9"}).code == 0);
  CHECK(slurp(a) == slurp(b));
  const std::string c = (dir / "c.bin").string();
  REQUIRE(run({"train", "--config", cfg, "--train", data, "--out", c, "--seed", "10"}).code == 0);
  CHECK(slurp(a) != slurp(c));
}

TEST_CASE_FIXTURE(Fixture, "failures exit nonzero with a message") {
  const std::string cfg = config(small_config({"linear"}));
  const std::string model = (dir / "x.bin").string();

  Result r = run({"train", "--config", (dir / "missing.json").string(), "--train", data, "--out", model});
  CHECK(r.code != 0);
  CHECK(!r.err.empty());

  r = run({"train", "--config", cfg, "--train", (dir / "missing.amat").string(), "--out", model});
  CHECK(r.code != 0);

  json bad = small_config({"linear"});
  bad["layers"][0]["widht"] = 5;
  r = run({"train", "--config", config(bad, "bad.json"), "--train", data, "--out", model});
  CHECK(r.code != 0);
  CHECK(r.err.find("widht") != std::string::npos);

  json bad_kernel = small_config({"arccos(n=4)"});
  CHECK(run({"train", "--config", config(bad_kernel, "k.json"), "--train", data, "--out", model}).code != 0);

  json no_valid = small_config({"linear"});
  no_valid.erase("split");
  CHECK(run({"cv", "--config", config(no_valid, "nv.json"), "--train", data}).code != 0);

  json empty_grid = small_config({"linear"});
  empty_grid["cv"] = {{"repeats", 0}};
  CHECK(run({"cv", "--config", config(empty_grid, "eg.json"), "--train", data}).code != 0);

  CHECK(run({"train", "--config", cfg}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"eval", "--model", model, "--test", data, "--format", "yaml"}).code == 2);
  CHECK(run({"train", "--config", cfg, "--train", data, "--out", model, "--seed", "abc"}).code == 2);
  CHECK(run({"eval", "--model", (dir / "nope.bin").string(), "--test", data}).code == 1);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("config parsing") {
  const json j = json::parse(R"j({"layers":[{"kernels":["rbf(gamma=0.5)"],"width":4}],
                                 "classifier":{"kernel":"arccos(n=2)"}})j");
  const RunConfig cfg = parse_config(j);
  CHECK(cfg.layers[0].kpca_components == 12);
  CHECK(cfg.layers[0].gamma == 0.1);
  CHECK(cfg.layers[0].basis_size == 10);
  CHECK(cfg.subsample == 3000);
  CHECK(!cfg.split);
  CHECK(cfg.classifier.kernel == KernelSpec::arc_cosine(2, 1));
  CHECK(parse_config(to_json(cfg)).layers[0].base_kernels == cfg.layers[0].base_kernels);
  CHECK(to_json(parse_config(to_json(cfg))) == to_json(cfg));

  CHECK_THROWS_AS(parse_config(json::parse(R"j({"layers":[]})j")), Error);
  CHECK_THROWS_AS(parse_config(json::parse(R"j({"layers":[{"kernels":["linear"],"width":2}],"extra":1})j")),
                  Error);
  CHECK_THROWS_AS(parse_config(json::parse(R"j({"layers":[{"kernels":["linear"],"width":"2"}]})j")), Error);
}
