#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "crsvm/cli.hpp"
#include "crsvm/model_io.hpp"

using namespace crsvm;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "crsvm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = cli::run(int(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path workdir() {
  const auto d = fs::temp_directory_path() / "crsvm_cli_unit";
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("datagen is deterministic and writes a manifest") {
  const auto d = workdir();
  const auto a = (d / "a.csv").string(), b = (d / "b.csv").string();
  REQUIRE(run({"datagen", "--n", "1000", "--p", "50", "--rho", "0.5", "--seed", "7", "--out", a}).code == 0);
  REQUIRE(run({"datagen", "--n", "1000", "--p", "50", "--rho", "0.5", "--seed", "7", "--out", b}).code == 0);
  CHECK(slurp(a) == slurp(b));
  const json m = json::parse(slurp(a + ".manifest.json"));
  CHECK(m["alpha"].get<double>() == 0.2);
  CHECK(m["seed"].get<int>() == 7);

  const auto bad = run({"datagen", "--n", "100", "--p", "5", "--out", (d / "c.csv").string()});
  CHECK(bad.code == 1);
  CHECK(bad.err.rfind("error: invalid_argument:", 0) == 0);
  CHECK(std::count(bad.err.begin(), bad.err.end(), '\n') == 1);
}

TEST_CASE("train, predict and determinism") {
  const auto d = workdir();
  const auto data = (d / "train.csv").string();
  REQUIRE(run({"datagen", "--n", "300", "--p", "15", "--seed", "3", "--out", data}).code == 0);
  const auto m1 = (d / "m1.json").string(), m2 = (d / "m2.json").string();
  const auto met = (d / "met.json").string();
  const std::vector<std::string> common{"train", "--data", data, "--loss", "hinge",
                                        "--structure", "sfl", "--lambda1", "0.05",
                                        "--lambda2", "0.01", "--K", "3", "--seed", "5"};
  auto a = common;
  a.insert(a.end(), {"--model-out", m1, "--metrics-out", met});
  auto b = common;
  b.insert(b.end(), {"--model-out", m2, "--threads", "1"});
  const auto ra = run(a);
  REQUIRE(ra.code == 0);
  REQUIRE(run(b).code == 0);
  CHECK(slurp(m1) == slurp(m2));
  const MetricsReport rep = metrics_from_json(json::parse(slurp(met)));
  REQUIRE(rep.car);
  CHECK(*rep.car > 0.7);
  REQUIRE(rep.ntsf);
  CHECK(*rep.ntsf <= 10);
  CHECK(rep.ni > 0);

  const auto preds = (d / "pred.csv").string();
  const auto pr = run({"predict", "--model-in", m1, "--data", data, "--out", preds});
  REQUIRE(pr.code == 0);
  CHECK(pr.out.rfind("car ", 0) == 0);
  const auto text = slurp(preds);
  CHECK(text.rfind("score,label\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 301);

  // label-free input: scores only
  const Model model = read_model(m1);
  {
    std::ofstream f(d / "nolabel.csv");
    for (std::size_t j = 0; j < model.feature_names.size(); ++j)
      f << (j ? "," : "") << model.feature_names[j];
    f << "\n";
    for (std::size_t j = 0; j < model.feature_names.size(); ++j) f << (j ? "," : "") << "0.5";
    f << "\n";
  }
  const auto nl = run({"predict", "--model-in", m1, "--data", (d / "nolabel.csv").string()});
  REQUIRE(nl.code == 0);
  CHECK(nl.out.find("car") == std::string::npos);

  CHECK(run({"train", "--data", data, "--csv", "--lambda1", "0.05"}).out.rfind("K,car,ct,ni,ntsf,sparsity", 0) == 0);
}

TEST_CASE("sgl without a group map is a configuration error") {
  const auto d = workdir();
  const auto data = (d / "g.csv").string();
  REQUIRE(run({"datagen", "--n", "60", "--p", "10", "--out", data}).code == 0);
  const auto r = run({"train", "--data", data, "--structure", "sgl"});
  CHECK(r.code == 1);
  CHECK(r.err.rfind("error: config_error:", 0) == 0);
}

TEST_CASE("grouped training reports block norms") {
  const auto d = workdir();
  const auto data = (d / "grp.csv").string();
  REQUIRE(run({"datagen", "--n", "120", "--p", "12", "--out", data}).code == 0);
  {
    std::ofstream f(d / "map.json");
    f << R"({"groups":[{"name":"lo","columns":["x1","x2","x3","x4","x5"]},)"
      << R"({"name":"hi","columns":["x6","x7","x8","x9","x10","x11","x12"]}]})";
  }
  const auto met = (d / "grp_met.json").string();
  const auto r = run({"train", "--data", data, "--groups", (d / "map.json").string(),
                      "--structure", "sgl", "--lambda1", "0.02", "--lambda2", "0.05",
                      "--metrics-out", met});
  REQUIRE(r.code == 0);
  const auto rep = metrics_from_json(json::parse(slurp(met)));
  CHECK(rep.group_names == std::vector<std::string>{"lo", "hi"});
  CHECK(rep.group_norms.size() == 2);
}

TEST_CASE("tune and bench") {
  const auto d = workdir();
  const auto data = (d / "t.csv").string();
  REQUIRE(run({"datagen", "--n", "100", "--p", "12", "--out", data}).code == 0);
  const auto one = run({"tune", "--data", data, "--lambda1-grid", "0.05", "--lambda2-grid", "0.01",
                        "--mu-grid", "1"});
  REQUIRE(one.code == 0);
  CHECK(json::parse(one.out)["cells"].size() == 1);
  const auto grid = run({"tune", "--data", data, "--lambda1-grid", "0.01,0.1", "--lambda2-grid",
                         "0.01", "--max-iter", "500"});
  REQUIRE(grid.code == 0);
  const json rep = json::parse(grid.out);
  CHECK(rep["cells"].size() == 6);

  const auto b = run({"bench", "--n", "200", "--p", "12", "--n-test", "500", "--K-list", "1",
                      "--reps", "1"});
  REQUIRE(b.code == 0);
  const json bj = json::parse(b.out);
  CHECK(bj["rows"].size() == 1);
  CHECK(bj["rows"][0]["car"]["mean"].get<double>() > 0.5);
  const auto bc = run({"bench", "--n", "200", "--p", "12", "--n-test", "200", "--K-list", "1,2",
                       "--csv"});
  REQUIRE(bc.code == 0);
  CHECK(std::count(bc.out.begin(), bc.out.end(), '\n') == 3);
}

TEST_CASE("usage errors") {
  CHECK(run({}).code == 2);
  const auto r = run({"train"});
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error: usage:", 0) == 0);
  const auto m = run({"train", "--data", "/nonexistent/file.csv"});
  CHECK(m.code == 1);
  CHECK(m.err.rfind("error: io_error:", 0) == 0);
  CHECK(run({"--help"}).code == 0);
}
