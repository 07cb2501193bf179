#include "commands.hpp"

#include "sre/io.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kData = SRE_TEST_DATA;

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("sre_cli_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "sre");
  return sre::cli::run(args);
}

std::string data(const char* name) { return (kData / name).string(); }

}  // namespace

TEST_CASE("sha256 of known inputs") {
  TempDir tmp("sha");
  std::ofstream(tmp.path / "empty").close();
  CHECK(sre::cli::sha256_file((tmp.path / "empty").string()) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  std::ofstream(tmp.path / "abc") << "abc";
  CHECK(sre::cli::sha256_file((tmp.path / "abc").string()) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("fit glm writes summary, trace and manifest") {
  TempDir tmp("glm");
  const int code = run({"fit", "--health", data("health.csv"), "--exposure", data("exposure.csv"), "--model",
                        "glm", "--pollutant", "NO2", "--out", tmp.path.string()});
  REQUIRE(code == sre::cli::kOk);
  const json summary = sre::read_json_file(tmp.path / "summary.json");
  CHECK(summary.dump().find("alpha") != std::string::npos);
  CHECK(fs::exists(tmp.path / "trace.csv"));
  const json manifest = sre::read_json_file(tmp.path / "manifest.json");
  CHECK(manifest.dump().find(sre::cli::sha256_file(data("health.csv"))) != std::string::npos);
  CHECK(manifest.dump().find("0.1.0") != std::string::npos);
}

TEST_CASE("fit car with a config file") {
  TempDir tmp("car");
  const int code = run({"fit", "--health", data("health.csv"), "--exposure", data("exposure.csv"),
                        "--adjacency", data("adjacency.csv"), "--model", "car", "--config", data("config.json"),
                        "--delta", "2", "--out", tmp.path.string()});
  REQUIRE(code == sre::cli::kOk);
  const json summary = sre::read_json_file(tmp.path / "summary.json");
  CHECK(summary["relative_risk"]["increment"] == 2.0);
  const sre::CsvTable trace = sre::read_csv(tmp.path / "trace.csv");
  CHECK(trace.rows.size() == 1000);  // 2 chains x 500 retained
  CHECK(trace.header[0] == "chain");
}

TEST_CASE("input errors exit with code 2") {
  TempDir tmp("bad");
  CHECK(run({"fit", "--health", data("health.csv"), "--exposure", data("exposure.csv"), "--model", "car",
             "--out", tmp.path.string()}) == sre::cli::kInputError);
  CHECK(run({"fit", "--health", data("health.csv"), "--exposure", data("exposure.csv"), "--model", "lm",
             "--out", tmp.path.string()}) == sre::cli::kInputError);
  CHECK(run({"fit", "--health", data("missing.csv"), "--exposure", data("exposure.csv"), "--model", "glm",
             "--out", tmp.path.string()}) == sre::cli::kInputError);
  CHECK(run({"simulate", "--out", tmp.path.string()}) == sre::cli::kInputError);
  CHECK(run({"frobnicate"}) == sre::cli::kInputError);
}

TEST_CASE("moran writes its statistic") {
  TempDir tmp("moran");
  REQUIRE(run({"moran", "--residuals", data("residuals.csv"), "--adjacency", data("adjacency.csv"),
               "--permutations", "499", "--out", tmp.path.string()}) == sre::cli::kOk);
  const json m = sre::read_json_file(tmp.path / "moran.json");
  // The fixture residuals follow a diagonal trend.
  CHECK(m["I"].get<double>() > 0.3);
  CHECK(m["p"].get<double>() < 0.01);
  CHECK(fs::exists(tmp.path / "manifest.json"));
}

TEST_CASE("simulate from a scenario file") {
  TempDir tmp("sim");
  REQUIRE(run({"simulate", "--scenario", data("scenario.json"), "--models", "glm", "--out",
               tmp.path.string()}) == sre::cli::kOk);
  const sre::CsvTable m = sre::read_csv(tmp.path / "metrics.csv");
  REQUIRE(m.rows.size() == 1);
  CHECK(m.rows[0][0] == "tiny");
  CHECK(m.rows[0][1] == "glm");
  CHECK(m.rows[0][5] == "3");
}
