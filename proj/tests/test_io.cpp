#include "sre/io.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

using namespace sre;
namespace fs = std::filesystem;

namespace {

const fs::path kData = SRE_TEST_DATA;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("sre_io_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }

  fs::path write(const std::string& name, const std::string& text) const {
    const fs::path p = path / name;
    std::ofstream(p) << text;
    return p;
  }
};

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const InputError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("doubles round-trip through text") {
  RngStream rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.normal() * std::pow(10.0, rng.uniform(-30, 30));
    CHECK(parse_double(format_double(x), "t") == x);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
  CHECK_THROWS_AS(parse_double("1.5x", "t"), InputError);
  CHECK_THROWS_AS(parse_double("", "t"), InputError);
  CHECK(parse_double("-2e-3", "t") == -0.002);
}

TEST_CASE("fixture files load") {
  const HealthDataset d = read_health_csv(kData / "health.csv");
  CHECK(d.size() == 36);
  CHECK(d.covariate_names == std::vector<std::string>{"(Intercept)", "income"});
  CHECK(d.area_ids.front() == "A00");
  const AreaGraph g = read_adjacency_csv(kData / "adjacency.csv", d.area_ids);
  CHECK(g.num_edges() == 60);
  const ExposureSet x = read_exposure_csv(kData / "exposure.csv", d.area_ids);
  CHECK(x.size() == 36);
  CHECK(x.total_cells() == 108);
  CHECK(x.weights(0).sum() == doctest::Approx(1.0).epsilon(1e-14));
  const Residuals r = read_residuals_csv(kData / "residuals.csv");
  CHECK(r.values.size() == 36);
}

TEST_CASE("malformed CSV errors name the file, line and column") {
  TempDir tmp;
  const auto bad_number = tmp.write("h.csv", "area_id,Y,E\na,1,2\nb,3,x\n");
  const std::string msg = error_of([&] { read_health_csv(bad_number); });
  CHECK(msg.find("h.csv:3:3") != std::string::npos);

  const auto short_row = tmp.write("s.csv", "area_id,Y,E\na,1\n");
  CHECK(error_of([&] { read_health_csv(short_row); }).find("s.csv:2") != std::string::npos);

  const auto dup = tmp.write("d.csv", "area_id,Y,Y\na,1,2\n");
  CHECK_FALSE(error_of([&] { read_csv(dup); }).empty());

  const auto missing = tmp.write("m.csv", "area_id,E\na,1\n");
  CHECK(error_of([&] { read_health_csv(missing); }).find("Y") != std::string::npos);

  CHECK_THROWS_AS(read_csv(tmp.path / "absent.csv"), InputError);
}

TEST_CASE("unknown ids are rejected") {
  TempDir tmp;
  const std::vector<std::string> ids{"a", "b"};
  const auto adj = tmp.write("adj.csv", "area_id,neighbour_id\na,zz\n");
  CHECK(error_of([&] { read_adjacency_csv(adj, ids); }).find("zz") != std::string::npos);
  const auto ex = tmp.write("ex.csv", "area_id,concentration\na,1\n");
  // Area b has no cells.
  CHECK_THROWS_AS(read_exposure_csv(ex, ids), InputError);
  const auto neg = tmp.write("neg.csv", "area_id,concentration,weight\na,1,-1\nb,2,1\n");
  CHECK_THROWS_AS(read_exposure_csv(neg, ids), InputError);
}

TEST_CASE("run configuration parsing is strict") {
  const RunConfig rc = run_config_from_json(read_json_file(kData / "config.json"));
  CHECK(rc.fit.n_iterations == 2000);
  CHECK(rc.fit.n_chains == 2);
  CHECK(rc.G == 5);

  using nlohmann::json;
  CHECK_THROWS_AS(run_config_from_json(json{{"n_iteration", 10}}), InputError);
  CHECK_THROWS_AS(run_config_from_json(json{{"n_iterations", "many"}}), InputError);
  CHECK_THROWS_AS(run_config_from_json(json{{"thin", 1.5}}), InputError);
  CHECK_THROWS_AS(run_config_from_json(json{{"priors", {{"tau2_c", 1}}}}), InputError);
  CHECK_THROWS_AS(run_config_from_json(json{{"frozen", {"sigma"}}}), InputError);
  CHECK_THROWS_AS(run_config_from_json(json{{"G", 4}}), InputError);

  const RunConfig parsed = run_config_from_json(json{{"frozen", {"rho", "alpha"}}, {"priors", {{"tau2_b", 0.5}}}});
  CHECK(parsed.fit.is_frozen(Block::Rho));
  CHECK(parsed.fit.priors.tau2_b == 0.5);
  const RunConfig again = run_config_from_json(to_json(parsed));
  CHECK(to_json(again) == to_json(parsed));
}

TEST_CASE("scenario JSON round-trips") {
  const SimScenario s = scenario_from_json(read_json_file(kData / "scenario.json"));
  CHECK(s.label == "tiny");
  CHECK(s.n_areas == 50);
  CHECK(to_json(scenario_from_json(to_json(s))) == to_json(s));
  CHECK_THROWS_AS(scenario_from_json(nlohmann::json{{"confounding", "E"}}), InputError);
  CHECK_THROWS_AS(scenario_from_json(nlohmann::json{{"colour", 1}}), InputError);
}

TEST_CASE("trace and metrics writers") {
  TempDir tmp;
  ChainTrace t;
  t.spec = ModelSpec::from_name("car");
  t.beta_names = {"(Intercept)"};
  t.iterations = {10, 20};
  t.beta = Mat::Zero(2, 1);
  t.alpha = Vec::LinSpaced(2, 0.1, 0.2);
  t.tau2 = Vec::Constant(2, 0.5);
  t.rho = Vec::Constant(2, 0.25);
  t.log_likelihood = Vec::Zero(2);
  write_trace_csv(tmp.path / "trace.csv", {t});
  const CsvTable table = read_csv(tmp.path / "trace.csv");
  CHECK(table.header == std::vector<std::string>{"chain", "iteration", "(Intercept)", "alpha", "tau2", "rho"});
  CHECK(table.rows.size() == 2);
  CHECK(table.number(1, 3) == 0.2);

  MetricRow row;
  row.scenario = "A-0.1";
  row.model = "glm";
  row.bias_pct = 1.5;
  write_metrics_csv(tmp.path / "metrics.csv", {row});
  const CsvTable m = read_csv(tmp.path / "metrics.csv");
  CHECK(m.header.front() == "scenario");
  CHECK(m.rows[0][2] == "1.5");
}
