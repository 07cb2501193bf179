#include "commands.hpp"

#include "sre/comparators.hpp"
#include "sre/graph.hpp"
#include "sre/io.hpp"
#include "sre/mcmc.hpp"
#include "sre/simstudy.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace sre::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json digests(const std::vector<std::string>& paths) {
  json j = json::object();
  for (const auto& p : paths) {
    if (!p.empty()) j[p] = sha256_file(p);
  }
  return j;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

fs::path prepare_out(const std::string& dir) {
  fs::path out(dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw InputError("--out: cannot create directory '" + dir + "': " + ec.message());
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

double default_increment(const std::string& pollutant) {
  std::string p;
  for (char c : pollutant) p += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return p == "no2" ? 5.0 : 1.0;
}

struct FitArgs {
  std::string health, adjacency, model, exposure, config, pollutant, out = ".";
  std::optional<double> delta;
};

int cmd_fit(const FitArgs& a, const std::vector<std::string>& argv) {
  static const std::vector<std::string> known{"glm", "car", "local", "local-agg", "hh", "bayes-glm"};
  if (std::find(known.begin(), known.end(), a.model) == known.end()) {
    throw InputError("--model: unknown model '" + a.model + "' (expected glm, car, local, local-agg or hh)");
  }
  const bool needs_graph = a.model == "car" || a.model == "local" || a.model == "local-agg" || a.model == "hh";
  if (needs_graph && a.adjacency.empty()) {
    throw InputError("--adjacency is required for --model " + a.model);
  }
  const std::string started = utc_now();
  const json inputs = digests({a.health, a.adjacency, a.exposure, a.config});

  RunConfig rc;
  if (!a.config.empty()) rc = run_config_from_json(read_json_file(a.config));
  const double increment = a.delta ? *a.delta : default_increment(a.pollutant);
  if (!std::isfinite(increment)) throw InputError("--delta must be finite");

  const HealthDataset data = read_health_csv(a.health);
  const ExposureSet exposures = read_exposure_csv(a.exposure, data.area_ids);
  AreaGraph graph;
  if (!a.adjacency.empty()) graph = read_adjacency_csv(a.adjacency, data.area_ids);
  const fs::path out = prepare_out(a.out);

  json summary;
  if (a.model == "glm") {
    GlmFit fit;
    try {
      fit = fit_glm(data, exposures.weighted_means());
    } catch (const InputError& e) {
      throw FitError(e.what());
    }
    summary = glm_to_json(fit, increment);
    std::ofstream trace(out / "trace.csv");
    trace << "parameter,estimate,se,lo95,hi95\n";
    for (std::size_t i = 0; i < fit.names.size(); ++i) {
      const auto k = static_cast<Index>(i);
      trace << fit.names[i] << ',' << format_double(fit.coefficients(k)) << ','
            << format_double(fit.standard_errors(k)) << ',' << format_double(fit.lower95(k)) << ','
            << format_double(fit.upper95(k)) << '\n';
    }
  } else {
    ModelSpec spec = ModelSpec::from_name(a.model);
    spec.G = rc.G;
    spec.hh_q = rc.hh_q;
    spec.increment = increment;
    const auto traces = run_chains(data, exposures, graph, spec, rc.fit);
    const PosteriorSummary ps = summarize(traces, spec);
    summary = summary_to_json(ps);
    json acc = json::array();
    for (const auto& t : traces) acc.push_back(t.acceptance);
    summary["acceptance"] = acc;
    write_trace_csv(out / "trace.csv", traces);
  }
  write_json(out / "summary.json", summary);

  json config = to_json(rc);
  config["model"] = a.model;
  config["delta"] = increment;
  config["pollutant"] = a.pollutant;
  write_json(out / "manifest.json", json{{"command", "fit"},
                                         {"arguments", argv},
                                         {"software", {{"name", "sre"}, {"version", kVersion}}},
                                         {"seed", rc.fit.seed},
                                         {"config", config},
                                         {"inputs", inputs},
                                         {"outputs", {"trace.csv", "summary.json"}},
                                         {"started", started},
                                         {"finished", utc_now()}});
  return kOk;
}

struct SimulateArgs {
  std::string scenario, preset, models, config, out = ".";
  std::optional<int> replicates;
  unsigned threads = 0;
};

int cmd_simulate(const SimulateArgs& a, const std::vector<std::string>& argv) {
  if (a.scenario.empty() == a.preset.empty()) throw InputError("give exactly one of --scenario or --preset");
  const std::string started = utc_now();
  const json inputs = digests({a.scenario, a.config});

  StudyPreset preset;
  if (!a.preset.empty()) {
    preset = study_preset(a.preset);
  } else {
    preset.scenarios.push_back(scenario_from_json(read_json_file(a.scenario)));
    preset.models = {"glm", "car", "local"};
    preset.config.store_phi = false;
  }
  if (!a.config.empty()) preset.config = run_config_from_json(read_json_file(a.config)).fit;
  if (!a.models.empty()) preset.models = split_list(a.models);
  if (a.replicates) {
    if (*a.replicates < 1) throw InputError("--replicates must be >= 1");
    for (auto& s : preset.scenarios) s.replicates = *a.replicates;
  }
  for (const auto& m : preset.models) {
    if (m != "glm") ModelSpec::from_name(m);
  }
  const fs::path out = prepare_out(a.out);

  MetricTable rows;
  for (const auto& s : preset.scenarios) {
    const StudyResult r = run_study(s, preset.models, preset.config, a.threads);
    rows.insert(rows.end(), r.rows.begin(), r.rows.end());
  }
  write_metrics_csv(out / "metrics.csv", rows);

  json scenarios = json::array();
  for (const auto& s : preset.scenarios) scenarios.push_back(to_json(s));
  write_json(out / "manifest.json", json{{"command", "simulate"},
                                         {"arguments", argv},
                                         {"software", {{"name", "sre"}, {"version", kVersion}}},
                                         {"seed", preset.config.seed},
                                         {"preset", a.preset},
                                         {"models", preset.models},
                                         {"config", to_json(RunConfig{preset.config})},
                                         {"scenarios", scenarios},
                                         {"inputs", inputs},
                                         {"outputs", {"metrics.csv"}},
                                         {"started", started},
                                         {"finished", utc_now()}});
  return kOk;
}

struct MoranArgs {
  std::string residuals, adjacency, out;
  int permutations = 9999;
  std::uint64_t seed = 1;
};

int cmd_moran(const MoranArgs& a, const std::vector<std::string>& argv) {
  const std::string started = utc_now();
  const json inputs = digests({a.residuals, a.adjacency});
  if (a.permutations < 0) throw InputError("--permutations must be >= 0");
  const Residuals res = read_residuals_csv(a.residuals);
  const AreaGraph graph = read_adjacency_csv(a.adjacency, res.area_ids);
  const MoranResult m = morans_i(graph, res.values, a.permutations, a.seed);
  std::cout << "I=" << format_double(m.statistic) << " p=" << format_double(m.p_value) << '\n';
  if (!a.out.empty()) {
    const fs::path out = prepare_out(a.out);
    write_json(out / "moran.json", json{{"I", m.statistic}, {"p", m.p_value}, {"permutations", a.permutations}});
    write_json(out / "manifest.json", json{{"command", "moran"},
                                           {"arguments", argv},
                                           {"software", {{"name", "sre"}, {"version", kVersion}}},
                                           {"seed", a.seed},
                                           {"permutations", a.permutations},
                                           {"inputs", inputs},
                                           {"outputs", {"moran.json"}},
                                           {"started", started},
                                           {"finished", utc_now()}});
  }
  return kOk;
}

}  // namespace

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path + ": cannot open file");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned int i = 0; i < len; ++i) {
    s += hex[md[i] >> 4];
    s += hex[md[i] & 15];
  }
  return s;
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"Spatial regression with localised smoothing and exposure aggregation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit one model to an areal health dataset");
  fit_cmd->add_option("--health", fit.health, "CSV with area_id,Y,E[,covariates...]")->required();
  fit_cmd->add_option("--adjacency", fit.adjacency, "CSV edge list area_id,neighbour_id");
  fit_cmd->add_option("--model", fit.model, "glm | car | local | local-agg | hh")->required();
  fit_cmd->add_option("--exposure", fit.exposure, "CSV area_id,concentration[,weight]")->required();
  fit_cmd->add_option("--config", fit.config, "JSON run configuration");
  fit_cmd->add_option("--delta", fit.delta, "Pollutant increment for the relative risk");
  fit_cmd->add_option("--pollutant", fit.pollutant, "Pollutant name; NO2 sets the default increment to 5");
  fit_cmd->add_option("--out", fit.out, "Output directory");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Run a simulation study");
  sim_cmd->add_option("--scenario", sim.scenario, "Scenario JSON");
  sim_cmd->add_option("--preset", sim.preset, "study1 | study2 | study1-quick | study2-quick");
  sim_cmd->add_option("--models", sim.models, "Comma-separated models (glm,car,local,local-agg,hh,bayes-glm)");
  sim_cmd->add_option("--config", sim.config, "JSON run configuration for the Bayesian fits");
  sim_cmd->add_option("--replicates", sim.replicates, "Override the replicate count");
  sim_cmd->add_option("--threads", sim.threads, "Worker threads (0: all, capped by SRE_THREADS)");
  sim_cmd->add_option("--out", sim.out, "Output directory");

  MoranArgs moran;
  auto* moran_cmd = app.add_subcommand("moran", "Moran's I permutation test on residuals");
  moran_cmd->add_option("--residuals", moran.residuals, "CSV area_id,residual")->required();
  moran_cmd->add_option("--adjacency", moran.adjacency, "CSV edge list area_id,neighbour_id")->required();
  moran_cmd->add_option("--permutations", moran.permutations, "Number of permutations");
  moran_cmd->add_option("--seed", moran.seed, "Permutation seed");
  moran_cmd->add_option("--out", moran.out, "Directory for moran.json and manifest.json");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInputError;
  }

  try {
    if (fit_cmd->parsed()) return cmd_fit(fit, args);
    if (sim_cmd->parsed()) return cmd_simulate(sim, args);
    if (moran_cmd->parsed()) return cmd_moran(moran, args);
  } catch (const StudyError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kReplicateFailure;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFitError;
  }
  return kInputError;
}

}  // namespace sre::cli
