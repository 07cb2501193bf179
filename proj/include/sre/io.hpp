#pragma once

#include "sre/comparators.hpp"
#include "sre/graph.hpp"
#include "sre/mcmc.hpp"
#include "sre/model.hpp"
#include "sre/simstudy.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace sre {

/// Shortest decimal text that round-trips, at most 17 significant digits.
/// Locale-independent.
std::string format_double(double x);

/// Strict locale-independent parse of a whole field. Throws InputError
/// naming `where` on failure.
double parse_double(const std::string& text, const std::string& where);

struct CsvTable {
  std::string path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> lines;  // 1-based source line of each row

  // Index of a named column; throws InputError if absent.
  std::size_t column(const std::string& name) const;
  // "path:line:col" for diagnostics (col is 1-based).
  std::string where(std::size_t row, std::size_t col) const;
  double number(std::size_t row, std::size_t col) const;
};

/// Comma-separated file with a header row. Blank lines are skipped; quoted
/// fields are not supported. Every row must have as many fields as the header.
CsvTable read_csv(const std::filesystem::path& path);

/// Columns area_id, Y, E, then any covariates (names from the header).
HealthDataset read_health_csv(const std::filesystem::path& path);

/// Edge list with columns area_id, neighbour_id, ids as in the health file.
AreaGraph read_adjacency_csv(const std::filesystem::path& path, const std::vector<std::string>& area_ids);

/// Columns area_id, concentration and optionally weight (normalised within
/// each area; equal weights when absent). Rows of an area need not be
/// contiguous; cells keep file order within each area.
ExposureSet read_exposure_csv(const std::filesystem::path& path, const std::vector<std::string>& area_ids);

struct Residuals {
  std::vector<std::string> area_ids;
  Vec values;
};

/// Columns area_id, residual.
Residuals read_residuals_csv(const std::filesystem::path& path);

struct RunConfig {
  FitConfig fit;
  int G = 5;
  Index hh_q = 50;
};

/// Strict parse: unknown keys and wrong types are InputErrors.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& config);

SimScenario scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SimScenario& scenario);

nlohmann::json read_json_file(const std::filesystem::path& path);

/// columns chain,iteration,<β names>,alpha,[tau2,rho],[delta,lambda[j]...]
void write_trace_csv(const std::filesystem::path& path, const std::vector<ChainTrace>& traces);

nlohmann::json summary_to_json(const PosteriorSummary& summary);
nlohmann::json glm_to_json(const GlmFit& fit, double increment);

void write_metrics_csv(const std::filesystem::path& path, const MetricTable& rows);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace sre
