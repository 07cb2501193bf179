#include "sre/io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

namespace sre {

using nlohmann::json;

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  if (res.ec != std::errc()) throw Error("format_double: conversion failed");
  std::string shortest(buf, res.ptr);
  // Shortest round-trip text is never longer than 17 significant digits;
  // %.17g is only used as a guard against library quirks.
  double back = 0.0;
  std::from_chars(shortest.data(), shortest.data() + shortest.size(), back);
  if (back == x) return shortest;
  res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return {buf, res.ptr};
}

double parse_double(const std::string& text, const std::string& where) {
  std::size_t b = 0, e = text.size();
  while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
  if (b == e) throw InputError(where + ": empty numeric field");
  const char* first = text.data() + b;
  if (*first == '+') ++first;
  double v = 0.0;
  const auto res = std::from_chars(first, text.data() + e, v);
  if (res.ec != std::errc() || res.ptr != text.data() + e) {
    throw InputError(where + ": cannot parse '" + text.substr(b, e - b) + "' as a number");
  }
  return v;
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw InputError(path + ":1: missing column '" + name + "'");
}

std::string CsvTable::where(std::size_t row, std::size_t col) const {
  return path + ":" + std::to_string(lines[row]) + ":" + std::to_string(col + 1);
}

double CsvTable::number(std::size_t row, std::size_t col) const {
  return parse_double(rows[row][col], where(row, col));
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::unordered_map<std::string, Index> index_ids(const std::vector<std::string>& ids) {
  std::unordered_map<std::string, Index> map;
  for (std::size_t k = 0; k < ids.size(); ++k) map.emplace(ids[k], static_cast<Index>(k));
  return map;
}

Index lookup(const std::unordered_map<std::string, Index>& map, const CsvTable& t, std::size_t row,
             std::size_t col) {
  const auto it = map.find(t.rows[row][col]);
  if (it == map.end()) {
    throw InputError(t.where(row, col) + ": unknown area id '" + t.rows[row][col] + "'");
  }
  return it->second;
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path.string() + ": cannot open file");
  CsvTable t;
  t.path = path.string();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      std::set<std::string> seen;
      for (std::size_t i = 0; i < t.header.size(); ++i) {
        if (t.header[i].empty()) throw InputError(t.path + ":" + std::to_string(lineno) + ":" + std::to_string(i + 1) + ": empty column name");
        if (!seen.insert(t.header[i]).second) {
          throw InputError(t.path + ":" + std::to_string(lineno) + ":" + std::to_string(i + 1) +
                           ": duplicate column '" + t.header[i] + "'");
        }
      }
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw InputError(t.path + ":" + std::to_string(lineno) + ":1: expected " + std::to_string(t.header.size()) +
                       " fields, found " + std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
    t.lines.push_back(lineno);
  }
  if (t.header.empty()) throw InputError(t.path + ": empty file");
  return t;
}

HealthDataset read_health_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const std::size_t id_col = t.column("area_id"), y_col = t.column("Y"), e_col = t.column("E");
  std::vector<std::size_t> cov_cols;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (c != id_col && c != y_col && c != e_col) {
      cov_cols.push_back(c);
      names.push_back(t.header[c]);
    }
  }
  const auto n = static_cast<Index>(t.rows.size());
  if (n == 0) throw InputError(t.path + ": no data rows");
  std::vector<std::string> ids;
  Vec Y(n), E(n);
  Mat X(n, static_cast<Index>(cov_cols.size()));
  std::set<std::string> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string& id = t.rows[r][id_col];
    if (id.empty()) throw InputError(t.where(r, id_col) + ": empty area id");
    if (!seen.insert(id).second) throw InputError(t.where(r, id_col) + ": duplicate area id '" + id + "'");
    ids.push_back(id);
    const double y = t.number(r, y_col);
    if (!(y >= 0.0) || y != std::floor(y)) {
      throw InputError(t.where(r, y_col) + ": Y must be a non-negative integer");
    }
    const double e = t.number(r, e_col);
    if (!(e > 0.0) || !std::isfinite(e)) throw InputError(t.where(r, e_col) + ": E must be positive");
    Y(static_cast<Index>(r)) = y;
    E(static_cast<Index>(r)) = e;
    for (std::size_t j = 0; j < cov_cols.size(); ++j) {
      const double v = t.number(r, cov_cols[j]);
      if (!std::isfinite(v)) throw InputError(t.where(r, cov_cols[j]) + ": covariate must be finite");
      X(static_cast<Index>(r), static_cast<Index>(j)) = v;
    }
  }
  return make_dataset(std::move(ids), std::move(Y), std::move(E), X, std::move(names));
}

AreaGraph read_adjacency_csv(const std::filesystem::path& path, const std::vector<std::string>& area_ids) {
  const CsvTable t = read_csv(path);
  const std::size_t a = t.column("area_id"), b = t.column("neighbour_id");
  const auto ids = index_ids(area_ids);
  std::vector<std::pair<Index, Index>> pairs;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const Index i = lookup(ids, t, r, a);
    const Index j = lookup(ids, t, r, b);
    if (i == j) throw InputError(t.where(r, b) + ": area listed as its own neighbour");
    pairs.emplace_back(i, j);
  }
  return AreaGraph(static_cast<Index>(area_ids.size()), pairs);
}

ExposureSet read_exposure_csv(const std::filesystem::path& path, const std::vector<std::string>& area_ids) {
  const CsvTable t = read_csv(path);
  const std::size_t a = t.column("area_id"), c = t.column("concentration");
  std::optional<std::size_t> w;
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (t.header[i] == "weight") w = i;
  }
  const auto ids = index_ids(area_ids);
  const auto n = static_cast<Index>(area_ids.size());
  std::vector<std::vector<std::pair<double, double>>> cells(static_cast<std::size_t>(n));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const Index k = lookup(ids, t, r, a);
    const double conc = t.number(r, c);
    if (!std::isfinite(conc)) throw InputError(t.where(r, c) + ": concentration must be finite");
    double weight = 1.0;
    if (w) {
      weight = t.number(r, *w);
      if (!(weight >= 0.0) || !std::isfinite(weight)) throw InputError(t.where(r, *w) + ": weight must be >= 0");
    }
    cells[k].emplace_back(conc, weight);
  }
  std::vector<Index> offsets{0};
  std::size_t total = 0;
  for (Index k = 0; k < n; ++k) {
    if (cells[k].empty()) throw InputError(t.path + ": area '" + area_ids[k] + "' has no exposure rows");
    total += cells[k].size();
    offsets.push_back(static_cast<Index>(total));
  }
  Vec conc(static_cast<Index>(total)), weight(static_cast<Index>(total));
  Index at = 0;
  for (Index k = 0; k < n; ++k) {
    double sum = 0.0;
    for (auto [v, wt] : cells[k]) sum += wt;
    if (!(sum > 0.0)) throw InputError(t.path + ": weights of area '" + area_ids[k] + "' sum to zero");
    for (auto [v, wt] : cells[k]) {
      conc(at) = v;
      weight(at) = wt;
      ++at;
    }
  }
  return ExposureSet::normalised(std::move(offsets), std::move(conc), std::move(weight));
}

Residuals read_residuals_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const std::size_t a = t.column("area_id"), v = t.column("residual");
  Residuals out;
  out.values.resize(static_cast<Index>(t.rows.size()));
  std::set<std::string> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (!seen.insert(t.rows[r][a]).second) throw InputError(t.where(r, a) + ": duplicate area id");
    out.area_ids.push_back(t.rows[r][a]);
    out.values(static_cast<Index>(r)) = t.number(r, v);
    if (!std::isfinite(out.values(static_cast<Index>(r)))) throw InputError(t.where(r, v) + ": residual must be finite");
  }
  return out;
}

namespace {

// Reads optional typed fields from a JSON object and rejects anything else.
class Reader {
 public:
  Reader(const json& j, std::string context) : j_(j), context_(std::move(context)) {
    if (!j.is_object()) throw InputError(context_ + ": expected a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    used_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw InputError("");
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!it->is_number_integer() && !it->is_number_unsigned()) throw InputError("");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw InputError("");
      } else {
        if (!it->is_string()) throw InputError("");
      }
      out = it->get<T>();
    } catch (const std::exception&) {
      throw InputError(context_ + ": field '" + key + "' has the wrong type");
    }
  }

  const json* object(const char* key) {
    used_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) throw InputError(context_ + ": unknown field '" + it.key() + "'");
    }
  }

 private:
  const json& j_;
  std::string context_;
  std::set<std::string> used_;
};

}  // namespace

RunConfig run_config_from_json(const json& j) {
  RunConfig rc;
  FitConfig& c = rc.fit;
  Reader r(j, "config");
  r.get("n_iterations", c.n_iterations);
  r.get("burn_in", c.burn_in);
  r.get("thin", c.thin);
  r.get("n_chains", c.n_chains);
  r.get("seed", c.seed);
  r.get("adapt_interval", c.adapt_interval);
  r.get("threads", c.threads);
  r.get("store_phi", c.store_phi);
  r.get("G", rc.G);
  r.get("hh_q", rc.hh_q);
  if (const json* p = r.object("priors")) {
    Reader pr(*p, "config.priors");
    pr.get("beta_mean", c.priors.beta_mean);
    pr.get("beta_variance", c.priors.beta_variance);
    pr.get("alpha_mean", c.priors.alpha_mean);
    pr.get("alpha_variance", c.priors.alpha_variance);
    pr.get("tau2_a", c.priors.tau2_a);
    pr.get("tau2_b", c.priors.tau2_b);
    pr.get("delta_max", c.priors.delta_max);
    pr.get("gamma_variance", c.priors.gamma_variance);
    pr.finish();
  }
  if (const json* p = r.object("proposal")) {
    Reader pr(*p, "config.proposal");
    pr.get("beta", c.proposal.beta);
    pr.get("alpha", c.proposal.alpha);
    pr.get("shift", c.proposal.shift);
    pr.get("theta", c.proposal.theta);
    pr.get("rho", c.proposal.rho);
    pr.get("lambda", c.proposal.lambda);
    pr.get("delta", c.proposal.delta);
    pr.get("gamma", c.proposal.gamma);
    pr.finish();
  }
  if (const json* f = r.object("frozen")) {
    if (!f->is_array()) throw InputError("config: field 'frozen' must be an array of block names");
    for (const auto& b : *f) {
      if (!b.is_string()) throw InputError("config: field 'frozen' must be an array of block names");
      const auto block = block_from_string(b.get<std::string>());
      if (!block) throw InputError("config: unknown block '" + b.get<std::string>() + "' in 'frozen'");
      c.frozen.push_back(*block);
    }
  }
  r.finish();
  c.validate();
  if (rc.G < 3 || rc.G % 2 == 0) throw InputError("config: G must be odd and >= 3");
  if (rc.hh_q < 0) throw InputError("config: hh_q must be >= 0");
  return rc;
}

json to_json(const RunConfig& rc) {
  const FitConfig& c = rc.fit;
  json frozen = json::array();
  for (Block b : c.frozen) frozen.push_back(to_string(b));
  return json{
      {"n_iterations", c.n_iterations},
      {"burn_in", c.burn_in},
      {"thin", c.thin},
      {"n_chains", c.n_chains},
      {"seed", c.seed},
      {"adapt_interval", c.adapt_interval},
      {"threads", c.threads},
      {"store_phi", c.store_phi},
      {"G", rc.G},
      {"hh_q", rc.hh_q},
      {"priors",
       {{"beta_mean", c.priors.beta_mean},
        {"beta_variance", c.priors.beta_variance},
        {"alpha_mean", c.priors.alpha_mean},
        {"alpha_variance", c.priors.alpha_variance},
        {"tau2_a", c.priors.tau2_a},
        {"tau2_b", c.priors.tau2_b},
        {"delta_max", c.priors.delta_max},
        {"gamma_variance", c.priors.gamma_variance}}},
      {"proposal",
       {{"beta", c.proposal.beta},
        {"alpha", c.proposal.alpha},
        {"shift", c.proposal.shift},
        {"theta", c.proposal.theta},
        {"rho", c.proposal.rho},
        {"lambda", c.proposal.lambda},
        {"delta", c.proposal.delta},
        {"gamma", c.proposal.gamma}}},
      {"frozen", frozen},
  };
}

SimScenario scenario_from_json(const json& j) {
  SimScenario s;
  Reader r(j, "scenario");
  std::string confounding = to_string(s.confounding), mode = to_string(s.mode), coupling = to_string(s.coupling);
  r.get("label", s.label);
  r.get("confounding", confounding);
  r.get("sd_phi", s.sd_phi);
  r.get("relative_risk", s.relative_risk);
  r.get("mode", mode);
  r.get("within_sd", s.within_sd);
  r.get("coupling", coupling);
  r.get("coupling_share", s.coupling_share);
  r.get("replicates", s.replicates);
  r.get("seed", s.seed);
  r.get("n_areas", s.n_areas);
  r.get("domain", s.domain);
  r.get("neighbours", s.neighbours);
  r.get("pollution_mean", s.pollution_mean);
  r.get("pollution_variance", s.pollution_variance);
  r.get("pollution_range", s.pollution_range);
  r.get("rough_range", s.rough_range);
  r.get("clusters", s.clusters);
  r.get("cluster_offset", s.cluster_offset);
  r.get("cells_min", s.cells_min);
  r.get("cells_max", s.cells_max);
  r.get("expected_lo", s.expected_lo);
  r.get("expected_hi", s.expected_hi);
  r.finish();
  s.confounding = confounding_from_string(confounding);
  s.mode = exposure_mode_from_string(mode);
  s.coupling = coupling_from_string(coupling);
  if (s.label.empty()) s.label = "scenario";
  s.validate();
  return s;
}

json to_json(const SimScenario& s) {
  return json{{"label", s.label},
              {"confounding", to_string(s.confounding)},
              {"sd_phi", s.sd_phi},
              {"relative_risk", s.relative_risk},
              {"mode", to_string(s.mode)},
              {"within_sd", s.within_sd},
              {"coupling", to_string(s.coupling)},
              {"coupling_share", s.coupling_share},
              {"replicates", s.replicates},
              {"seed", s.seed},
              {"n_areas", s.n_areas},
              {"domain", s.domain},
              {"neighbours", s.neighbours},
              {"pollution_mean", s.pollution_mean},
              {"pollution_variance", s.pollution_variance},
              {"pollution_range", s.pollution_range},
              {"rough_range", s.rough_range},
              {"clusters", s.clusters},
              {"cluster_offset", s.cluster_offset},
              {"cells_min", s.cells_min},
              {"cells_max", s.cells_max},
              {"expected_lo", s.expected_lo},
              {"expected_hi", s.expected_hi}};
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path.string() + ": cannot open file");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + ": invalid JSON at byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<ChainTrace>& traces) {
  std::ofstream out(path);
  if (!out) throw InputError(path.string() + ": cannot write");
  if (traces.empty()) return;
  const auto series = scalar_series(traces);
  out << "chain,iteration";
  for (const auto& [name, chains] : series) out << ',' << name;
  out << '\n';
  for (std::size_t c = 0; c < traces.size(); ++c) {
    for (Index s = 0; s < traces[c].size(); ++s) {
      out << traces[c].chain_id << ',' << traces[c].iterations[s];
      for (const auto& [name, chains] : series) out << ',' << format_double(chains[c](s));
      out << '\n';
    }
  }
}

namespace {

json number(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

}  // namespace

json summary_to_json(const PosteriorSummary& s) {
  json params = json::object();
  for (const auto& p : s.params) {
    params[p.name] = {{"mean", number(p.mean)},
                      {"sd", number(p.sd)},
                      {"lo95", number(p.lo95)},
                      {"hi95", number(p.hi95)},
                      {"ess", number(p.ess)},
                      {"psrf", p.psrf ? number(*p.psrf) : json(nullptr)}};
  }
  json j{{"model", s.model},
         {"n_chains", s.n_chains},
         {"n_samples", s.n_samples},
         {"parameters", params},
         {"relative_risk",
          {{"increment", s.relative_risk.increment},
           {"mean", number(s.relative_risk.mean)},
           {"lo95", number(s.relative_risk.lo95)},
           {"hi95", number(s.relative_risk.hi95)}}}};
  return j;
}

json glm_to_json(const GlmFit& fit, double increment) {
  json params = json::object();
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    const auto k = static_cast<Index>(i);
    params[fit.names[i]] = {{"mean", number(fit.coefficients(k))},
                            {"se", number(fit.standard_errors(k))},
                            {"lo95", number(fit.lower95(k))},
                            {"hi95", number(fit.upper95(k))}};
  }
  const Index a = fit.coefficients.size() - 1;
  return json{{"model", "glm"},
              {"parameters", params},
              {"dispersion", number(fit.dispersion)},
              {"deviance", number(fit.deviance)},
              {"iterations", fit.iterations},
              {"relative_risk",
               {{"increment", increment},
                {"mean", number(std::exp(fit.coefficients(a) * increment))},
                {"lo95", number(std::exp(fit.lower95(a) * increment))},
                {"hi95", number(std::exp(fit.upper95(a) * increment))}}}};
}

void write_metrics_csv(const std::filesystem::path& path, const MetricTable& rows) {
  std::ofstream out(path);
  if (!out) throw InputError(path.string() + ": cannot write");
  out << "scenario,model,bias_pct,rmse_pct,coverage_pct,n_ok,n_failed\n";
  for (const auto& r : rows) {
    out << r.scenario << ',' << r.model << ',' << format_double(r.bias_pct) << ',' << format_double(r.rmse_pct)
        << ',' << format_double(r.coverage_pct) << ',' << r.n_ok << ',' << r.n_failed << '\n';
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw InputError(path.string() + ": cannot write");
  out << text;
}

}  // namespace sre
