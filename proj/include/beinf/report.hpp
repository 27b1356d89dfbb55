#pragma once

// Run configuration and the three command runners behind the CLI: fit,
// simulate and compare-links. Every run writes its outputs plus a manifest
// into the output directory; nothing written depends on the clock or the
// environment, so equal configs give byte-identical files.

#include <beinf/claims.hpp>
#include <beinf/csv.hpp>
#include <beinf/design.hpp>
#include <beinf/errors.hpp>
#include <beinf/link.hpp>
#include <beinf/regression.hpp>

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace beinf::report {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitError = 1, kExitNotConverged = 2 };

using LinkSet = std::array<LinkKind, kNumParams>;

enum class SimulationMode { beinf, claims };

struct SimulatedClass {
  Covariates covariates;
  std::size_t exposure = 0;
  BeinfParams beinf{};  // beinf mode
  double deductible = 0.0;  // claims mode
  double oop_max = 0.0;
  SeverityModel severity;
};

struct SimulationConfig {
  SimulationMode mode = SimulationMode::beinf;
  bool stratified = false;
  std::vector<SimulatedClass> classes;
};

struct RunConfig {
  std::optional<std::filesystem::path> input;
  std::optional<SimulationConfig> simulate;
  ModelSpec model = deductible_model();
  std::vector<std::string> group_by{"branch"};
  std::vector<LinkSet> candidates;
  std::uint64_t seed = 0;
  std::filesystem::path out = "out";
  bool text_report = true;
  bool plots = true;
  FitOptions fit_options;
};

// ---------------------------------------------------------------- links

inline std::string format_links(const LinkSet& links) {
  std::string s;
  for (std::size_t k = 0; k < kNumParams; ++k) {
    if (k) s += ',';
    s += std::string(kParamNames[k]) + "=" + std::string(to_string(links[k]));
  }
  return s;
}

inline LinkSet links_of(const ModelSpec& spec) {
  LinkSet l{};
  for (std::size_t k = 0; k < kNumParams; ++k) l[k] = spec.params[k].link;
  return l;
}

/// Parses "mu=logit,sigma=logit,nu=log,tau=log"; parameters left out keep
/// the links in `base`.
inline LinkSet parse_link_set(const std::string& text, LinkSet base) {
  std::stringstream ss(text);
  std::string item;
  std::set<std::string> seen;
  while (std::getline(ss, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    if (first == std::string::npos) throw ValidationError("empty entry in link specification '" + text + "'");
    item = item.substr(first, item.find_last_not_of(" \t") - first + 1);
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ValidationError("link assignment '" + item + "' is not of the form param=link");
    const std::string name = item.substr(0, eq);
    if (!seen.insert(name).second) throw ValidationError("link for '" + name + "' given twice");
    base[static_cast<std::size_t>(parse_param(name))] = parse_link(item.substr(eq + 1));
  }
  if (seen.empty()) throw ValidationError("empty link specification");
  return base;
}

// ---------------------------------------------------------------- config

namespace detail {

using nlohmann::json;

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ValidationError(where + ": unknown key '" + key + "'");
  }
}

inline bool is_count(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
}

inline double get_number(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ValidationError(where + ": missing '" + key + "'");
  if (!j.at(key).is_number()) throw ValidationError(where + ": '" + key + "' must be a number");
  return j.at(key).get<double>();
}

inline std::string get_label(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ValidationError(where + ": missing '" + key + "'");
  const auto& v = j.at(key);
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw ValidationError(where + ": '" + key + "' must be a string or integer");
}

inline std::vector<std::string> get_strings(const json& j, const std::string& where) {
  if (!j.is_array()) throw ValidationError(where + ": expected an array of strings");
  std::vector<std::string> out;
  for (const auto& v : j) {
    if (!v.is_string()) throw ValidationError(where + ": expected an array of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

inline SimulatedClass parse_class(const json& j, SimulationMode mode, std::size_t index) {
  const std::string where = "simulate.classes[" + std::to_string(index) + "]";
  SimulatedClass c;
  if (mode == SimulationMode::beinf) {
    check_keys(j, {"branch", "deductible_level", "exposure", "p0", "p1", "mu", "sigma", "a", "b"}, where);
  } else {
    check_keys(j, {"branch", "deductible_level", "exposure", "deductible", "oop_max", "meanlog", "sdlog"}, where);
  }
  c.covariates = {{"branch", get_label(j, "branch", where)}, {"deductible_level", get_label(j, "deductible_level", where)}};
  const double exposure = get_number(j, "exposure", where);
  if (!(exposure >= 0.0 && exposure == std::floor(exposure))) {
    throw ValidationError(where + ": exposure must be a non-negative integer");
  }
  c.exposure = static_cast<std::size_t>(exposure);

  if (mode == SimulationMode::claims) {
    c.deductible = get_number(j, "deductible", where);
    c.oop_max = get_number(j, "oop_max", where);
    c.severity = {get_number(j, "meanlog", where), get_number(j, "sdlog", where)};
    return c;
  }
  const double p0 = j.contains("p0") ? get_number(j, "p0", where) : 0.0;
  const double p1 = j.contains("p1") ? get_number(j, "p1", where) : 0.0;
  const bool gamlss_form = j.contains("mu") || j.contains("sigma");
  const bool shape_form = j.contains("a") || j.contains("b");
  if (gamlss_form == shape_form) {
    throw ValidationError(where + ": give the beta component either as mu, sigma or as a, b");
  }
  double a = 0.0;
  double b = 0.0;
  if (gamlss_form) {
    const double mu = get_number(j, "mu", where);
    const double sigma = get_number(j, "sigma", where);
    if (!(mu > 0.0 && mu < 1.0 && sigma > 0.0 && sigma < 1.0)) {
      throw ValidationError(where + ": mu and sigma must lie in (0, 1)");
    }
    a = mu * (1.0 - sigma) / sigma;
    b = (1.0 - mu) * (1.0 - sigma) / sigma;
  } else {
    a = get_number(j, "a", where);
    b = get_number(j, "b", where);
  }
  c.beinf = {p0, p1, a, b};
  if (!is_valid(c.beinf)) throw ValidationError(where + ": invalid BEINF parameters");
  return c;
}

inline SimulationConfig parse_simulation(const json& j) {
  check_keys(j, {"mode", "stratified", "classes"}, "simulate");
  SimulationConfig s;
  if (j.contains("mode")) {
    const auto m = j.at("mode");
    if (m == "beinf") {
      s.mode = SimulationMode::beinf;
    } else if (m == "claims") {
      s.mode = SimulationMode::claims;
    } else {
      throw ValidationError("simulate.mode must be \"beinf\" or \"claims\"");
    }
  }
  if (j.contains("stratified")) {
    if (!j.at("stratified").is_boolean()) throw ValidationError("simulate.stratified must be true or false");
    s.stratified = j.at("stratified").get<bool>();
  }
  if (!j.contains("classes") || !j.at("classes").is_array()) {
    throw ValidationError("simulate.classes must be an array");
  }
  for (std::size_t i = 0; i < j.at("classes").size(); ++i) s.classes.push_back(parse_class(j.at("classes")[i], s.mode, i));
  if (s.classes.empty()) throw ValidationError("simulate.classes is empty: no data to generate");
  return s;
}

inline ModelSpec parse_model(const json& j) {
  check_keys(j, {"mu", "sigma", "nu", "tau"}, "model");
  ModelSpec spec = deductible_model();
  for (const auto& [name, entry] : j.items()) {
    const std::string where = "model." + name;
    check_keys(entry, {"link", "covariates"}, where);
    auto& ps = spec[parse_param(name)];
    if (entry.contains("link")) {
      if (!entry.at("link").is_string()) throw ValidationError(where + ".link must be a string");
      ps.link = parse_link(entry.at("link").get<std::string>());
    }
    if (entry.contains("covariates")) ps.covariates = get_strings(entry.at("covariates"), where + ".covariates");
  }
  return spec;
}

inline LinkSet parse_candidate(const json& j, const LinkSet& base, std::size_t index) {
  const std::string where = "candidates[" + std::to_string(index) + "]";
  if (j.is_string()) return parse_link_set(j.get<std::string>(), base);
  check_keys(j, {"mu", "sigma", "nu", "tau"}, where);
  LinkSet l = base;
  for (const auto& [name, v] : j.items()) {
    if (!v.is_string()) throw ValidationError(where + "." + name + " must be a string");
    l[static_cast<std::size_t>(parse_param(name))] = parse_link(v.get<std::string>());
  }
  return l;
}

}  // namespace detail

/// Builds a RunConfig from its JSON form. Unknown keys are rejected.
inline RunConfig parse_config(const nlohmann::json& j) {
  using detail::check_keys;
  check_keys(j, {"input", "simulate", "model", "group_by", "candidates", "seed", "out", "report", "optimizer"}, "config");
  RunConfig cfg;
  if (j.contains("input")) {
    if (!j.at("input").is_string()) throw ValidationError("config: 'input' must be a path string");
    cfg.input = j.at("input").get<std::string>();
  }
  if (j.contains("simulate")) cfg.simulate = detail::parse_simulation(j.at("simulate"));
  if (j.contains("model")) cfg.model = detail::parse_model(j.at("model"));
  if (j.contains("group_by")) cfg.group_by = detail::get_strings(j.at("group_by"), "group_by");
  if (j.contains("candidates")) {
    if (!j.at("candidates").is_array()) throw ValidationError("config: 'candidates' must be an array");
    for (std::size_t i = 0; i < j.at("candidates").size(); ++i) {
      cfg.candidates.push_back(detail::parse_candidate(j.at("candidates")[i], links_of(cfg.model), i));
    }
  }
  if (j.contains("seed")) {
    if (!detail::is_count(j.at("seed"))) throw ValidationError("config: 'seed' must be a non-negative integer");
    cfg.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("out")) {
    if (!j.at("out").is_string()) throw ValidationError("config: 'out' must be a path string");
    cfg.out = j.at("out").get<std::string>();
  }
  if (j.contains("report")) {
    const auto& r = j.at("report");
    check_keys(r, {"text", "plots"}, "report");
    for (const char* key : {"text", "plots"}) {
      if (r.contains(key) && !r.at(key).is_boolean()) {
        throw ValidationError(std::string("report.") + key + " must be true or false");
      }
    }
    cfg.text_report = r.value("text", true);
    cfg.plots = r.value("plots", true);
  }
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    check_keys(o, {"max_iterations"}, "optimizer");
    if (!o.contains("max_iterations") || !detail::is_count(o.at("max_iterations"))) {
      throw ValidationError("optimizer.max_iterations must be a non-negative integer");
    }
    cfg.fit_options.optimizer.max_iterations = o.at("max_iterations").get<int>();
  }
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("config '" + path.string() + "': " + e.what());
  }
  try {
    return parse_config(j);
  } catch (const ValidationError& e) {
    throw ValidationError("config '" + path.string() + "': " + e.what());
  }
}

/// Canonical JSON form, recorded in every manifest.
inline nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json j;
  if (cfg.input) j["input"] = cfg.input->generic_string();
  if (cfg.simulate) {
    auto& s = j["simulate"];
    s["mode"] = cfg.simulate->mode == SimulationMode::beinf ? "beinf" : "claims";
    s["stratified"] = cfg.simulate->stratified;
    s["classes"] = nlohmann::json::array();
    for (const auto& c : cfg.simulate->classes) {
      nlohmann::json e;
      e["branch"] = c.covariates.at("branch");
      e["deductible_level"] = c.covariates.at("deductible_level");
      e["exposure"] = c.exposure;
      if (cfg.simulate->mode == SimulationMode::beinf) {
        e["p0"] = c.beinf.p0;
        e["p1"] = c.beinf.p1;
        e["a"] = c.beinf.a;
        e["b"] = c.beinf.b;
      } else {
        e["deductible"] = c.deductible;
        e["oop_max"] = c.oop_max;
        e["meanlog"] = c.severity.meanlog;
        e["sdlog"] = c.severity.sdlog;
      }
      s["classes"].push_back(e);
    }
  }
  for (std::size_t k = 0; k < kNumParams; ++k) {
    j["model"][kParamNames[k]] = {{"link", to_string(cfg.model.params[k].link)},
                                  {"covariates", cfg.model.params[k].covariates}};
  }
  j["group_by"] = cfg.group_by;
  j["candidates"] = nlohmann::json::array();
  for (const auto& c : cfg.candidates) j["candidates"].push_back(format_links(c));
  j["seed"] = cfg.seed;
  j["out"] = cfg.out.generic_string();
  j["report"] = {{"text", cfg.text_report}, {"plots", cfg.plots}};
  j["optimizer"] = {{"max_iterations", cfg.fit_options.optimizer.max_iterations}};
  return j;
}

// ---------------------------------------------------------------- data

inline void check_source(const RunConfig& cfg) {
  if (cfg.input && cfg.simulate) throw ValidationError("config gives both an input file and a simulator; use one");
  if (!cfg.input && !cfg.simulate) throw ValidationError("no data source: give an input file or a simulate block");
}

inline IdrPortfolioConfig idr_portfolio(const SimulationConfig& s, std::uint64_t seed) {
  IdrPortfolioConfig p;
  p.seed = seed;
  p.stratified = s.stratified;
  for (const auto& c : s.classes) p.classes.push_back({c.covariates, c.exposure, c.beinf});
  return p;
}

inline PortfolioConfig claim_portfolio(const SimulationConfig& s, std::uint64_t seed) {
  PortfolioConfig p;
  p.seed = seed;
  for (const auto& c : s.classes) p.classes.push_back({c.covariates, c.exposure, c.deductible, c.oop_max, c.severity});
  return p;
}

inline std::vector<IdrObservation> load_observations(const RunConfig& cfg) {
  check_source(cfg);
  std::vector<IdrObservation> data;
  if (cfg.input) {
    data = csv::read_observations(*cfg.input);
  } else if (cfg.simulate->mode == SimulationMode::beinf) {
    data = simulate_idr(idr_portfolio(*cfg.simulate, cfg.seed));
  } else {
    data = to_observations(simulate_portfolio(claim_portfolio(*cfg.simulate, cfg.seed)));
  }
  if (data.empty()) throw ValidationError("dataset is empty");
  return data;
}

/// Observations split by the group_by covariates, groups in key order and
/// rows in input order.
inline std::map<Covariates, std::vector<IdrObservation>> split_groups(const std::vector<IdrObservation>& data,
                                                                      const std::vector<std::string>& group_by) {
  std::map<Covariates, std::vector<IdrObservation>> groups;
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (const auto& g : group_by) {
      if (!data[i].covariates.contains(g)) {
        throw ValidationError("observation " + std::to_string(i + 1) + " lacks grouping covariate '" + g + "'");
      }
    }
    groups[project(data[i].covariates, group_by)].push_back(data[i]);
  }
  return groups;
}

// ---------------------------------------------------------------- output helpers

namespace detail {

inline std::string percent(double v) {
  if (!std::isfinite(v)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
  return buf;
}

inline std::string file_token(const std::string& s) {
  std::string out;
  for (unsigned char ch : s) out += std::isalnum(ch) ? static_cast<char>(ch) : '_';
  return out.empty() ? std::string("_") : out;
}

// Collects files written by a run so the manifest can list them.
class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path root) : root_(std::move(root)) {
    std::error_code ec;
    std::filesystem::create_directories(root_, ec);
    if (ec || !std::filesystem::is_directory(root_)) {
      throw IoError("cannot create output directory '" + root_.string() + "'");
    }
  }

  void write(const std::string& relative, const std::string& content) {
    const auto path = root_ / relative;
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << content;
    if (!out.flush()) throw IoError("write to '" + path.string() + "' failed");
    files_[relative] = content.size();
  }

  void write_manifest(const std::string& command, const RunConfig& cfg, int exit_code, bool converged) {
    nlohmann::json m;
    m["tool"] = "beinf";
    m["version"] = kVersion;
    m["command"] = command;
    m["seed"] = cfg.seed;
    m["config"] = to_json(cfg);
    m["converged"] = converged;
    m["exit_code"] = exit_code;
    m["outputs"] = nlohmann::json::array();
    for (const auto& [name, bytes] : files_) m["outputs"].push_back({{"path", name}, {"bytes", bytes}});
    write("manifest.json", m.dump(2) + "\n");
  }

 private:
  std::filesystem::path root_;
  std::map<std::string, std::size_t> files_;
};

}  // namespace detail

// ---------------------------------------------------------------- fit

struct GroupFit {
  Covariates group;
  FitResult fit;
};

struct ObservedFittedRow {
  Covariates cls;
  ClassSummary observed;
  double fitted_mean = 0.0;  // mu, the mean of the beta component
  double fitted_p0 = 0.0;
  double fitted_p1 = 0.0;
};

struct ObservedFittedTable {
  std::vector<std::string> keys;  // class key columns
  std::vector<ObservedFittedRow> rows;
};

/// Class keys of the table: grouping covariates plus every model covariate.
inline std::vector<std::string> class_keys(const RunConfig& cfg) {
  std::set<std::string> names(cfg.group_by.begin(), cfg.group_by.end());
  for (const auto& n : cfg.model.covariate_names()) names.insert(n);
  return {names.begin(), names.end()};
}

inline ObservedFittedTable observed_fitted(const std::vector<IdrObservation>& data, const std::vector<GroupFit>& fits,
                                           const std::vector<std::string>& group_by,
                                           const std::vector<std::string>& keys) {
  ObservedFittedTable t;
  t.keys = keys;
  for (const auto& [cls, s] : class_summary(data, keys)) {
    const Covariates group = project(cls, group_by);
    const auto it = std::find_if(fits.begin(), fits.end(), [&](const GroupFit& g) { return g.group == group; });
    if (it == fits.end()) throw ValidationError("no fit for class " + format_class(cls));
    const auto pred = predict_class(it->fit, cls);
    t.rows.push_back({cls, s, pred.gamlss.mu, pred.beinf.p0, pred.beinf.p1});
  }
  return t;
}

inline std::string observed_fitted_csv(const ObservedFittedTable& t) {
  using csv::format_number;
  std::ostringstream out;
  for (const auto& k : t.keys) out << csv::quote_field(k) << ',';
  out << "exposure_beta,observed_mean,fitted_mean,exposure_p0,observed_p0,fitted_p0,exposure_p1,observed_p1,"
         "fitted_p1\n";
  for (const auto& r : t.rows) {
    for (const auto& k : t.keys) out << csv::quote_field(r.cls.at(k)) << ',';
    out << format_number(r.observed.exposure_interior) << ',' << format_number(r.observed.interior_mean) << ','
        << format_number(r.fitted_mean) << ',' << format_number(r.observed.exposure) << ','
        << format_number(r.observed.frac0) << ',' << format_number(r.fitted_p0) << ','
        << format_number(r.observed.exposure) << ',' << format_number(r.observed.frac1) << ','
        << format_number(r.fitted_p1) << '\n';
  }
  return out.str();
}

namespace detail {

// Rows are split into panels by branch when the class key has one.
inline std::string panel_of(const Covariates& cls) {
  const auto it = cls.find("branch");
  return it == cls.end() ? std::string("all") : it->second;
}

inline std::string row_label(const Covariates& cls) {
  std::string s;
  for (const auto& [k, v] : cls) {
    if (k == "branch") continue;
    if (!s.empty()) s += ",";
    s += v;
  }
  return s.empty() ? std::string("(all)") : s;
}

}  // namespace detail

inline std::string observed_fitted_text(const ObservedFittedTable& t) {
  std::ostringstream out;
  out << "Observed vs fitted values\n";
  std::map<std::string, std::vector<const ObservedFittedRow*>> panels;
  for (const auto& r : t.rows) panels[detail::panel_of(r.cls)].push_back(&r);
  char line[512];
  for (const auto& [panel, rows] : panels) {
    out << "\nbranch: " << panel << "\n";
    std::snprintf(line, sizeof line, "%-12s | %10s %9s %9s | %10s %9s %9s | %10s %9s %9s\n", "class", "Exposure",
                  "Observed", "Fitted", "Exposure", "Observed", "Fitted", "Exposure", "Observed", "Fitted");
    out << std::string(12, ' ') << " | Beta mean" << std::string(22, ' ') << "| p0" << std::string(29, ' ')
        << "| p1\n";
    out << line;
    for (const auto* r : rows) {
      std::snprintf(line, sizeof line, "%-12s | %10s %9s %9s | %10s %9s %9s | %10s %9s %9s\n",
                    detail::row_label(r->cls).c_str(), csv::format_number(r->observed.exposure_interior).c_str(),
                    detail::percent(r->observed.interior_mean).c_str(), detail::percent(r->fitted_mean).c_str(),
                    csv::format_number(r->observed.exposure).c_str(), detail::percent(r->observed.frac0).c_str(),
                    detail::percent(r->fitted_p0).c_str(), csv::format_number(r->observed.exposure).c_str(),
                    detail::percent(r->observed.frac1).c_str(), detail::percent(r->fitted_p1).c_str());
      out << line;
    }
  }
  return out.str();
}

/// One CSV per (panel, quantity) with observed and fitted bar heights.
inline std::map<std::string, std::string> plot_data(const ObservedFittedTable& t) {
  std::map<std::string, std::string> files;
  std::map<std::string, std::vector<const ObservedFittedRow*>> panels;
  for (const auto& r : t.rows) panels[detail::panel_of(r.cls)].push_back(&r);
  for (const auto& [panel, rows] : panels) {
    for (const char* quantity : {"p0", "p1", "mu"}) {
      std::ostringstream out;
      out << "class,observed,fitted\n";
      for (const auto* r : rows) {
        double obs = 0.0;
        double fit = 0.0;
        if (std::string(quantity) == "p0") {
          obs = r->observed.frac0;
          fit = r->fitted_p0;
        } else if (std::string(quantity) == "p1") {
          obs = r->observed.frac1;
          fit = r->fitted_p1;
        } else {
          obs = r->observed.interior_mean;
          fit = r->fitted_mean;
        }
        out << csv::quote_field(detail::row_label(r->cls)) << ',' << csv::format_number(obs) << ','
            << csv::format_number(fit) << '\n';
      }
      files["plots/" + detail::file_token(panel) + "_" + quantity + ".csv"] = out.str();
    }
  }
  return files;
}

inline nlohmann::json fit_summary_json(const std::vector<GroupFit>& fits) {
  nlohmann::json j;
  j["groups"] = nlohmann::json::array();
  double total_ll = 0.0;
  std::size_t total_k = 0;
  bool all_converged = true;
  for (const auto& g : fits) {
    const auto& f = g.fit;
    nlohmann::json e;
    e["group"] = g.group;
    e["converged"] = f.converged;
    e["termination"] = f.termination;
    e["iterations"] = f.iterations;
    e["gradient_norm"] = f.gradient_norm;
    e["log_likelihood"] = f.log_likelihood;
    e["n_params"] = f.n_params;
    e["n_observations"] = f.n_observations;
    e["aic"] = f.aic;
    e["warnings"] = f.warnings;
    for (std::size_t k = 0; k < kNumParams; ++k) {
      auto& p = e["parameters"][kParamNames[k]];
      p["link"] = to_string(f.codings[k].link);
      p["coefficients"] = nlohmann::json::array();
      for (std::size_t c = 0; c < f.codings[k].labels.size(); ++c) {
        const auto idx = static_cast<Eigen::Index>(c);
        p["coefficients"].push_back({{"term", f.codings[k].labels[c]},
                                     {"estimate", f.coefficients.beta[k](idx)},
                                     {"std_error", f.standard_errors.beta[k](idx)}});
      }
    }
    j["groups"].push_back(e);
    total_ll += f.log_likelihood;
    total_k += f.n_params;
    all_converged = all_converged && f.converged;
  }
  j["total"] = {{"log_likelihood", total_ll}, {"n_params", total_k}, {"aic", aic(total_ll, total_k)}};
  j["converged"] = all_converged;
  return j;
}

struct FitRun {
  std::vector<GroupFit> fits;
  ObservedFittedTable table;
  int exit_code = kExitOk;
};

/// Fits the model separately in every group and writes fit_summary.json,
/// observed_vs_fitted.csv, report.txt, plots/ and manifest.json.
inline FitRun run_fit(const RunConfig& cfg, std::ostream& log) {
  const auto data = load_observations(cfg);
  detail::OutputDir out(cfg.out);
  FitRun run;
  for (const auto& [group, rows] : split_groups(data, cfg.group_by)) {
    log << "fitting " << format_class(group) << " (" << rows.size() << " observations)\n";
    FitResult f;
    try {
      f = fit(rows, cfg.model, std::nullopt, cfg.fit_options);
    } catch (const ValidationError& e) {
      throw ValidationError("group " + format_class(group) + ": " + e.what());
    }
    if (!f.converged) log << "  not converged: " << f.termination << "\n";
    run.fits.push_back({group, std::move(f)});
  }
  run.table = observed_fitted(data, run.fits, cfg.group_by, class_keys(cfg));
  const bool converged =
      std::all_of(run.fits.begin(), run.fits.end(), [](const GroupFit& g) { return g.fit.converged; });
  run.exit_code = converged ? kExitOk : kExitNotConverged;

  out.write("fit_summary.json", fit_summary_json(run.fits).dump(2) + "\n");
  out.write("observed_vs_fitted.csv", observed_fitted_csv(run.table));
  if (cfg.text_report) out.write("report.txt", observed_fitted_text(run.table));
  if (cfg.plots) {
    for (const auto& [name, content] : plot_data(run.table)) out.write(name, content);
  }
  out.write_manifest("fit", cfg, run.exit_code, converged);
  return run;
}

// ---------------------------------------------------------------- simulate

/// Writes idr.csv, plus claims.csv in claims mode, and manifest.json.
inline int run_simulate(const RunConfig& cfg, std::ostream& log) {
  if (!cfg.simulate) throw ValidationError("simulate needs a simulate block in the config");
  if (cfg.input) throw ValidationError("simulate does not read an input file");
  detail::OutputDir out(cfg.out);
  std::ostringstream idr_csv;
  if (cfg.simulate->mode == SimulationMode::claims) {
    const auto claims = simulate_portfolio(claim_portfolio(*cfg.simulate, cfg.seed));
    std::ostringstream claims_csv;
    csv::write_claims(claims_csv, claims);
    out.write("claims.csv", claims_csv.str());
    csv::write_idr(idr_csv, to_observations(claims));
    log << "simulated " << claims.size() << " claims\n";
  } else {
    const auto obs = simulate_idr(idr_portfolio(*cfg.simulate, cfg.seed));
    csv::write_idr(idr_csv, obs);
    log << "simulated " << obs.size() << " IDR observations\n";
  }
  out.write("idr.csv", idr_csv.str());
  out.write_manifest("simulate", cfg, kExitOk, true);
  return kExitOk;
}

// ---------------------------------------------------------------- compare-links

struct LinkComparisonRow {
  LinkSet links{};
  double log_likelihood = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_params = 0;
  double aic = std::numeric_limits<double>::quiet_NaN();
  std::string status;  // "ok", "not_converged" or "failed: <reason>"
  bool best = false;
};

inline std::string comparison_csv(const std::vector<LinkComparisonRow>& rows) {
  using csv::format_number;
  std::ostringstream out;
  out << "rank,mu,sigma,nu,tau,log_likelihood,n_params,aic,status,best\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    out << i + 1;
    for (auto l : r.links) out << ',' << to_string(l);
    out << ',' << format_number(r.log_likelihood) << ',' << r.n_params << ',' << format_number(r.aic) << ','
        << csv::quote_field(r.status) << ',' << (r.best ? "true" : "false") << '\n';
  }
  return out.str();
}

struct CompareRun {
  std::vector<LinkComparisonRow> rows;  // sorted, best first
  int exit_code = kExitOk;
};

/// Fits every candidate link set (all groups), sums log-likelihoods and
/// parameter counts over the groups and ranks by AIC. A candidate whose fit
/// throws is reported as failed; the others still run.
inline CompareRun run_compare_links(const RunConfig& cfg, std::ostream& log) {
  if (cfg.candidates.empty()) throw ValidationError("compare-links needs at least one candidate link set");
  const auto data = load_observations(cfg);
  const auto groups = split_groups(data, cfg.group_by);
  detail::OutputDir out(cfg.out);

  CompareRun run;
  for (const auto& links : cfg.candidates) {
    LinkComparisonRow row;
    row.links = links;
    ModelSpec spec = cfg.model;
    for (std::size_t k = 0; k < kNumParams; ++k) spec.params[k].link = links[k];
    try {
      double ll = 0.0;
      std::size_t k = 0;
      bool converged = true;
      for (const auto& [group, rows] : groups) {
        const auto f = fit(rows, spec, std::nullopt, cfg.fit_options);
        ll += f.log_likelihood;
        k += f.n_params;
        converged = converged && f.converged;
      }
      row.log_likelihood = ll;
      row.n_params = k;
      row.aic = aic(ll, k);
      row.status = converged ? "ok" : "not_converged";
    } catch (const std::exception& e) {
      row.status = std::string("failed: ") + e.what();
    }
    log << format_links(links) << ": " << row.status << "\n";
    run.rows.push_back(std::move(row));
  }

  auto tier = [](const LinkComparisonRow& r) { return r.status == "ok" ? 0 : r.status == "not_converged" ? 1 : 2; };
  std::stable_sort(run.rows.begin(), run.rows.end(), [&](const LinkComparisonRow& a, const LinkComparisonRow& b) {
    if (tier(a) != tier(b)) return tier(a) < tier(b);
    if (tier(a) == 2) return false;
    return a.aic < b.aic;
  });
  if (!run.rows.empty() && tier(run.rows.front()) == 0) {
    run.rows.front().best = true;
    run.exit_code = kExitOk;
  } else {
    const bool any_fit = std::any_of(run.rows.begin(), run.rows.end(), [&](const auto& r) { return tier(r) == 1; });
    run.exit_code = any_fit ? kExitNotConverged : kExitError;
  }

  out.write("link_comparison.csv", comparison_csv(run.rows));
  out.write_manifest("compare-links", cfg, run.exit_code, run.exit_code == kExitOk);
  return run;
}

}  // namespace beinf::report
