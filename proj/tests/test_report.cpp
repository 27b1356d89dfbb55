#include <beinf/report.hpp>

#include "support/fixtures.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace beinf;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "beinf_report_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json small_simulation() {
  json classes = json::array();
  for (const std::string branch : {"surgery", "diagnostic"}) {
    for (int level = 1; level <= 3; ++level) {
      classes.push_back({{"branch", branch},
                         {"deductible_level", std::to_string(level)},
                         {"exposure", 400},
                         {"p0", 0.25 * level},
                         {"p1", 0.05},
                         {"mu", 0.7},
                         {"sigma", 0.15}});
    }
  }
  return {{"mode", "beinf"}, {"classes", classes}};
}

report::RunConfig config_for(const fs::path& out) {
  auto cfg = report::parse_config({{"simulate", small_simulation()}, {"seed", 11}});
  cfg.out = out;
  return cfg;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(BEINF_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, ParsesDefaultsAndCandidates) {
  const auto cfg = report::parse_config(
      {{"input", "data.csv"}, {"candidates", json::array({{{"nu", "log"}}, "nu=identity,tau=identity"})}});
  ASSERT_TRUE(cfg.input);
  EXPECT_EQ(cfg.group_by, std::vector<std::string>{"branch"});
  ASSERT_EQ(cfg.candidates.size(), 2u);
  EXPECT_EQ(cfg.candidates[1][static_cast<std::size_t>(Param::tau)], LinkKind::identity);
  EXPECT_EQ(cfg.candidates[1][static_cast<std::size_t>(Param::mu)], LinkKind::logit);
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(report::parse_config({{"input", "x.csv"}, {"sed", 3}}), ValidationError);
  EXPECT_THROW(report::parse_config({{"input", 4}}), ValidationError);
  EXPECT_THROW(report::parse_config({{"input", "x.csv"}, {"candidates", json::array({"nu=cubic"})}}), ValidationError);
  EXPECT_THROW(report::parse_config({{"input", "x.csv"}, {"candidates", json::array({"nu=log,nu=log"})}}),
               ValidationError);
  json sim = small_simulation();
  sim["classes"] = json::array();
  EXPECT_THROW(report::check_source(report::parse_config({{"simulate", sim}})), ValidationError);
  EXPECT_THROW(report::check_source(report::parse_config(json::object())), ValidationError);
  EXPECT_THROW(report::check_source(report::parse_config({{"input", "x.csv"}, {"simulate", small_simulation()}})),
               ValidationError);
  sim = small_simulation();
  sim["classes"][0]["p0"] = 0.99;
  EXPECT_THROW(report::parse_config({{"simulate", sim}}), ValidationError);
}

TEST(Config, JsonRoundTrip) {
  const auto cfg = config_for("unused");
  const auto back = report::parse_config(report::to_json(cfg));
  EXPECT_EQ(report::to_json(back), report::to_json(cfg));
}

TEST(LinkSet, ParseAndFormat) {
  const auto base = report::links_of(deductible_model());
  const auto l = report::parse_link_set("nu=identity, tau=identity", base);
  EXPECT_EQ(report::format_links(l), "mu=logit,sigma=logit,nu=identity,tau=identity");
  EXPECT_THROW(report::parse_link_set("phi=log", base), ValidationError);
  EXPECT_THROW(report::parse_link_set("nu", base), ValidationError);
}

TEST(RunFit, ObservedColumnsEqualClassSummary) {
  const auto dir = scratch("observed");
  std::ostringstream log;
  const auto cfg = config_for(dir);
  const auto run = report::run_fit(cfg, log);
  EXPECT_EQ(run.exit_code, report::kExitOk);
  const auto data = report::load_observations(cfg);
  const auto summary = class_summary(data, report::class_keys(cfg));
  ASSERT_EQ(run.table.rows.size(), summary.size());
  for (const auto& row : run.table.rows) {
    const auto& s = summary.at(row.cls);
    EXPECT_EQ(row.observed.frac0, s.frac0);
    EXPECT_EQ(row.observed.frac1, s.frac1);
    EXPECT_EQ(row.observed.interior_mean, s.interior_mean);
    EXPECT_EQ(row.observed.exposure, s.exposure);
  }
  for (const auto* f : {"fit_summary.json", "observed_vs_fitted.csv", "report.txt", "manifest.json",
                        "plots/surgery_p0.csv", "plots/diagnostic_mu.csv"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const auto manifest = json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(manifest["exit_code"], 0);
  EXPECT_EQ(manifest["seed"], 11);
  bool listed = false;
  for (const auto& o : manifest["outputs"]) {
    if (o["path"] != "observed_vs_fitted.csv") continue;
    listed = true;
    EXPECT_EQ(o["bytes"].get<std::uintmax_t>(), fs::file_size(dir / "observed_vs_fitted.csv"));
  }
  EXPECT_TRUE(listed);
}

TEST(RunFit, CsvHeaderAndRowCount) {
  const auto dir = scratch("header");
  std::ostringstream log;
  report::run_fit(config_for(dir), log);
  std::istringstream in(slurp(dir / "observed_vs_fitted.csv"));
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header,
            "branch,deductible_level,exposure_beta,observed_mean,fitted_mean,exposure_p0,observed_p0,fitted_p0,"
            "exposure_p1,observed_p1,fitted_p1");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, 6);
}

TEST(RunFit, ByteIdenticalReruns) {
  const auto a = scratch("rerun_a");
  const auto b = scratch("rerun_b");
  std::ostringstream log;
  report::run_fit(config_for(a), log);
  report::run_fit(config_for(b), log);
  for (const auto* f : {"fit_summary.json", "observed_vs_fitted.csv", "report.txt", "plots/surgery_mu.csv"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
}

TEST(RunFit, SingleClassFitsInterceptOnly) {
  const auto dir = scratch("single");
  json sim = small_simulation();
  sim["classes"] = json::array({sim["classes"][0]});
  auto cfg = report::parse_config({{"simulate", sim}});
  cfg.out = dir;
  std::ostringstream log;
  const auto run = report::run_fit(cfg, log);
  EXPECT_EQ(run.exit_code, report::kExitOk);
  ASSERT_EQ(run.fits.size(), 1u);
  EXPECT_EQ(run.fits[0].fit.n_params, 4u);
  EXPECT_EQ(run.table.rows.size(), 1u);
}

TEST(RunFit, IterationCapGivesNotConverged) {
  const auto dir = scratch("cap");
  auto j = report::to_json(config_for(dir));
  j["optimizer"] = {{"max_iterations", 1}};
  const auto cfg = report::parse_config(j);
  std::ostringstream log;
  const auto run = report::run_fit(cfg, log);
  EXPECT_EQ(run.exit_code, report::kExitNotConverged);
  EXPECT_EQ(json::parse(slurp(dir / "manifest.json"))["converged"], false);
}

TEST(RunFit, GroupedTotalsAddUp) {
  const auto dir = scratch("totals");
  std::ostringstream log;
  const auto run = report::run_fit(config_for(dir), log);
  ASSERT_EQ(run.fits.size(), 2u);
  const auto summary = json::parse(slurp(dir / "fit_summary.json"));
  const double ll = run.fits[0].fit.log_likelihood + run.fits[1].fit.log_likelihood;
  EXPECT_NEAR(summary["total"]["log_likelihood"].get<double>(), ll, 1e-9 * std::fabs(ll));
  EXPECT_EQ(summary["total"]["n_params"], 20);
}

TEST(RunSimulate, WritesTableCounts) {
  const auto dir = scratch("simulate");
  json classes = json::array();
  for (const auto& row : fixtures::table1()) {
    classes.push_back({{"branch", row.branch},
                       {"deductible_level", row.level},
                       {"exposure", row.exposure},
                       {"p0", row.p0},
                       {"p1", row.p1},
                       {"mu", row.beta_mean},
                       {"sigma", fixtures::kTableSigma}});
  }
  auto cfg = report::parse_config({{"simulate", {{"mode", "beinf"}, {"stratified", true}, {"classes", classes}}}});
  cfg.out = dir;
  std::ostringstream log;
  EXPECT_EQ(report::run_simulate(cfg, log), report::kExitOk);
  const auto obs = csv::read_observations(dir / "idr.csv");
  std::size_t surgery = 0;
  for (const auto& o : obs) surgery += o.covariates.at("branch") == "surgery";
  EXPECT_EQ(surgery, 47845u + 9566u + 6379u);
  EXPECT_FALSE(fs::exists(dir / "claims.csv"));
}

TEST(CompareLinks, SingleCandidateGivesOneRow) {
  const auto dir = scratch("one_candidate");
  auto cfg = config_for(dir);
  cfg.candidates = {report::links_of(cfg.model)};
  std::ostringstream log;
  const auto run = report::run_compare_links(cfg, log);
  ASSERT_EQ(run.rows.size(), 1u);
  EXPECT_TRUE(run.rows[0].best);
  EXPECT_EQ(run.exit_code, report::kExitOk);
  const auto text = slurp(dir / "link_comparison.csv");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
}

TEST(CompareLinks, RankedByAicWithFailuresLast) {
  const auto dir = scratch("ranked");
  auto cfg = config_for(dir);
  const auto base = report::links_of(cfg.model);
  cfg.candidates = {report::parse_link_set("nu=logit", base), report::parse_link_set("nu=identity,tau=identity", base),
                    base};
  std::ostringstream log;
  const auto run = report::run_compare_links(cfg, log);
  ASSERT_EQ(run.rows.size(), 3u);
  EXPECT_LE(run.rows[0].aic, run.rows[1].aic);
  EXPECT_EQ(run.rows[2].status.rfind("failed", 0), 0u);
  for (const auto& r : run.rows) {
    if (r.status != "ok") continue;
    EXPECT_EQ(r.aic, -2.0 * r.log_likelihood + 2.0 * static_cast<double>(r.n_params));
  }
}

TEST(Faults, MissingInputIsIoError) {
  auto cfg = report::parse_config({{"input", "/nonexistent/idr.csv"}});
  cfg.out = scratch("missing");
  std::ostringstream log;
  EXPECT_THROW(report::run_fit(cfg, log), IoError);
}

TEST(Faults, MalformedCsvIsValidationError) {
  const auto dir = scratch("malformed");
  std::ofstream(dir / "bad.csv") << "branch,deductible_level,idr\nsurgery,1,0.5\nsurgery,1\n";
  auto cfg = report::parse_config({{"input", (dir / "bad.csv").string()}});
  cfg.out = dir / "out";
  std::ostringstream log;
  try {
    report::run_fit(cfg, log);
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(Faults, OutputPathIsAFile) {
  const auto dir = scratch("outfile");
  std::ofstream(dir / "taken") << "x";
  auto cfg = config_for(dir / "taken");
  std::ostringstream log;
  EXPECT_THROW(report::run_fit(cfg, log), IoError);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  auto j = report::to_json(config_for(dir / "out"));
  std::ofstream(dir / "run.json") << j.dump(2);
  j["optimizer"] = {{"max_iterations", 1}};
  std::ofstream(dir / "capped.json") << j.dump(2);
  std::ofstream(dir / "broken.json") << "{ \"seed\": ";
  const std::string run = (dir / "run.json").string();

  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("fit --config " + run), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "observed_vs_fitted.csv"));
  EXPECT_EQ(run_cli("fit --config " + (dir / "capped.json").string() + " --out " + (dir / "capped").string()), 2);
  EXPECT_EQ(run_cli("fit --config " + (dir / "broken.json").string()), 1);
  EXPECT_EQ(run_cli("fit --config " + run + " --input /nonexistent/idr.csv"), 1);
  EXPECT_EQ(run_cli("fit --config " + run + " --links nu=cubic"), 1);
  EXPECT_EQ(run_cli("bogus"), 1);
  EXPECT_EQ(run_cli("simulate --config " + run + " --out " + (dir / "sim").string()), 0);
  EXPECT_EQ(run_cli("fit --config " + run + " --input " + (dir / "sim" / "idr.csv").string() + " --out " +
                    (dir / "refit").string()),
            0);
  EXPECT_EQ(slurp(dir / "out" / "observed_vs_fitted.csv"), slurp(dir / "refit" / "observed_vs_fitted.csv"));
}
