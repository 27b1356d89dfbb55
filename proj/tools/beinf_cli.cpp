// beinf: fit, simulate and compare-links front end.
//
//   beinf fit --config run.json [--input data.csv] [--out dir] [--seed n] [--links mu=logit,...]
//   beinf simulate --config run.json [--out dir] [--seed n]
//   beinf compare-links --config run.json [--links nu=log,tau=log --links nu=identity,tau=identity]
//
// Exit codes: 0 success, 1 I/O or validation error, 2 fit did not converge.

#include <beinf/report.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

struct Options {
  std::string config;
  std::string input;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> links;
};

void add_common(CLI::App* cmd, Options& o, bool with_input, bool with_links, bool repeat_links) {
  cmd->add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
  if (with_input) cmd->add_option("--input", o.input, "CSV data (claim or IDR schema); replaces the simulator");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--seed", o.seed, "random seed");
  if (with_links) {
    auto* opt = cmd->add_option("--links", o.links, "links, e.g. mu=logit,sigma=logit,nu=log,tau=log");
    if (!repeat_links) opt->expected(1);
  }
}

beinf::report::RunConfig resolve(const Options& o) {
  beinf::report::RunConfig cfg;
  if (!o.config.empty()) cfg = beinf::report::load_config(o.config);
  if (!o.input.empty()) {
    cfg.input = o.input;
    cfg.simulate.reset();
  }
  if (!o.out.empty()) cfg.out = o.out;
  if (o.seed) cfg.seed = *o.seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BEINF regression of reimbursement ratios under deductibles"};
  app.set_version_flag("--version", std::string(beinf::report::kVersion));
  app.require_subcommand(1);

  Options fit_opts, sim_opts, cmp_opts;
  auto* fit_cmd = app.add_subcommand("fit", "fit the model and write observed-vs-fitted reports");
  add_common(fit_cmd, fit_opts, true, true, false);
  auto* sim_cmd = app.add_subcommand("simulate", "write a synthetic claim / IDR dataset");
  add_common(sim_cmd, sim_opts, false, false, false);
  auto* cmp_cmd = app.add_subcommand("compare-links", "rank candidate link sets by AIC");
  add_common(cmp_cmd, cmp_opts, true, true, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : beinf::report::kExitError;
  }

  try {
    if (fit_cmd->parsed()) {
      auto cfg = resolve(fit_opts);
      if (!fit_opts.links.empty()) {
        const auto links = beinf::report::parse_link_set(fit_opts.links.front(), beinf::report::links_of(cfg.model));
        for (std::size_t k = 0; k < beinf::kNumParams; ++k) cfg.model.params[k].link = links[k];
      }
      const auto run = beinf::report::run_fit(cfg, std::cerr);
      std::cout << beinf::report::observed_fitted_text(run.table);
      return run.exit_code;
    }
    if (sim_cmd->parsed()) return beinf::report::run_simulate(resolve(sim_opts), std::cerr);

    auto cfg = resolve(cmp_opts);
    if (!cmp_opts.links.empty()) {
      cfg.candidates.clear();
      for (const auto& l : cmp_opts.links) {
        cfg.candidates.push_back(beinf::report::parse_link_set(l, beinf::report::links_of(cfg.model)));
      }
    }
    const auto run = beinf::report::run_compare_links(cfg, std::cerr);
    std::cout << beinf::report::comparison_csv(run.rows);
    return run.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return beinf::report::kExitError;
  }
}
