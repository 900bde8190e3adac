// bosecool_main.cpp -- command line front end for the cooling toolkit
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bosecool/errors.hpp"
#include "bosecool/experiments.hpp"
#include "json.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "JSON run configuration");
  cmd->add_option("--out", opts.out_dir, "output directory (overrides config)");
  cmd->add_option("--set", opts.overrides,
                  "override a config key, e.g. --set eta=0.05 or "
                  "--set initial_state.type=thermal (repeatable)");
}

bosecool::RunConfig resolve(const CommonOpts& opts) {
  bosecool::RunConfig cfg =
      bosecool::load_config(opts.config_path, opts.overrides);
  if (!opts.out_dir.empty()) cfg.output_dir = opts.out_dir;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bosecool: collective cooling of trapped ideal bosons"};
  app.require_subcommand(1);

  CommonOpts algebra_opts, vacua_opts, rates_opts, evolve_opts, coarse_opts,
      compare_opts, sweep_opts;
  std::string dump_dir;

  CLI::App* c_algebra = app.add_subcommand(
      "check-algebra", "verify the collective operator relations");
  add_common(c_algebra, algebra_opts);
  c_algebra->add_option("--dump", dump_dir,
                        "write sparse operator dumps to this directory");

  CLI::App* c_vacua = app.add_subcommand(
      "vacua", "enumerate dark states and ladder families");
  add_common(c_vacua, vacua_opts);

  CLI::App* c_rates =
      app.add_subcommand("rates", "print and export the bath rate set");
  add_common(c_rates, rates_opts);

  CLI::App* c_evolve = app.add_subcommand(
      "evolve", "integrate the full master equation");
  add_common(c_evolve, evolve_opts);

  CLI::App* c_coarse = app.add_subcommand(
      "coarse", "integrate the coarse-grained ladder equations");
  add_common(c_coarse, coarse_opts);

  CLI::App* c_compare = app.add_subcommand(
      "compare", "run both descriptions and report deviations and timescales");
  add_common(c_compare, compare_opts);

  CLI::App* c_sweep = app.add_subcommand(
      "sweep", "scan a parameter grid, one compare run per point");
  add_common(c_sweep, sweep_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_algebra->parsed())
      return bosecool::run_check_algebra(resolve(algebra_opts), dump_dir,
                                         std::cout);
    if (c_vacua->parsed())
      return bosecool::run_vacua(resolve(vacua_opts), "", std::cout);
    if (c_rates->parsed())
      return bosecool::run_rates(resolve(rates_opts), "", std::cout);
    if (c_evolve->parsed())
      return bosecool::run_evolve(resolve(evolve_opts), std::cout);
    if (c_coarse->parsed())
      return bosecool::run_coarse(resolve(coarse_opts), std::cout);
    if (c_compare->parsed())
      return bosecool::run_compare(resolve(compare_opts), std::cout);
    if (c_sweep->parsed())
      return bosecool::run_sweep(resolve(sweep_opts), std::cout);
  } catch (const bosecool::invariant_violation& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 3;
  } catch (const bosecool::numerical_failure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
