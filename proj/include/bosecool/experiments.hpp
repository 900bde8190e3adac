// experiments.hpp -- run configuration, workspaces, drivers behind the CLI
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "bosecool/liouville.hpp"
#include "json.hpp"

namespace bosecool {

struct InitialStateSpec {
  std::string type = "thermal";  // occupation|vacuum|coarse|thermal|random_coarse
  std::vector<int> occupations;  // occupation: level populations from level 0
  VacuumLabel label;             // vacuum
  std::map<std::string, double> populations;  // coarse: "l.s.v" -> weight
  struct Coherence {
    std::string w, w2;
    double re = 0, im = 0;
  };
  std::vector<Coherence> coherences;  // coarse
  double beta = -1;                   // thermal: override, < 0 uses the bath value
};

struct RunConfig {
  int N = 3;
  int L_max = 8;
  double eta = 0.1;
  double beta_hw = 0.6931471805599453;
  double beta_mu = 0.0;
  std::string dispersion = "massive";
  double gamma_down_target = 1.0;
  bool l0 = true;
  bool l11 = false;
  bool l12 = false;
  bool exact_gamma = false;
  double dt = 0;
  double t_final = 10.0;
  int record_every = 10;
  InitialStateSpec initial;
  std::uint64_t seed = 12345;
  std::string output_dir = ".";
  std::string format = "csv";  // csv|json trajectory output
  double leak_abort = 1e-6;
  double positivity_abort = 1e-6;
  double tail_tol = 1e-10;
  std::map<std::string, std::vector<double>> sweep;  // eta|beta_hw|beta_mu|N
};

// Strict parse: unknown keys anywhere are rejected.
RunConfig parse_config(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& cfg);

// Load from file (file may be absent when path is empty) and apply
// key=value overrides with dotted paths; values parse as JSON first,
// falling back to strings.
RunConfig load_config(const std::string& path,
                      const std::vector<std::string>& overrides);

// Everything a run needs, built once from the configuration. Heap-allocated
// because the operators and ladders point back into the basis member.
struct Workspace {
  TruncatedBasis basis;
  CollectiveOps ops;
  VacuumTable table;
  LadderSet ladders;
  FTable ftable;
  BathSpec bath;
  RateSet rates;
};

std::unique_ptr<Workspace> build_workspace(const RunConfig& cfg);

Eigen::MatrixXcd initial_density(const Workspace& ws, const RunConfig& cfg);
EvolutionConfig evolution_config(const RunConfig& cfg);

// Least-squares exponential rate of |values - asymptote| over the window
// [t_lo, t_hi]; NaN when fewer than four usable points survive.
double fit_exponential_rate(const std::vector<double>& times,
                            const std::vector<double>& values, double asymptote,
                            double t_lo, double t_hi);

// Full-versus-coarse comparison on one configuration.
struct CompareResult {
  std::vector<VacuumLabel> labels;
  Trajectory full;
  CoarseTrajectory coarse;
  double predicted_fast = 0;   // gap of the one-quantum channel
  double predicted_slow = 0;   // gap of the ladder-weight generator
  double fitted_fast = 0;      // NaN when not fittable
  double fitted_slow = 0;
  double max_abs_dn = 0;       // max |n_full - n_coarse| over samples and labels
  Eigen::VectorXd stationary;  // coarse stationary weights from the start state
};

CompareResult compare_run(const RunConfig& cfg, const Workspace& ws);

// JSON export of a vacuum table: census, coefficients, couplings, and the
// overlap of each depth-0 family with the two-mode closed form.
nlohmann::json vacuum_table_report(const Workspace& ws);

// Drivers behind the CLI subcommands; they write files under cfg.output_dir
// and human-readable progress to log. Return value is the process exit code.
int run_check_algebra(const RunConfig& cfg, const std::string& dump_dir,
                      std::ostream& log);
int run_vacua(const RunConfig& cfg, const std::string& out_path,
              std::ostream& log);
int run_rates(const RunConfig& cfg, const std::string& out_path,
              std::ostream& log);
int run_evolve(const RunConfig& cfg, std::ostream& log);
int run_coarse(const RunConfig& cfg, std::ostream& log);
int run_compare(const RunConfig& cfg, std::ostream& log);
int run_sweep(const RunConfig& cfg, std::ostream& log);

}  // namespace bosecool
