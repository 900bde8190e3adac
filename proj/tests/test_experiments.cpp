// test_experiments.cpp -- config parsing, fits, driver outputs, determinism
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "bosecool/errors.hpp"
#include "bosecool/experiments.hpp"

using namespace bosecool;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const std::string& text) {
  return text.substr(0, text.find('\n'));
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::path("tmp_test_experiments") / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RunConfig tiny_config(const std::string& out_dir) {
  RunConfig cfg;
  cfg.N = 2;
  cfg.L_max = 6;
  cfg.eta = 0.1;
  // Cold enough that the thermal tail never reaches the default leak guard.
  cfg.beta_hw = 4.0;
  cfg.beta_mu = -3.0;
  cfg.l0 = true;
  cfg.l12 = false;
  cfg.t_final = 0.5;
  cfg.record_every = 10;
  cfg.initial.type = "occupation";
  cfg.initial.occupations = {0, 2};
  cfg.output_dir = out_dir;
  return cfg;
}

std::ostringstream devnull;

}  // namespace

TEST_CASE("config JSON round-trips through parse and serialize") {
  RunConfig cfg = tiny_config("somewhere");
  cfg.l12 = true;
  cfg.sweep["eta"] = {0.1, 0.2};
  const json j = config_to_json(cfg);
  const RunConfig back = parse_config(j);
  CHECK(config_to_json(back).dump() == j.dump());
  CHECK(back.N == 2);
  CHECK(back.initial.occupations == std::vector<int>{0, 2});
  CHECK(back.sweep.at("eta") == std::vector<double>{0.1, 0.2});
}

TEST_CASE("config parsing rejects malformed input") {
  const json base = config_to_json(tiny_config("."));

  json j = base;
  j["surprise"] = 1;
  CHECK_THROWS_AS(parse_config(j), std::invalid_argument);

  j = base;
  j["initial_state"]["surprise"] = 1;
  CHECK_THROWS_AS(parse_config(j), std::invalid_argument);

  j = base;
  j["terms"] = {"L0", "L5"};
  CHECK_THROWS_AS(parse_config(j), std::invalid_argument);

  j = base;
  j["N"] = 0;
  CHECK_THROWS_AS(parse_config(j), std::invalid_argument);

  j = base;
  j["beta_mu"] = 0.1;
  CHECK_THROWS_AS(parse_config(j), std::invalid_argument);

  j = base;
  j["format"] = "yaml";
  CHECK_THROWS_AS(parse_config(j), std::invalid_argument);

  j = base;
  j["record_every"] = 0;
  CHECK_THROWS_AS(parse_config(j), std::invalid_argument);

  j = base;
  j["initial_state"] = {{"type", "mystery"}};
  CHECK_THROWS_AS(parse_config(j), std::invalid_argument);

  j = base;
  j["initial_state"] = {{"type", "occupation"}, {"occupations", {0, -1}}};
  CHECK_THROWS_AS(parse_config(j), std::invalid_argument);

  j = base;
  j["sweep"] = {{"gamma", {1.0}}};
  CHECK_THROWS_AS(parse_config(j), std::invalid_argument);

  j = base;
  j["sweep"] = {{"eta", json::array()}};
  CHECK_THROWS_AS(parse_config(j), std::invalid_argument);

  j = base;
  j["N"] = "three";
  CHECK_THROWS(parse_config(j));
}

TEST_CASE("overrides reach nested keys and reject unknown ones") {
  const RunConfig cfg = load_config(
      "", {"N=2", "L_max=6", "eta=0.25", "initial_state.type=occupation",
           "initial_state.occupations=[0,2]", "output_dir=over_here"});
  CHECK(cfg.N == 2);
  CHECK(cfg.L_max == 6);
  CHECK(cfg.eta == 0.25);
  CHECK(cfg.initial.type == "occupation");
  CHECK(cfg.initial.occupations == std::vector<int>{0, 2});
  CHECK(cfg.output_dir == "over_here");

  CHECK_THROWS_AS(load_config("", {"nope=3"}), std::invalid_argument);
  CHECK_THROWS_AS(load_config("", {"missing_equals"}), std::invalid_argument);
  CHECK_THROWS_AS(load_config("does_not_exist.json", {}), std::invalid_argument);
}

TEST_CASE("exponential fit recovers a synthetic rate") {
  std::vector<double> t, y;
  for (int i = 0; i <= 100; ++i) {
    t.push_back(0.05 * i);
    y.push_back(2.0 + 3.0 * std::exp(-1.7 * 0.05 * i));
  }
  const double rate = fit_exponential_rate(t, y, 2.0, 0.2, 2.5);
  CHECK(std::abs(rate - 1.7) < 1e-8);

  // Too few points inside the window.
  CHECK(std::isnan(fit_exponential_rate(t, y, 2.0, 10.0, 20.0)));
  // Signal pinned at the asymptote carries no rate.
  std::vector<double> flat(t.size(), 2.0);
  CHECK(std::isnan(fit_exponential_rate(t, flat, 2.0, 0.2, 2.5)));
}

TEST_CASE("initial states validate against the workspace") {
  RunConfig cfg = tiny_config(".");
  const auto ws = build_workspace(cfg);

  cfg.initial.occupations = {1};  // one particle instead of two
  CHECK_THROWS_AS(initial_density(*ws, cfg), std::invalid_argument);

  cfg.initial.occupations = {0, 0, 0, 0, 0, 0, 2};  // shell 12 above the cutoff
  CHECK_THROWS_AS(initial_density(*ws, cfg), std::invalid_argument);

  cfg.initial.type = "vacuum";
  cfg.initial.label = VacuumLabel{1, 0, 1};  // no such dark state
  CHECK_THROWS_AS(initial_density(*ws, cfg), std::invalid_argument);

  cfg.initial.type = "coarse";
  cfg.initial.populations = {{"0.0.1", 0.4}, {"2.1.1", 0.4}};  // sums to 0.8
  CHECK_THROWS_AS(initial_density(*ws, cfg), std::invalid_argument);

  cfg.initial.populations = {{"0.0.1", 0.5}, {"3.0.7", 0.5}};  // unknown label
  CHECK_THROWS_AS(initial_density(*ws, cfg), std::invalid_argument);
}

TEST_CASE("evolution config mirrors the run config") {
  RunConfig cfg = tiny_config(".");
  cfg.l11 = true;
  cfg.l12 = true;
  cfg.dt = 0.004;
  cfg.leak_abort = 0.01;
  const EvolutionConfig ec = evolution_config(cfg);
  CHECK(ec.l0);
  CHECK(ec.l11);
  CHECK(ec.l12);
  CHECK(ec.dt == 0.004);
  CHECK(ec.t_final == 0.5);
  CHECK(ec.record_every == 10);
  CHECK(ec.leak_abort == 0.01);
}

TEST_CASE("vacua and rates drivers write their reports") {
  const fs::path dir = fresh_dir("reports");
  RunConfig cfg = tiny_config(dir.string());

  CHECK(run_vacua(cfg, "", devnull) == 0);
  const json vac = json::parse(read_file(dir / "vacua.json"));
  REQUIRE(vac.contains("census"));
  CHECK(vac["census"].size() == 7);
  CHECK(vac["N"] == 2);
  for (const auto& v : vac["vacua"]) {
    CHECK(v.contains("f_closed"));
    CHECK(v.contains("coefficients"));
  }

  CHECK(run_rates(cfg, "", devnull) == 0);
  const json rj = json::parse(read_file(dir / "rates.json"));
  CHECK(std::abs(rj["rates"]["gamma_down"].get<double>() - 1.0) < 1e-12);
  CHECK(std::abs(rj["ratios"]["up_over_down"].get<double>() -
                 std::exp(-rj["effective"]["beta_e"].get<double>())) < 1e-14);
}

TEST_CASE("evolve runs are byte-reproducible") {
  const fs::path dir = fresh_dir("evolve_repro");
  const RunConfig cfg = tiny_config(dir.string());

  REQUIRE(run_evolve(cfg, devnull) == 0);
  const std::string traj1 = read_file(dir / "trajectory.csv");
  const std::string sum1 = read_file(dir / "summary.json");

  REQUIRE(run_evolve(cfg, devnull) == 0);
  CHECK(read_file(dir / "trajectory.csv") == traj1);
  CHECK(read_file(dir / "summary.json") == sum1);

  const json sum = json::parse(sum1);
  CHECK(sum["aborted"] == false);
  CHECK(sum["trace_drift_total"].get<double>() < 1e-10);

  // Fixed column layout: weights per label, then coherence pairs.
  CHECK(first_line(traj1) ==
        "t,trace_drift,leak_top2,n_0.0.1,n_2.1.1,n_4.2.1,n_6.3.1,"
        "r_0.0.1__2.1.1_re,r_0.0.1__2.1.1_im,r_0.0.1__4.2.1_re,"
        "r_0.0.1__4.2.1_im,r_0.0.1__6.3.1_re,r_0.0.1__6.3.1_im,"
        "r_2.1.1__4.2.1_re,r_2.1.1__4.2.1_im,r_2.1.1__6.3.1_re,"
        "r_2.1.1__6.3.1_im,r_4.2.1__6.3.1_re,r_4.2.1__6.3.1_im");
}

TEST_CASE("coarse runs preserve family mass") {
  const fs::path dir = fresh_dir("coarse");
  RunConfig cfg = tiny_config(dir.string());
  cfg.l12 = true;
  cfg.t_final = 50.0;
  cfg.initial.type = "coarse";
  cfg.initial.populations = {{"4.2.1", 1.0}};
  REQUIRE(run_coarse(cfg, devnull) == 0);
  const json sum = json::parse(read_file(dir / "coarse_summary.json"));
  CHECK(sum["mass_drift"].get<double>() < 1e-9);
  CHECK(std::abs(sum["family_masses"]["0.1"].get<double>() - 1.0) < 1e-9);
  CHECK(fs::exists(dir / "coarse_trajectory.csv"));
}

TEST_CASE("sweeps are deterministic across worker counts") {
  const fs::path dir = fresh_dir("sweep");
  RunConfig cfg = tiny_config(dir.string());
  cfg.l12 = true;
  cfg.t_final = 1.0;
  cfg.record_every = 5;
  cfg.leak_abort = 1e-3;
  cfg.sweep["eta"] = {0.1, 0.15};

  ::setenv("BOSECOOL_WORKERS", "1", 1);
  REQUIRE(run_sweep(cfg, devnull) == 0);
  const std::string serial = read_file(dir / "sweep.csv");

  ::setenv("BOSECOOL_WORKERS", "2", 1);
  REQUIRE(run_sweep(cfg, devnull) == 0);
  ::unsetenv("BOSECOOL_WORKERS");
  CHECK(read_file(dir / "sweep.csv") == serial);

  CHECK(first_line(serial) ==
        "idx,eta,beta_hw,beta_mu,N,gamma_down,gamma_up,gamma1_down,gamma1_up,"
        "beta_e,beta_e_prime,predicted_fast,predicted_slow,fitted_fast,"
        "fitted_slow,ratio_predicted,ratio_fitted,max_abs_dn,status");
  // Header plus one row per grid point.
  CHECK(std::count(serial.begin(), serial.end(), '\n') == 3);

  RunConfig no_grid = tiny_config(dir.string());
  CHECK_THROWS_AS(run_sweep(no_grid, devnull), std::invalid_argument);
}
