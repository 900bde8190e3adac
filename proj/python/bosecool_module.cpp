// bosecool_module.cpp -- python bindings for the main operations
#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <Eigen/Eigenvalues>

#include "bosecool/bath_rates.hpp"
#include "bosecool/coarse_dynamics.hpp"
#include "bosecool/experiments.hpp"
#include "bosecool/fock_basis.hpp"
#include "bosecool/liouville.hpp"
#include "bosecool/operators.hpp"
#include "bosecool/vacua.hpp"

namespace py = pybind11;
using namespace bosecool;

namespace {

RunConfig config_from_str(const std::string& text) {
  return parse_config(nlohmann::json::parse(text));
}

Eigen::MatrixXcd operator_matrix(const std::string& name, int N, int L_max) {
  const TruncatedBasis basis = build_basis(N, L_max);
  SparseOperator op;
  if (name == "A")
    op = build_A(basis);
  else if (name == "B")
    op = build_B(basis);
  else if (name == "C")
    op = build_C(basis);
  else if (name == "D")
    op = build_D(basis);
  else if (name == "E")
    op = build_E(basis);
  else
    throw std::invalid_argument("unknown operator '" + name +
                                "' (expected A, B, C, D, or E)");
  return Eigen::MatrixXcd(op.mat());
}

py::dict algebra_residuals(int N, int L_max) {
  const TruncatedBasis basis = build_basis(N, L_max);
  const AlgebraReport report = check_algebra(basis);
  py::dict out;
  for (const auto& rel : report.relations) out[rel.name.c_str()] = rel.residual;
  return out;
}

std::vector<std::string> vacuum_labels(int N, int L_max) {
  const TruncatedBasis basis = build_basis(N, L_max);
  const SparseOperator A = build_A(basis);
  const VacuumTable table = classify_vacua(basis, A, build_D(basis));
  std::vector<std::string> out;
  for (const auto& vac : table.vacua) out.push_back(vac.label.str());
  return out;
}

std::string vacuum_table_str(const std::string& config_text) {
  const auto ws = build_workspace(config_from_str(config_text));
  return vacuum_table_report(*ws).dump(2);
}

py::dict rates_dict(double gamma_down_target, double eta, double beta_hw,
                    double beta_mu, int N, const std::string& dispersion) {
  const BathSpec bath = bath_from_target(gamma_down_target, eta, beta_hw,
                                         beta_mu, N,
                                         dispersion_from_string(dispersion));
  const RateSet r = compute_rates(bath);
  py::dict out;
  out["gamma_down"] = r.gamma_down;
  out["gamma_up"] = r.gamma_up;
  out["gamma1_down"] = r.gamma1_down;
  out["gamma1_up"] = r.gamma1_up;
  out["beta_e"] = r.beta_e;
  out["beta_e_prime"] = r.beta_e_prime;
  out["kappa_scale"] = bath.kappa_scale;
  return out;
}

py::tuple evolve_populations(const std::string& config_text) {
  const RunConfig cfg = config_from_str(config_text);
  const auto ws = build_workspace(cfg);
  const Trajectory traj = evolve(ws->basis, ws->ops, ws->bath, ws->rates,
                                 evolution_config(cfg), initial_density(*ws, cfg),
                                 ws->ladders);
  std::vector<double> times;
  std::vector<std::string> labels;
  for (const auto& w : ws->ftable.labels) labels.push_back(w.str());
  Eigen::MatrixXd n(traj.samples.size(), labels.size());
  for (size_t i = 0; i < traj.samples.size(); ++i) {
    times.push_back(traj.samples[i].t);
    n.row(i) = traj.samples[i].coarse.n.transpose();
  }
  return py::make_tuple(times, labels, n);
}

py::tuple coarse_populations(const std::string& config_text) {
  const RunConfig cfg = config_from_str(config_text);
  const auto ws = build_workspace(cfg);
  const CoarseState cs0 = project(ws->ladders, initial_density(*ws, cfg));
  std::vector<double> times;
  const int nt = 201;
  for (int i = 0; i < nt; ++i) times.push_back(cfg.t_final * i / (nt - 1));
  const CoarseTrajectory traj = evolve_coarse(ws->ftable, ws->rates, cs0, times);
  std::vector<std::string> labels;
  for (const auto& w : traj.labels) labels.push_back(w.str());
  return py::make_tuple(traj.times, labels, Eigen::MatrixXd(traj.n));
}

Eigen::VectorXcd coarse_spectrum(const std::string& config_text) {
  const RunConfig cfg = config_from_str(config_text);
  const auto ws = build_workspace(cfg);
  const Eigen::MatrixXd Gn = population_generator(ws->ftable, ws->rates);
  Eigen::EigenSolver<Eigen::MatrixXd> es(Gn, false);
  return es.eigenvalues();
}

}  // namespace

PYBIND11_MODULE(_bosecool, m) {
  m.doc() = "collective cooling of trapped ideal bosons";

  m.def("shell_dimension", &shell_dimension, py::arg("N"), py::arg("l"),
        "number of N-boson states with energy l");
  m.def(
      "basis_dim",
      [](int N, int L_max) { return build_basis(N, L_max).dim; },
      py::arg("N"), py::arg("L_max"));
  m.def(
      "enumerate_shell",
      [](int N, int l) {
        std::vector<std::vector<int>> out;
        for (const auto& st : enumerate_shell(N, l)) out.push_back(st.nu);
        return out;
      },
      py::arg("N"), py::arg("l"), "occupation vectors of shell l, canonical order");
  m.def("algebra_residuals", &algebra_residuals, py::arg("N"), py::arg("L_max"),
        "guard-band residual of each operator relation");
  m.def("operator_matrix", &operator_matrix, py::arg("name"), py::arg("N"),
        py::arg("L_max"), "dense matrix of a collective operator");
  m.def("vacuum_labels", &vacuum_labels, py::arg("N"), py::arg("L_max"));
  m.def("vacuum_table", &vacuum_table_str, py::arg("config_json"),
        "full dark-state table as a JSON string");
  m.def("closed_form_vacuum", &closed_form_vacuum, py::arg("N"), py::arg("l"),
        "two-mode recurrence coefficients of the shell-l seed vacuum");
  m.def("f_closed", &f_closed, py::arg("l"), py::arg("s"), py::arg("N"),
        "pair-cascade amplitude of the (l, s) dark state");
  m.def("rates", &rates_dict, py::arg("gamma_down_target"), py::arg("eta"),
        py::arg("beta_hw"), py::arg("beta_mu"), py::arg("N"),
        py::arg("dispersion") = "massive");
  m.def(
      "gamma_ld",
      [](int n, int nprime, int alpha, int order, double eta) {
        return gamma_ld(n, nprime, alpha, order, eta);
      },
      py::arg("n"), py::arg("nprime"), py::arg("alpha"), py::arg("order"),
      py::arg("eta"), "small-eta level coupling through the given order");
  m.def("gamma_exact", &gamma_exact, py::arg("n"), py::arg("nprime"),
        py::arg("k"), "unexpanded plane-wave level coupling");
  m.def("evolve_populations", &evolve_populations, py::arg("config_json"),
        "integrate the master equation; returns (times, labels, populations)");
  m.def("coarse_populations", &coarse_populations, py::arg("config_json"),
        "integrate the ladder equations; returns (times, labels, populations)");
  m.def("coarse_spectrum", &coarse_spectrum, py::arg("config_json"),
        "eigenvalues of the ladder-weight generator");
}
