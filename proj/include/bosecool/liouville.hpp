// liouville.hpp -- dissipative channels, density-matrix propagation, superoperators
#pragma once

#include <string>
#include <vector>

#include "bosecool/bath_rates.hpp"
#include "bosecool/coarse_dynamics.hpp"
#include "bosecool/operators.hpp"
#include "bosecool/vacua.hpp"

namespace bosecool {

// The collective operators of one basis plus the precomputed products the
// channels need.
struct CollectiveOps {
  SparseOperator A, Adag, B, Bdag, C, Cdag, D, Ddag, E;
  SparseOperator AdA, AAd, BdB, BBd;
  SparseOperator S_down;  // C'A + A'C
  SparseOperator S_up;    // CA' + AC'
};

CollectiveOps build_collective_ops(const TruncatedBasis& basis);

// rate * (2 L rho L' - L'L rho - rho L'L)
Eigen::MatrixXcd lindblad_apply(const Eigen::MatrixXcd& rho,
                                const SparseOperator& L,
                                const SparseOperator& Ldag,
                                const SparseOperator& LdagL, double rate);

// Leading channel: one-quantum ladder jumps.
Eigen::MatrixXcd apply_L0(const Eigen::MatrixXcd& rho, const CollectiveOps& ops,
                          const RateSet& rates);

// Cross channel at the next order of the one-quantum line; c_down and c_up
// carry gamma_down * eta^2 and gamma_up * eta^2.
Eigen::MatrixXcd apply_L11(const Eigen::MatrixXcd& rho, const CollectiveOps& ops,
                           double c_down, double c_up);

// Two-quantum channel.
Eigen::MatrixXcd apply_L12(const Eigen::MatrixXcd& rho, const CollectiveOps& ops,
                           const RateSet& rates);

// Jump operators built from the unexpanded plane-wave couplings, one per
// bath line, with the rates their Lindblad terms carry.
struct ExactJumps {
  SparseOperator G1, G1dag, G1dG1, G1G1d;
  SparseOperator G2, G2dag, G2dG2, G2G2d;
  double r1_down = 0, r1_up = 0, r2_down = 0, r2_up = 0;
};

ExactJumps build_exact_jumps(const TruncatedBasis& basis, const BathSpec& bath,
                             const RateSet& rates);

struct EvolutionConfig {
  bool l0 = true;
  bool l11 = false;
  bool l12 = false;
  bool exact_gamma = false;  // replace expanded channels by plane-wave jumps
  double dt = 0;             // 0 = automatic
  double t_final = 1.0;
  int record_every = 10;     // sample every this many steps
  double leak_abort = 1e-6;        // mass in the top two shells
  double positivity_abort = 1e-6;  // most negative eigenvalue allowed
  double trace_abort_rate = 1e-6;  // per unit time
  double tail_tol = 1e-10;         // for initial-state embedding by callers
};

struct TrajectorySample {
  double t = 0;
  CoarseState coarse;
  double coarse_residual = 0;
  double qdist = 0;        // Frobenius distance to the slaved-profile embedding
  double leak_top2 = 0;
  double min_eig = 0;
  double trace_drift = 0;  // accumulated |tr - 1| absorbed by renormalization
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  Eigen::MatrixXcd final_rho;
  double dt = 0;
  long long steps = 0;
  bool aborted = false;
  std::string abort_reason;
};

// Fixed-step fourth-order propagation of the enabled channels with
// re-Hermitization and trace renormalization each step. Rejects a requested
// dt above 0.01 / (fastest enabled rate). Aborts (flagged, not thrown) on
// trace, positivity, or cutoff-leak blowup.
Trajectory evolve(const TruncatedBasis& basis, const CollectiveOps& ops,
                  const BathSpec& bath, const RateSet& rates,
                  const EvolutionConfig& cfg, const Eigen::MatrixXcd& rho0,
                  const LadderSet& ladders);

// exp(-beta_e * l) / Z on the shell diagonal.
Eigen::MatrixXcd thermal_state(const TruncatedBasis& basis, double beta_e);

Eigen::MatrixXcd pure_state(const Eigen::VectorXcd& psi);

// Dense superoperator of the enabled channels acting on vec(rho),
// column-major. Dimension capped at 40 states.
Eigen::MatrixXcd build_superoperator(const TruncatedBasis& basis,
                                     const CollectiveOps& ops,
                                     const RateSet& rates, bool l0, bool l11,
                                     bool l12, double eta);

Eigen::VectorXcd superop_spectrum(const Eigen::MatrixXcd& S);

// Sum of |M_ij| over entries whose row and column shells both stay at or
// below max_shell.
double guard_band_l1(const TruncatedBasis& basis, const Eigen::MatrixXcd& M,
                     int max_shell);

}  // namespace bosecool
