// coarse_dynamics.hpp -- slow-channel rate equations over the ladder labels
#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "bosecool/bath_rates.hpp"
#include "bosecool/vacua.hpp"

namespace bosecool {

struct CollectiveOps;  // defined in liouville.hpp

// Closed form of the coupling f_w tying label (l, s, v) to (l-2, s-1, v):
// f^2 = (2 - 2/N) s + 4 ((l - 2s) s + s (s - 1)) / N. Independent of v.
double f_closed(int l, int s, int N);

// Couplings for every label of a table: f(i) lowers label i, f_up(i) lowers
// the label two shells above it (zero when that label falls outside the
// cutoff, which terminates the chain).
struct FTable {
  int N = 0;
  int L_max = 0;
  std::vector<VacuumLabel> labels;
  Eigen::VectorXd f;
  Eigen::VectorXd f_up;
  int index_of(VacuumLabel label) const;  // -1 if absent
  int up(int i) const { return up_[i]; }      // index of (l+2, s+1, v), -1 past cutoff
  int down(int i) const { return down_[i]; }  // index of (l-2, s-1, v), -1 if s = 0
  std::vector<int> up_, down_;
};

FTable build_ftable(const VacuumTable& table);

// |<0_{l-2,s-1,v}| B |0_{l,s,v}>| from the sparse operator; 0 when s = 0.
double f_numeric(const TruncatedBasis& basis, const SparseOperator& B,
                 const VacuumTable& table, VacuumLabel label);

// Coarse state: one weight per ladder plus one cross-ladder coherence
// amplitude per unordered pair (the within-ladder distribution is slaved to
// the thermal profile and carries no slow information).
struct CoarseState {
  std::vector<VacuumLabel> labels;
  Eigen::VectorXd n;    // ladder weights
  Eigen::MatrixXcd r;   // Hermitian, zero diagonal; r(i, j) pairs ladder i with j
  double total() const { return n.sum(); }
};

// Contract a density matrix onto the coarse variables: n_i sums the diagonal
// of ladder i, r_ij sums the equal-k cross terms. residual (optional) is the
// trace mass missed by the ladder frame (nonzero only off the invariant
// subspace; the frame is complete, so it measures numerical leakage).
CoarseState project(const LadderSet& ladders, const Eigen::MatrixXcd& rho,
                    double* residual = nullptr);

// Embed a coarse state as a density matrix with geometric profile q along
// every ladder. If the profile mass dropped past the cutoffs exceeds
// tail_tol, throws numerical_failure.
Eigen::MatrixXcd lift(const LadderSet& ladders, const CoarseState& cs, double q,
                      double tail_tol = 1e-10);

// One term of an operator image in the ladder-resolved basis |k, w>.
struct LadderTerm {
  VacuumLabel label;
  int k = 0;
  double coeff = 0;
};

// Closed-form action of the two-quantum lowering operator on |k, w>.
std::vector<LadderTerm> apply_B_ladder(const FTable& ft, VacuumLabel w, int k);

// Action of the anharmonic one-quantum operator on |k, w>: shell l-2 part via
// f, shell l-1 cross couplings looked up numerically from the depth-0 row,
// within-ladder lowering with the closed-form k-dependence.
std::vector<LadderTerm> apply_C_ladder(const TruncatedBasis& basis,
                                       const SparseOperator& C,
                                       const VacuumTable& table,
                                       const FTable& ft, VacuumLabel w, int k);

// Generator of the ladder-weight rate equations, columns indexed like
// ft.labels: dn/dt = G n.
Eigen::MatrixXd population_generator(const FTable& ft, const RateSet& rates);

// Generator of the pair-coherence equations dr/dt = G r, plus its split into
// a detailed-balance hopping part and a negative diagonal remainder.
struct CoherenceGenerator {
  std::vector<std::pair<int, int>> pairs;  // (i, j), i < j, label indices
  Eigen::MatrixXd full;
  Eigen::MatrixXd db;
  Eigen::MatrixXd neg;
  int pair_index(int i, int j) const;  // -1 if absent
};

CoherenceGenerator coherence_generator(const FTable& ft, const RateSet& rates);

struct CoarseTrajectory {
  std::vector<VacuumLabel> labels;
  std::vector<double> times;
  Eigen::MatrixXd n;                  // times x labels
  std::vector<Eigen::MatrixXcd> r;    // coherence matrix per sample
};

// Integrate the coarse equations, recording at the given times (strictly
// increasing, first >= 0). dt_target 0 picks 0.02 / max diagonal rate.
CoarseTrajectory evolve_coarse(const FTable& ft, const RateSet& rates,
                               const CoarseState& cs0,
                               const std::vector<double>& sample_times,
                               double dt_target = 0);

// Stationary weights: mass is conserved family by family (fixed l - 2s and
// v), distributed within each family proportional to exp(-2 beta_e_prime s)
// over the labels inside the cutoff.
Eigen::VectorXd stationary_populations(const FTable& ft, const RateSet& rates,
                                       const CoarseState& cs0);

// Random physical coarse state (weights and coherences from a random PSD
// matrix with unit trace).
CoarseState random_coarse_state(const std::vector<VacuumLabel>& labels,
                                std::mt19937_64& rng);

// Max coarse-variable drift produced by the cross channel on lifted coarse
// states: draws random states supported on labels with l <= l_cap, lifts
// them with the thermal profile, applies the cross channel, projects back.
// The result should vanish to truncation accuracy.
double check_L11_vanishes(const TruncatedBasis& basis, const CollectiveOps& ops,
                          const LadderSet& ladders, const RateSet& rates,
                          double eta, int n_draws, std::uint64_t seed,
                          int l_cap);

}  // namespace bosecool
