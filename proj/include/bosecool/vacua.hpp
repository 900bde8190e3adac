// vacua.hpp -- dark-state classification: kernels of A, quasi-stationary families, ladders
#pragma once

#include <compare>
#include <string>
#include <vector>

#include "bosecool/operators.hpp"

namespace bosecool {

// Label (l, s, v): shell l, depth s in the raising chain, family index v >= 1
// within the degenerate set sharing (l, s).
struct VacuumLabel {
  int l = 0;
  int s = 0;
  int v = 1;
  auto operator<=>(const VacuumLabel&) const = default;
  std::string str() const;  // "l.s.v"
};

struct VacuumState {
  VacuumLabel label;
  int base_m = 0;  // shell of the depth-0 ancestor (= l - 2s)
  int base_v = 1;
  Eigen::VectorXd coeffs;       // over shell l in canonical order
  double ddag_d_numeric = 0.0;  // <D'D> evaluated on this vector
};

struct ShellCensus {
  int l = 0;
  long long p = 0;        // shell dimension
  int n_vacua = 0;        // dim ker A restricted to the shell
  int n_new_families = 0; // dim (ker A intersect ker D) on the shell
};

struct VacuumTable {
  int N = 0;
  int L_max = 0;
  std::vector<VacuumState> vacua;  // sorted by (l, s, v)
  std::vector<ShellCensus> census; // l = 0..L_max
  const VacuumState* find(VacuumLabel label) const;
  std::vector<VacuumLabel> labels() const;
};

// Orthonormal basis of ker(A restricted to shell l), columns over the shell's
// canonical order. SVD rank cut at 1e-10 relative; singular values falling in
// the ambiguous band (1e-12, 1e-8) relative abort instead of guessing.
Eigen::MatrixXd kernel_of_A(const TruncatedBasis& basis, const SparseOperator& A,
                            int l);

// Full classification: base families from ker A intersect ker D per shell,
// deterministic family order and sign convention, depth-s members built by
// repeated application of D' with normalization. Verifies the census
// identities and cross-family orthonormality, throwing invariant_violation.
VacuumTable classify_vacua(const TruncatedBasis& basis, const SparseOperator& A,
                           const SparseOperator& D);

// Coefficient vector (canonical order, shell l, normalized, coefficient of
// the two-level ket positive) of the depth-0 state obtained from the
// two-mode recurrence. Valid for l = 0 or 2 <= l <= N.
Eigen::VectorXd closed_form_vacuum(int N, int l);

// Orthonormal chain |k> = (A')^k |0_w> / sqrt(k!), embedded in the full basis.
struct SubspaceLadder {
  VacuumLabel label;
  int k_max = 0;
  Eigen::MatrixXd states;  // basis dim x (k_max + 1)
};

SubspaceLadder build_ladder(const TruncatedBasis& basis,
                            const SparseOperator& Adag, const VacuumState& vac,
                            int k_max);

// All ladders of a table, each raised to the cutoff (k_max = L_max - l),
// with the stacked isometry U and per-ladder column offsets.
struct LadderSet {
  const TruncatedBasis* basis = nullptr;
  std::vector<VacuumLabel> labels;
  std::vector<SubspaceLadder> ladders;
  Eigen::MatrixXd U;            // basis dim x total columns
  Eigen::MatrixXcd Uc;          // same, complex view for mixed products
  std::vector<int> offset;      // column offset of ladder i in U
  int index_of(VacuumLabel label) const;  // -1 if absent
  int pos(int ladder, int k) const { return offset[ladder] + k; }
  int total_cols() const { return static_cast<int>(U.cols()); }
};

LadderSet build_ladders(const TruncatedBasis& basis, const VacuumTable& table,
                        const SparseOperator& Adag);

}  // namespace bosecool
