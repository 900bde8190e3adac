// operators.hpp -- sparse second-quantized operators on the truncated shell basis
#pragma once

#include <complex>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "bosecool/fock_basis.hpp"

namespace bosecool {

using cplx = std::complex<double>;
using SparseMat = Eigen::SparseMatrix<cplx>;

// A sparse operator together with its energy-shell bookkeeping: an operator of
// shift d maps shell l into shell l+d. Mixed-shift sums carry no shift.
class SparseOperator {
 public:
  SparseOperator() = default;
  SparseOperator(const TruncatedBasis& basis, std::string name,
                 std::optional<int> shell_shift, SparseMat m);

  const std::string& name() const { return name_; }
  void set_name(std::string n) { name_ = std::move(n); }
  std::optional<int> shell_shift() const { return shift_; }
  const SparseMat& mat() const { return mat_; }
  const TruncatedBasis& basis() const { return *basis_; }
  int dim() const { return static_cast<int>(mat_.rows()); }

  SparseOperator adjoint() const;
  SparseOperator scaled(cplx factor) const;
  SparseOperator operator*(const SparseOperator&) const;
  SparseOperator operator+(const SparseOperator&) const;
  SparseOperator operator-(const SparseOperator&) const;

  double max_abs() const;
  // Largest |entry| over columns whose shell is <= max_col_shell.
  double guard_band_max_abs(int max_col_shell) const;
  // Largest |entry| sitting outside the declared shell shift (0 if no shift).
  double shell_structure_residual() const;
  // Dense block mapping shell `from_shell` into shell `from_shell + shift`,
  // real part (all generator entries are real by construction). The block has
  // zero rows when the target shell does not exist.
  Eigen::MatrixXd dense_block(int from_shell) const;

 private:
  const TruncatedBasis* basis_ = nullptr;
  std::string name_;
  std::optional<int> shift_;
  SparseMat mat_;
};

SparseOperator identity_op(const TruncatedBasis&);
// a^dag_n a_m with matrix element sqrt(nu_m (nu_n + 1)) on each occupied source.
SparseOperator bilinear(const TruncatedBasis&, int n, int m);

SparseOperator build_A(const TruncatedBasis&);  // (1/sqrt N) sum sqrt(n+1) a+_n a_{n+1}
SparseOperator build_B(const TruncatedBasis&);  // (1/sqrt N) sum sqrt((n+1)(n+2)) a+_n a_{n+2}
SparseOperator build_C(const TruncatedBasis&);  // (1/2 sqrt N) sum (n+1)^{3/2} a+_n a_{n+1}
SparseOperator build_E(const TruncatedBasis&);  // sum n a+_n a_n
SparseOperator build_D(const TruncatedBasis&);  // B - A^2/sqrt(N)

SparseOperator commutator(const SparseOperator&, const SparseOperator&);

struct AlgebraRelation {
  std::string name;
  double residual = 0;
};

struct AlgebraReport {
  int N = 0;
  int L_max = 0;
  int guard_shell = 0;  // residuals measured on columns with shell <= guard_shell
  double max_residual = 0;
  double seconds = 0;
  std::vector<AlgebraRelation> relations;
};

// Verifies the closed commutator algebra of A, B, C, D, E on the guard band
// l <= L_max - 2. Requires L_max >= 4.
AlgebraReport check_algebra(const TruncatedBasis&);

// Text dump: "# op=<name> N=<N> Lmax=<L>" header, then one "row col re im"
// line per entry, sorted by (row, col).
void write_operator_dump(const SparseOperator&, std::ostream&);

}  // namespace bosecool
