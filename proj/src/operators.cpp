// operators.cpp
#include "bosecool/operators.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace bosecool {

namespace {

std::optional<int> combine_add(std::optional<int> a, std::optional<int> b) {
  if (a && b && *a == *b) return a;
  return std::nullopt;
}

std::optional<int> combine_mul(std::optional<int> a, std::optional<int> b) {
  if (a && b) return *a + *b;
  return std::nullopt;
}

}  // namespace

SparseOperator::SparseOperator(const TruncatedBasis& basis, std::string name,
                               std::optional<int> shell_shift, SparseMat m)
    : basis_(&basis), name_(std::move(name)), shift_(shell_shift), mat_(std::move(m)) {
  if (mat_.rows() != basis.dim || mat_.cols() != basis.dim)
    throw std::invalid_argument("SparseOperator: matrix does not match basis dimension");
}

SparseOperator SparseOperator::adjoint() const {
  SparseMat m = mat_.adjoint();
  std::optional<int> s = shift_ ? std::optional<int>(-*shift_) : std::nullopt;
  return SparseOperator(*basis_, name_ + "^dag", s, std::move(m));
}

SparseOperator SparseOperator::scaled(cplx factor) const {
  SparseMat m = mat_ * factor;
  return SparseOperator(*basis_, name_, shift_, std::move(m));
}

SparseOperator SparseOperator::operator*(const SparseOperator& o) const {
  SparseMat m = mat_ * o.mat_;
  return SparseOperator(*basis_, name_ + "*" + o.name_, combine_mul(shift_, o.shift_),
                        std::move(m));
}

SparseOperator SparseOperator::operator+(const SparseOperator& o) const {
  SparseMat m = mat_ + o.mat_;
  return SparseOperator(*basis_, name_ + "+" + o.name_, combine_add(shift_, o.shift_),
                        std::move(m));
}

SparseOperator SparseOperator::operator-(const SparseOperator& o) const {
  SparseMat m = mat_ - o.mat_;
  return SparseOperator(*basis_, name_ + "-" + o.name_, combine_add(shift_, o.shift_),
                        std::move(m));
}

double SparseOperator::max_abs() const {
  double r = 0;
  for (int k = 0; k < mat_.outerSize(); ++k)
    for (SparseMat::InnerIterator it(mat_, k); it; ++it)
      r = std::max(r, std::abs(it.value()));
  return r;
}

double SparseOperator::guard_band_max_abs(int max_col_shell) const {
  double r = 0;
  for (int k = 0; k < mat_.outerSize(); ++k) {
    if (basis_->shell_of(k) > max_col_shell) continue;
    for (SparseMat::InnerIterator it(mat_, k); it; ++it)
      r = std::max(r, std::abs(it.value()));
  }
  return r;
}

double SparseOperator::shell_structure_residual() const {
  if (!shift_) return 0;
  double r = 0;
  for (int k = 0; k < mat_.outerSize(); ++k)
    for (SparseMat::InnerIterator it(mat_, k); it; ++it)
      if (basis_->shell_of(static_cast<int>(it.row())) - basis_->shell_of(k) != *shift_)
        r = std::max(r, std::abs(it.value()));
  return r;
}

Eigen::MatrixXd SparseOperator::dense_block(int from_shell) const {
  if (!shift_) throw std::logic_error("dense_block: operator has no single shell shift");
  if (from_shell < 0 || from_shell > basis_->L_max)
    throw std::invalid_argument("dense_block: shell out of range");
  int to_shell = from_shell + *shift_;
  const EnergyShell& src = basis_->shells[from_shell];
  if (to_shell < 0 || to_shell > basis_->L_max)
    return Eigen::MatrixXd::Zero(0, src.dim());
  const EnergyShell& dst = basis_->shells[to_shell];
  Eigen::MatrixXd block = Eigen::MatrixXd::Zero(dst.dim(), src.dim());
  for (int j = 0; j < src.dim(); ++j) {
    int col = src.offset + j;
    for (SparseMat::InnerIterator it(mat_, col); it; ++it) {
      int row = static_cast<int>(it.row());
      if (row >= dst.offset && row < dst.offset + dst.dim())
        block(row - dst.offset, j) = it.value().real();
    }
  }
  return block;
}

SparseOperator identity_op(const TruncatedBasis& basis) {
  SparseMat m(basis.dim, basis.dim);
  m.setIdentity();
  return SparseOperator(basis, "1", 0, std::move(m));
}

SparseOperator bilinear(const TruncatedBasis& basis, int n, int m) {
  if (n < 0 || m < 0) throw std::invalid_argument("bilinear: negative level");
  std::vector<Eigen::Triplet<cplx>> trips;
  for (int col = 0; col < basis.dim; ++col) {
    const OccupationState& src = basis.state(col);
    int nu_m = src.occupation(m);
    if (nu_m == 0) continue;
    OccupationState dst = src;
    if (static_cast<int>(dst.nu.size()) <= std::max(n, m)) dst.nu.resize(std::max(n, m) + 1, 0);
    dst.nu[m] -= 1;
    dst.nu[n] += 1;
    int row = basis.find(dst);
    if (row < 0) continue;  // raised past the cutoff
    long long prod = static_cast<long long>(nu_m) * (n == m ? nu_m : src.occupation(n) + 1);
    trips.emplace_back(row, col, cplx(std::sqrt(static_cast<double>(prod)), 0.0));
  }
  SparseMat mat(basis.dim, basis.dim);
  mat.setFromTriplets(trips.begin(), trips.end());
  return SparseOperator(basis, "a+_" + std::to_string(n) + "a_" + std::to_string(m),
                        n - m, std::move(mat));
}

SparseOperator build_A(const TruncatedBasis& basis) {
  SparseMat acc(basis.dim, basis.dim);
  for (int n = 0; n + 1 <= basis.L_max; ++n)
    acc += (std::sqrt(n + 1.0) * bilinear(basis, n, n + 1).mat()).eval();
  acc *= 1.0 / std::sqrt(static_cast<double>(basis.N));
  return SparseOperator(basis, "A", -1, std::move(acc));
}

SparseOperator build_B(const TruncatedBasis& basis) {
  SparseMat acc(basis.dim, basis.dim);
  for (int n = 0; n + 2 <= basis.L_max; ++n)
    acc += (std::sqrt((n + 1.0) * (n + 2.0)) * bilinear(basis, n, n + 2).mat()).eval();
  acc *= 1.0 / std::sqrt(static_cast<double>(basis.N));
  return SparseOperator(basis, "B", -2, std::move(acc));
}

SparseOperator build_C(const TruncatedBasis& basis) {
  SparseMat acc(basis.dim, basis.dim);
  for (int n = 0; n + 1 <= basis.L_max; ++n)
    acc += (std::pow(n + 1.0, 1.5) * bilinear(basis, n, n + 1).mat()).eval();
  acc *= 1.0 / (2.0 * std::sqrt(static_cast<double>(basis.N)));
  return SparseOperator(basis, "C", -1, std::move(acc));
}

SparseOperator build_E(const TruncatedBasis& basis) {
  SparseMat acc(basis.dim, basis.dim);
  for (int n = 1; n <= basis.L_max; ++n)
    acc += (static_cast<double>(n) * bilinear(basis, n, n).mat()).eval();
  return SparseOperator(basis, "E", 0, std::move(acc));
}

SparseOperator build_D(const TruncatedBasis& basis) {
  SparseOperator A = build_A(basis);
  SparseOperator D = build_B(basis) - (A * A).scaled(1.0 / std::sqrt(static_cast<double>(basis.N)));
  D.set_name("D");
  return D;
}

SparseOperator commutator(const SparseOperator& x, const SparseOperator& y) {
  SparseOperator c = x * y - y * x;
  c.set_name("[" + x.name() + "," + y.name() + "]");
  return c;
}

AlgebraReport check_algebra(const TruncatedBasis& basis) {
  if (basis.L_max < 4)
    throw std::invalid_argument("check_algebra: L_max >= 4 required (guard band empty)");
  auto t0 = std::chrono::steady_clock::now();

  const double rootN = std::sqrt(static_cast<double>(basis.N));
  const double N = static_cast<double>(basis.N);
  SparseOperator A = build_A(basis), B = build_B(basis), C = build_C(basis);
  SparseOperator E = build_E(basis), D = build_D(basis), I = identity_op(basis);
  SparseOperator Ad = A.adjoint(), Bd = B.adjoint(), Cd = C.adjoint(), Dd = D.adjoint();

  AlgebraReport report;
  report.N = basis.N;
  report.L_max = basis.L_max;
  report.guard_shell = basis.L_max - 2;

  auto add = [&](const std::string& name, const SparseOperator& residual) {
    report.relations.push_back({name, residual.guard_band_max_abs(report.guard_shell)});
  };

  add("[A,A^dag] = 1", commutator(A, Ad) - I);
  add("[A,B] = 0", commutator(A, B));
  add("[A,C] = B/(2 sqrt N)", commutator(A, C) - B.scaled(1.0 / (2.0 * rootN)));
  add("[A,B^dag] = 2 A^dag/sqrt N", commutator(A, Bd) - Ad.scaled(2.0 / rootN));
  add("[A,C^dag] = E/N + 1/2", commutator(A, Cd) - (E.scaled(1.0 / N) + I.scaled(0.5)));
  add("[B,B^dag] = 4E/N + 2", commutator(B, Bd) - (E.scaled(4.0 / N) + I.scaled(2.0)));
  add("[B,E] = 2B", commutator(B, E) - B.scaled(2.0));
  add("[C,E] = C", commutator(C, E) - C);
  add("[A,E] = A", commutator(A, E) - A);
  add("[D,A] = 0", commutator(D, A));
  add("[D,A^dag] = 0", commutator(D, Ad));
  add("[D,D^dag] = 4(E - A^dag A)/N + 2(1 - 1/N)",
      commutator(D, Dd) -
          ((E - Ad * A).scaled(4.0 / N) + I.scaled(2.0 * (1.0 - 1.0 / N))));

  for (const auto& rel : report.relations)
    report.max_residual = std::max(report.max_residual, rel.residual);
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

void write_operator_dump(const SparseOperator& op, std::ostream& os) {
  os << "# op=" << op.name() << " N=" << op.basis().N << " Lmax=" << op.basis().L_max
     << "\n";
  struct Entry {
    int row, col;
    cplx v;
  };
  std::vector<Entry> entries;
  const SparseMat& m = op.mat();
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMat::InnerIterator it(m, k); it; ++it)
      if (it.value() != cplx(0.0, 0.0))
        entries.push_back({static_cast<int>(it.row()), static_cast<int>(it.col()), it.value()});
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  char buf[96];
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof buf, "%d %d %.17g %.17g", e.row, e.col, e.v.real(),
                  e.v.imag());
    os << buf << "\n";
  }
}

}  // namespace bosecool
