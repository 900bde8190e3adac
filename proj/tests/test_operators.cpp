// test_operators.cpp -- sparse collective operators and the algebra checker
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "bosecool/fock_basis.hpp"
#include "bosecool/operators.hpp"

using namespace bosecool;

namespace {

Eigen::VectorXcd column(const SparseOperator& op, int j) {
  return Eigen::MatrixXcd(op.mat()).col(j);
}

}  // namespace

TEST_CASE("bilinear matrix elements carry the bosonic factors") {
  const TruncatedBasis basis = build_basis(2, 4);
  const SparseOperator hop = bilinear(basis, 0, 1);  // a0^dag a1
  const int from = basis.find(OccupationState{{1, 1}});
  const int to = basis.find(OccupationState{{2}});
  REQUIRE(from >= 0);
  REQUIRE(to >= 0);
  // sqrt(nu_1 (nu_0 + 1)) = sqrt(1 * 2)
  CHECK(std::abs(column(hop, from)(to) - std::sqrt(2.0)) < 1e-15);
}

TEST_CASE("collective operators act as expected on small states") {
  const TruncatedBasis basis = build_basis(2, 4);
  const SparseOperator A = build_A(basis);
  const SparseOperator B = build_B(basis);
  const SparseOperator E = build_E(basis);

  const int i11 = basis.find(OccupationState{{1, 1}});
  const int i20 = basis.find(OccupationState{{2}});
  const int i101 = basis.find(OccupationState{{1, 0, 1}});

  Eigen::VectorXcd a11 = column(A, i11);
  CHECK(std::abs(a11(i20) - 1.0) < 1e-15);
  CHECK(a11.cwiseAbs().sum() == doctest::Approx(1.0).epsilon(1e-14));

  Eigen::VectorXcd b101 = column(B, i101);
  CHECK(std::abs(b101(i20) - std::sqrt(2.0)) < 1e-15);

  // E is diagonal with the shell energy.
  for (int j = 0; j < basis.dim; ++j) {
    Eigen::VectorXcd e = column(E, j);
    CHECK(std::abs(e(j) - double(basis.shell_of(j))) < 1e-15);
    CHECK(e.cwiseAbs().sum() ==
          doctest::Approx(double(basis.shell_of(j))).epsilon(1e-14));
  }
}

TEST_CASE("operators respect their shell shifts") {
  const TruncatedBasis basis = build_basis(3, 6);
  for (const SparseOperator& op :
       {build_A(basis), build_B(basis), build_C(basis), build_D(basis),
        build_E(basis)}) {
    CHECK(op.shell_structure_residual() == 0.0);
  }
  CHECK(build_A(basis).shell_shift() == -1);
  CHECK(build_B(basis).shell_shift() == -2);
  CHECK(build_C(basis).shell_shift() == -1);
  CHECK(build_D(basis).shell_shift() == -2);
  CHECK(build_E(basis).shell_shift() == 0);
}

TEST_CASE("adjoint matches the matrix adjoint") {
  const TruncatedBasis basis = build_basis(3, 6);
  const SparseOperator A = build_A(basis);
  const Eigen::MatrixXcd diff =
      Eigen::MatrixXcd(A.adjoint().mat()) -
      Eigen::MatrixXcd(A.mat()).adjoint();
  CHECK(diff.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("algebra checker needs a guard band and accepts N=1") {
  CHECK_THROWS_AS(check_algebra(build_basis(3, 2)), std::invalid_argument);
  CHECK_THROWS_AS(check_algebra(build_basis(3, 3)), std::invalid_argument);
  const AlgebraReport rep = check_algebra(build_basis(1, 8));
  CHECK(rep.relations.size() >= 11);
  CHECK(rep.max_residual < 1e-10);
}

TEST_CASE("operator dumps are deterministic") {
  const TruncatedBasis basis = build_basis(2, 5);
  const SparseOperator A = build_A(basis);
  std::ostringstream s1, s2;
  write_operator_dump(A, s1);
  write_operator_dump(A, s2);
  CHECK(s1.str() == s2.str());
  CHECK(s1.str().rfind("# op=A", 0) == 0);
}
