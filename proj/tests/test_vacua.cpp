// test_vacua.cpp -- dark-state classification, closed forms, ladder isometries
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "bosecool/fock_basis.hpp"
#include "bosecool/operators.hpp"
#include "bosecool/vacua.hpp"

using namespace bosecool;

TEST_CASE("two-mode closed form at small sizes") {
  // N=2, l=2: shell order is (1,0,1), (0,2); the dark state is
  // (|0,2> - |1,0,1>)/sqrt(2) with the two-level ket taken positive.
  const Eigen::VectorXd c22 = closed_form_vacuum(2, 2);
  REQUIRE(c22.size() == 2);
  CHECK(c22(0) == doctest::Approx(-1.0 / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(c22(1) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));

  // N=3, l=2: shell order is (2,0,1), (1,2); kernel of the two-step hop.
  const Eigen::VectorXd c32 = closed_form_vacuum(3, 2);
  REQUIRE(c32.size() == 2);
  CHECK(c32(0) == doctest::Approx(-std::sqrt(2.0 / 3.0)).epsilon(1e-14));
  CHECK(c32(1) == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-14));

  CHECK(closed_form_vacuum(4, 0).size() == 1);
  CHECK(closed_form_vacuum(4, 0)(0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(closed_form_vacuum(3, 1), std::invalid_argument);
  CHECK_THROWS_AS(closed_form_vacuum(3, 4), std::invalid_argument);
}

TEST_CASE("closed forms are annihilated by the collective lowering operator") {
  for (int N : {2, 3, 4, 5}) {
    const TruncatedBasis basis = build_basis(N, N + 2);
    const SparseOperator A = build_A(basis);
    for (int l = 2; l <= N; ++l) {
      const Eigen::VectorXd c = closed_form_vacuum(N, l);
      CHECK(c.norm() == doctest::Approx(1.0).epsilon(1e-13));
      const Eigen::MatrixXd block = A.dense_block(l);
      if (block.rows() > 0) CHECK((block * c).norm() < 1e-12);
    }
  }
}

TEST_CASE("census counts match the partition-difference rule") {
  for (int N : {2, 3, 4, 6}) {
    const int L = 8;
    const TruncatedBasis basis = build_basis(N, L);
    const VacuumTable table = classify_vacua(basis, build_A(basis), build_D(basis));
    REQUIRE(int(table.census.size()) == L + 1);
    for (int l = 0; l <= L; ++l) {
      const ShellCensus& c = table.census[l];
      CHECK(c.l == l);
      CHECK(c.p == shell_dimension(N, l));
      const long long below = l >= 1 ? shell_dimension(N, l - 1) : 0;
      CHECK(c.n_vacua == c.p - below);
      const int two_below = l >= 2 ? table.census[l - 2].n_vacua : 0;
      CHECK(c.n_new_families == c.n_vacua - two_below);
    }
    // One table entry per counted vacuum.
    long long total = 0;
    for (const ShellCensus& c : table.census) total += c.n_vacua;
    CHECK(static_cast<long long>(table.vacua.size()) == total);
  }
}

TEST_CASE("classified vacua are orthonormal kernel vectors") {
  const TruncatedBasis basis = build_basis(3, 8);
  const SparseOperator A = build_A(basis);
  const VacuumTable table = classify_vacua(basis, A, build_D(basis));
  for (int l = 0; l <= basis.L_max; ++l) {
    std::vector<const VacuumState*> here;
    for (const VacuumState& v : table.vacua)
      if (v.label.l == l) here.push_back(&v);
    if (here.empty()) continue;
    Eigen::MatrixXd V(here[0]->coeffs.size(), here.size());
    for (size_t j = 0; j < here.size(); ++j) V.col(j) = here[j]->coeffs;
    const Eigen::MatrixXd gram = V.transpose() * V;
    CHECK((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols()))
              .cwiseAbs()
              .maxCoeff() < 1e-10);
    const Eigen::MatrixXd block = A.dense_block(l);
    if (block.rows() > 0) CHECK((block * V).cwiseAbs().maxCoeff() < 1e-10);
  }
  for (const VacuumState& v : table.vacua) {
    CHECK(v.base_m == v.label.l - 2 * v.label.s);
    CHECK(v.ddag_d_numeric >= -1e-12);
    if (v.label.s == 0) CHECK(v.ddag_d_numeric < 1e-12);
  }
  CHECK(table.find(VacuumLabel{2, 1, 1}) != nullptr);
  CHECK(table.find(VacuumLabel{1, 0, 1}) == nullptr);
}

TEST_CASE("ladders form an isometry that exhausts the truncated space") {
  const TruncatedBasis basis = build_basis(3, 6);
  const SparseOperator A = build_A(basis);
  const SparseOperator Adag = A.adjoint();
  const VacuumTable table = classify_vacua(basis, A, build_D(basis));
  const LadderSet ls = build_ladders(basis, table, Adag);

  CHECK(ls.total_cols() == basis.dim);
  const Eigen::MatrixXd gram = ls.U.transpose() * ls.U;
  CHECK((gram - Eigen::MatrixXd::Identity(basis.dim, basis.dim))
            .cwiseAbs()
            .maxCoeff() < 1e-9);

  // Rung relation: A^dag |k, w> = sqrt(k+1) |k+1, w>.
  const Eigen::MatrixXcd Ad = Eigen::MatrixXcd(Adag.mat());
  for (size_t w = 0; w < ls.ladders.size(); ++w) {
    const SubspaceLadder& lad = ls.ladders[w];
    CHECK(lad.k_max == basis.L_max - lad.label.l);
    for (int k = 0; k + 1 <= lad.k_max; ++k) {
      const Eigen::VectorXcd raised =
          Ad * ls.Uc.col(ls.pos(int(w), k)) -
          std::sqrt(k + 1.0) * ls.Uc.col(ls.pos(int(w), k + 1));
      CHECK(raised.cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  // index_of agrees with the stored labels.
  for (size_t w = 0; w < ls.labels.size(); ++w)
    CHECK(ls.index_of(ls.labels[w]) == int(w));
  CHECK(ls.index_of(VacuumLabel{1, 0, 1}) == -1);
}
