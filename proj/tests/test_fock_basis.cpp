// test_fock_basis.cpp -- shell enumeration, ordering, and basis indexing
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <vector>

#include "bosecool/fock_basis.hpp"

using namespace bosecool;

TEST_CASE("shell dimensions are restricted partition counts") {
  // p_1(l) = 1, p_2(l) = floor(l/2) + 1.
  for (int l = 0; l <= 10; ++l) {
    CHECK(shell_dimension(1, l) == 1);
    CHECK(shell_dimension(2, l) == l / 2 + 1);
  }
  CHECK(shell_dimension(6, 6) == 11);
  CHECK(shell_dimension(3, 8) == 10);
  // Large N saturates at the unrestricted partition numbers.
  const int p[] = {1, 1, 2, 3, 5, 7, 11, 15, 22};
  for (int l = 0; l <= 8; ++l) CHECK(shell_dimension(20, l) == p[l]);
}

TEST_CASE("shell enumeration is in decreasing lexicographic order") {
  const auto states = enumerate_shell(3, 4);
  REQUIRE(states.size() == 4);
  CHECK(states[0].nu == std::vector<int>{2, 0, 0, 0, 1});
  CHECK(states[1].nu == std::vector<int>{1, 1, 0, 1});
  CHECK(states[2].nu == std::vector<int>{1, 0, 2});
  CHECK(states[3].nu == std::vector<int>{0, 2, 1});
  for (const auto& st : states) {
    CHECK(st.particles() == 3);
    CHECK(st.energy() == 4);
  }
}

TEST_CASE("basis indexing round-trips and shells are contiguous") {
  const TruncatedBasis basis = build_basis(3, 8);
  CHECK(basis.dim == 41);
  int offset = 0;
  for (int l = 0; l <= 8; ++l) {
    CHECK(basis.shells[l].offset == offset);
    CHECK(basis.shells[l].dim() == shell_dimension(3, l));
    offset += basis.shells[l].dim();
  }
  CHECK(offset == basis.dim);
  for (int i = 0; i < basis.dim; ++i) {
    CHECK(basis.find(basis.state(i)) == i);
    CHECK(basis.shell_of(i) == basis.state(i).energy());
  }
  CHECK(basis.find(OccupationState{{3, 0, 0, 0, 0, 0, 0, 0, 0, 1}}) == -1);
}

TEST_CASE("invalid arguments and the dimension cap are rejected") {
  CHECK_THROWS_AS(build_basis(0, 4), std::invalid_argument);
  CHECK_THROWS_AS(build_basis(3, -1), std::invalid_argument);
  CHECK_THROWS_AS(build_basis(40, 120), std::runtime_error);
}
