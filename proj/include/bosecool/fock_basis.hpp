// fock_basis.hpp -- occupation-number basis for N trapped bosons, organized by energy shell
#pragma once

#include <map>
#include <string>
#include <vector>

namespace bosecool {

// nu[j] = number of atoms in trap level j, trailing zeros trimmed.
struct OccupationState {
  std::vector<int> nu;

  int particles() const;
  int energy() const;
  int occupation(int level) const;  // 0 beyond the stored range
  std::string str() const;

  friend bool operator==(const OccupationState&, const OccupationState&) = default;
};

// Lexicographic order on zero-padded occupation vectors; the canonical order
// inside a shell is decreasing in this sense.
bool occ_lex_greater(const OccupationState& a, const OccupationState& b);

// p_N(l): number of partitions of l into at most N parts.
long long shell_dimension(int N, int l);

// All shell-l occupation states in canonical order.
std::vector<OccupationState> enumerate_shell(int N, int l);

struct EnergyShell {
  int l = 0;
  int offset = 0;  // global index of the first state in this shell
  std::vector<OccupationState> states;

  int dim() const { return static_cast<int>(states.size()); }
};

class TruncatedBasis {
 public:
  int N = 0;
  int L_max = 0;
  int dim = 0;
  std::vector<EnergyShell> shells;  // shells[l], l = 0..L_max

  const OccupationState& state(int global) const;
  int shell_of(int global) const;
  // Global index of a state, -1 if outside the truncated basis.
  int find(const OccupationState&) const;

 private:
  std::vector<int> shell_lookup_;
  std::map<std::vector<int>, int> index_;
  friend TruncatedBasis build_basis(int N, int L_max);
};

// Enumerates all shells l <= L_max. Throws std::invalid_argument on bad input
// and std::runtime_error if the total dimension exceeds 1e5.
TruncatedBasis build_basis(int N, int L_max);

}  // namespace bosecool
