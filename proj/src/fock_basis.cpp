// fock_basis.cpp
#include "bosecool/fock_basis.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace bosecool {

namespace {

constexpr long long kDimCap = 100000;

void append_partitions(int remaining, int max_part, int parts_left,
                       std::vector<int>& current,
                       std::vector<std::vector<int>>& out) {
  if (remaining == 0) {
    out.push_back(current);
    return;
  }
  if (parts_left == 0) return;
  for (int p = std::min(remaining, max_part); p >= 1; --p) {
    current.push_back(p);
    append_partitions(remaining - p, p, parts_left - 1, current, out);
    current.pop_back();
  }
}

}  // namespace

int OccupationState::particles() const {
  return std::accumulate(nu.begin(), nu.end(), 0);
}

int OccupationState::energy() const {
  int e = 0;
  for (std::size_t j = 0; j < nu.size(); ++j) e += static_cast<int>(j) * nu[j];
  return e;
}

int OccupationState::occupation(int level) const {
  if (level < 0 || level >= static_cast<int>(nu.size())) return 0;
  return nu[level];
}

std::string OccupationState::str() const {
  std::string s = "|";
  for (std::size_t j = 0; j < nu.size(); ++j) {
    if (j) s += ",";
    s += std::to_string(nu[j]);
  }
  return s + ">";
}

bool occ_lex_greater(const OccupationState& a, const OccupationState& b) {
  std::size_t n = std::max(a.nu.size(), b.nu.size());
  for (std::size_t j = 0; j < n; ++j) {
    int x = a.occupation(static_cast<int>(j));
    int y = b.occupation(static_cast<int>(j));
    if (x != y) return x > y;
  }
  return false;
}

long long shell_dimension(int N, int l) {
  if (N < 1) throw std::invalid_argument("shell_dimension: N must be >= 1");
  if (l < 0) throw std::invalid_argument("shell_dimension: l must be >= 0");
  int k = std::min(N, l);
  // table[n][j]: partitions of n into at most j parts
  std::vector<std::vector<long long>> table(l + 1, std::vector<long long>(k + 1, 0));
  for (int j = 0; j <= k; ++j) table[0][j] = 1;
  for (int n = 1; n <= l; ++n)
    for (int j = 1; j <= k; ++j)
      table[n][j] = table[n][j - 1] + (n >= j ? table[n - j][j] : 0);
  return table[l][k];
}

std::vector<OccupationState> enumerate_shell(int N, int l) {
  if (N < 1) throw std::invalid_argument("enumerate_shell: N must be >= 1");
  if (l < 0) throw std::invalid_argument("enumerate_shell: l must be >= 0");
  std::vector<std::vector<int>> partitions;
  std::vector<int> current;
  append_partitions(l, l, N, current, partitions);
  if (l == 0) partitions = {{}};

  std::vector<OccupationState> states;
  states.reserve(partitions.size());
  for (const auto& parts : partitions) {
    OccupationState st;
    int top = parts.empty() ? 0 : parts.front();
    st.nu.assign(top + 1, 0);
    st.nu[0] = N - static_cast<int>(parts.size());
    for (int p : parts) ++st.nu[p];
    while (st.nu.size() > 1 && st.nu.back() == 0) st.nu.pop_back();
    states.push_back(std::move(st));
  }
  std::sort(states.begin(), states.end(), occ_lex_greater);
  return states;
}

const OccupationState& TruncatedBasis::state(int global) const {
  int l = shell_of(global);
  return shells[l].states[global - shells[l].offset];
}

int TruncatedBasis::shell_of(int global) const {
  return shell_lookup_.at(global);
}

int TruncatedBasis::find(const OccupationState& s) const {
  auto key = s.nu;
  while (key.size() > 1 && key.back() == 0) key.pop_back();
  auto it = index_.find(key);
  return it == index_.end() ? -1 : it->second;
}

TruncatedBasis build_basis(int N, int L_max) {
  if (N < 1) throw std::invalid_argument("build_basis: N must be >= 1");
  if (L_max < 0) throw std::invalid_argument("build_basis: L_max must be >= 0");

  long long total = 0;
  for (int l = 0; l <= L_max; ++l) total += shell_dimension(N, l);
  if (total > kDimCap)
    throw std::runtime_error("build_basis: dimension " + std::to_string(total) +
                             " exceeds the cap of " + std::to_string(kDimCap));

  TruncatedBasis basis;
  basis.N = N;
  basis.L_max = L_max;
  basis.shells.resize(L_max + 1);
  int offset = 0;
  for (int l = 0; l <= L_max; ++l) {
    EnergyShell& shell = basis.shells[l];
    shell.l = l;
    shell.offset = offset;
    shell.states = enumerate_shell(N, l);
    if (static_cast<long long>(shell.states.size()) != shell_dimension(N, l))
      throw std::runtime_error("build_basis: enumeration disagrees with p_N(l)");
    for (int i = 0; i < shell.dim(); ++i) {
      const OccupationState& st = shell.states[i];
      if (st.particles() != N || st.energy() != l)
        throw std::runtime_error("build_basis: invalid state " + st.str());
      basis.index_[st.nu] = offset + i;
      basis.shell_lookup_.push_back(l);
    }
    offset += shell.dim();
  }
  basis.dim = offset;
  return basis;
}

}  // namespace bosecool
