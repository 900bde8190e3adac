// vacua.cpp -- kernel extraction, family classification, ladder construction
#include "bosecool/vacua.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "bosecool/coarse_dynamics.hpp"
#include "bosecool/errors.hpp"

namespace bosecool {

namespace {

// A raising chain from base shell m reaches depth s only when every step
// amplitude along the way is positive. For N >= 2 that is automatic; for a
// single particle the very first step from the global vacuum vanishes.
bool chain_alive(int m, int s, int N) {
  for (int j = 1; j <= s; ++j)
    if (f_closed(m + 2 * j, j, N) < 1e-9) return false;
  return true;
}

constexpr double kRankCut = 1e-10;       // relative: sigma below this is null
constexpr double kAmbigLo = 1e-12;       // ambiguous band, relative
constexpr double kAmbigHi = 1e-8;

// Null space of M (orthonormal columns). Aborts if any singular value lands
// in the ambiguous band where rank cannot be decided reliably.
Eigen::MatrixXd null_space(const Eigen::MatrixXd& M, const char* context) {
  const int cols = static_cast<int>(M.cols());
  if (M.rows() == 0) return Eigen::MatrixXd::Identity(cols, cols);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  const double scale = std::max(sigma.size() > 0 ? sigma(0) : 0.0, 1.0);
  int rank = 0;
  for (int i = 0; i < sigma.size(); ++i) {
    const double rel = sigma(i) / scale;
    if (rel > kAmbigLo && rel < kAmbigHi) {
      char buf[160];
      std::snprintf(buf, sizeof(buf),
                    "%s: singular value %.3e (relative) in ambiguous band "
                    "(%.0e, %.0e), rank undecidable",
                    context, rel, kAmbigLo, kAmbigHi);
      throw numerical_failure(buf);
    }
    if (rel >= kRankCut) ++rank;
  }
  return svd.matrixV().rightCols(cols - rank);
}

// Deterministic orthonormal basis of the column span of F: Gram-Schmidt over
// projections of the canonical axes, earliest axis first.
Eigen::MatrixXd canonical_family_basis(const Eigen::MatrixXd& F,
                                       const char* context) {
  const int dim = static_cast<int>(F.rows());
  const int want = static_cast<int>(F.cols());
  Eigen::MatrixXd out(dim, want);
  int got = 0;
  for (int axis = 0; axis < dim && got < want; ++axis) {
    Eigen::VectorXd g = F * F.row(axis).transpose();  // project e_axis onto span
    for (int j = 0; j < got; ++j) g -= out.col(j).dot(g) * out.col(j);
    const double nrm = g.norm();
    if (nrm > 1e-6) out.col(got++) = g / nrm;
  }
  if (got != want)
    throw numerical_failure(std::string(context) +
                            ": canonical axis sweep failed to span the family");
  return out;
}

// Flip sign so the largest-magnitude coefficient (earliest on ties) is positive.
void fix_phase(Eigen::VectorXd& x) {
  int arg = 0;
  double best = -1.0;
  for (int i = 0; i < x.size(); ++i) {
    const double a = std::abs(x(i));
    if (a > best + 1e-12) {
      best = a;
      arg = i;
    }
  }
  if (x(arg) < 0) x = -x;
}

}  // namespace

std::string VacuumLabel::str() const {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%d.%d.%d", l, s, v);
  return buf;
}

const VacuumState* VacuumTable::find(VacuumLabel label) const {
  for (const auto& v : vacua)
    if (v.label == label) return &v;
  return nullptr;
}

std::vector<VacuumLabel> VacuumTable::labels() const {
  std::vector<VacuumLabel> out;
  out.reserve(vacua.size());
  for (const auto& v : vacua) out.push_back(v.label);
  return out;
}

Eigen::MatrixXd kernel_of_A(const TruncatedBasis& basis, const SparseOperator& A,
                            int l) {
  if (l < 0 || l > basis.L_max)
    throw std::invalid_argument("kernel_of_A: shell outside basis");
  if (l == 0) return Eigen::MatrixXd::Identity(1, 1);
  return null_space(A.dense_block(l), "kernel_of_A");
}

VacuumTable classify_vacua(const TruncatedBasis& basis, const SparseOperator& A,
                           const SparseOperator& D) {
  const int L = basis.L_max;
  VacuumTable table;
  table.N = basis.N;
  table.L_max = L;

  std::vector<Eigen::MatrixXd> kernels(L + 1);
  for (int l = 0; l <= L; ++l) kernels[l] = kernel_of_A(basis, A, l);

  // Base families per shell m: ker D inside ker A. For m < 2 the D block
  // vanishes identically, so the whole kernel qualifies.
  std::vector<Eigen::MatrixXd> families(L + 1);
  for (int m = 0; m <= L; ++m) {
    const Eigen::MatrixXd& K = kernels[m];
    if (K.cols() == 0) {
      families[m].resize(K.rows(), 0);
      continue;
    }
    if (m < 2) {
      families[m] = K;
    } else {
      const Eigen::MatrixXd coords =
          null_space(D.dense_block(m) * K, "classify_vacua");
      families[m] = K * coords;
    }
    if (families[m].cols() > 0)
      families[m] = canonical_family_basis(families[m], "classify_vacua");
  }

  // Census and the partition identities.
  for (int l = 0; l <= L; ++l) {
    ShellCensus c;
    c.l = l;
    c.p = shell_dimension(basis.N, l);
    c.n_vacua = static_cast<int>(kernels[l].cols());
    c.n_new_families = static_cast<int>(families[l].cols());
    const long long p_prev = l == 0 ? 0 : shell_dimension(basis.N, l - 1);
    if (c.n_vacua != c.p - p_prev)
      throw invariant_violation("classify_vacua: dim ker A != p(l) - p(l-1) at l=" +
                                std::to_string(l));
    int sum_m = 0;
    for (int s = 0; 2 * s <= l; ++s)
      if (chain_alive(l - 2 * s, s, basis.N))
        sum_m += static_cast<int>(families[l - 2 * s].cols());
    if (sum_m != c.n_vacua)
      throw invariant_violation(
          "classify_vacua: family counts do not add up to dim ker A at l=" +
          std::to_string(l));
    table.census.push_back(c);
  }

  // Raise each base family with D', normalizing at each depth.
  for (int m = 0; m <= L; ++m) {
    for (int v = 1; v <= families[m].cols(); ++v) {
      Eigen::VectorXd x = families[m].col(v - 1);
      fix_phase(x);
      for (int s = 0; m + 2 * s <= L; ++s) {
        const int l = m + 2 * s;
        if (s > 0) {
          // D maps shell l to l - 2, so its block at source shell l,
          // transposed, raises l - 2 to l.
          Eigen::VectorXd y = D.dense_block(l).transpose() * x;
          const double nrm = y.norm();
          if (nrm < 1e-12) {
            if (f_closed(l, s, basis.N) < 1e-9) break;  // chain legitimately ends
            throw invariant_violation(
                "classify_vacua: raising chain died early at l=" +
                std::to_string(l));
          }
          x = y / nrm;
        }
        VacuumState st;
        st.label = {l, s, v};
        st.base_m = m;
        st.base_v = v;
        st.coeffs = x;
        st.ddag_d_numeric = (D.dense_block(l) * x).squaredNorm();
        table.vacua.push_back(std::move(st));
      }
    }
  }

  std::sort(table.vacua.begin(), table.vacua.end(),
            [](const VacuumState& a, const VacuumState& b) {
              return a.label < b.label;
            });

  // Per shell: the collected depth-s states must form an orthonormal basis of
  // ker A, i.e. chains from distinct families never mix.
  for (int l = 0; l <= L; ++l) {
    std::vector<const VacuumState*> here;
    for (const auto& v : table.vacua)
      if (v.label.l == l) here.push_back(&v);
    if (static_cast<int>(here.size()) != kernels[l].cols())
      throw invariant_violation("classify_vacua: shell count mismatch at l=" +
                                std::to_string(l));
    if (here.empty()) continue;
    Eigen::MatrixXd F(kernels[l].rows(), here.size());
    for (size_t i = 0; i < here.size(); ++i) F.col(i) = here[i]->coeffs;
    const double ortho =
        (F.transpose() * F -
         Eigen::MatrixXd::Identity(F.cols(), F.cols())).cwiseAbs().maxCoeff();
    if (ortho > 1e-9)
      throw invariant_violation(
          "classify_vacua: depth chains not orthonormal at l=" +
          std::to_string(l));
    const double span = (F * F.transpose() -
                         kernels[l] * kernels[l].transpose())
                            .cwiseAbs()
                            .maxCoeff();
    if (span > 1e-8)
      throw invariant_violation(
          "classify_vacua: depth chains do not span ker A at l=" +
          std::to_string(l));
  }

  return table;
}

Eigen::VectorXd closed_form_vacuum(int N, int l) {
  if (N < 1) throw std::invalid_argument("closed_form_vacuum: N >= 1 required");
  if (l == 0) return Eigen::VectorXd::Ones(1);
  if (l < 2 || l > N)
    throw std::invalid_argument(
        "closed_form_vacuum: valid for l = 0 or 2 <= l <= N");

  const auto shell = enumerate_shell(N, l);
  std::map<std::vector<int>, int> index;
  for (size_t i = 0; i < shell.size(); ++i) index[shell[i].nu] = static_cast<int>(i);

  auto ket = [&](int m) {
    // m = l: both excitations in the first mode; m < l: m - 1 there plus one
    // quantum parked at level l + 1 - m.
    std::vector<int> nu;
    if (m == l) {
      nu = {N - l, l};
    } else {
      nu.assign(l + 2 - m, 0);
      nu[0] = N - m;
      nu[1] = m - 1;
      nu[l + 1 - m] = 1;
      while (!nu.empty() && nu.back() == 0) nu.pop_back();
    }
    auto it = index.find(nu);
    if (it == index.end())
      throw invariant_violation("closed_form_vacuum: ket missing from shell");
    return it->second;
  };

  auto amp = [](int n) { return std::sqrt(n + 1.0); };  // single-step matrix element

  std::vector<double> alpha(l + 1, 0.0);
  alpha[l] = 1.0;
  if (l >= 2)
    alpha[l - 1] = -(amp(0) / amp(1)) *
                   (std::sqrt(static_cast<double>(l)) *
                    std::sqrt(static_cast<double>(N - l + 1)) /
                    std::sqrt(static_cast<double>(l - 1)));
  for (int m = l - 2; m >= 1; --m)
    alpha[m] = -(amp(0) / amp(l - m)) * std::sqrt(static_cast<double>(m)) *
               std::sqrt(static_cast<double>(N - m)) * alpha[m + 1];

  Eigen::VectorXd out = Eigen::VectorXd::Zero(shell.size());
  for (int m = 1; m <= l; ++m) out(ket(m)) += alpha[m];
  out.normalize();
  if (out(ket(l)) < 0) out = -out;
  return out;
}

SubspaceLadder build_ladder(const TruncatedBasis& basis,
                            const SparseOperator& Adag, const VacuumState& vac,
                            int k_max) {
  const int l = vac.label.l;
  if (k_max < 0 || l + k_max > basis.L_max)
    throw std::invalid_argument("build_ladder: chain exceeds the cutoff");
  SubspaceLadder lad;
  lad.label = vac.label;
  lad.k_max = k_max;
  lad.states = Eigen::MatrixXd::Zero(basis.dim, k_max + 1);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(basis.dim);
  const auto& sh = basis.shells[l];
  x.segment(sh.offset, sh.dim()) = vac.coeffs;
  lad.states.col(0) = x;
  for (int k = 1; k <= k_max; ++k) {
    Eigen::VectorXcd y = Adag.mat() * x.cast<cplx>();
    x = y.real() / std::sqrt(static_cast<double>(k));
    const double nrm = x.norm();
    if (std::abs(nrm - 1.0) > 1e-9)
      throw numerical_failure("build_ladder: norm drift " +
                              std::to_string(nrm - 1.0) + " at k=" +
                              std::to_string(k) + " above " + vac.label.str());
    x /= nrm;
    lad.states.col(k) = x;
  }
  return lad;
}

int LadderSet::index_of(VacuumLabel label) const {
  for (size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return static_cast<int>(i);
  return -1;
}

LadderSet build_ladders(const TruncatedBasis& basis, const VacuumTable& table,
                        const SparseOperator& Adag) {
  LadderSet set;
  set.basis = &basis;
  int total = 0;
  for (const auto& vac : table.vacua) {
    set.labels.push_back(vac.label);
    set.offset.push_back(total);
    set.ladders.push_back(
        build_ladder(basis, Adag, vac, basis.L_max - vac.label.l));
    total += set.ladders.back().k_max + 1;
  }
  if (total != basis.dim)
    throw invariant_violation("build_ladders: ladder columns do not fill the basis");
  set.U.resize(basis.dim, total);
  for (size_t i = 0; i < set.ladders.size(); ++i)
    set.U.middleCols(set.offset[i], set.ladders[i].k_max + 1) =
        set.ladders[i].states;
  const double ortho =
      (set.U.transpose() * set.U -
       Eigen::MatrixXd::Identity(total, total)).cwiseAbs().maxCoeff();
  if (ortho > 1e-9)
    throw invariant_violation("build_ladders: ladder frame not orthonormal (" +
                              std::to_string(ortho) + ")");
  set.Uc = set.U.cast<cplx>();
  return set;
}

}  // namespace bosecool
