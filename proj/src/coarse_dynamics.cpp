// coarse_dynamics.cpp -- ladder-label rate equations and the frame projections
#include "bosecool/coarse_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "bosecool/errors.hpp"
#include "bosecool/liouville.hpp"

namespace bosecool {

double f_closed(int l, int s, int N) {
  if (N < 1) throw std::invalid_argument("f_closed: N >= 1 required");
  if (s < 0 || l < 0 || 2 * s > l)
    throw std::invalid_argument("f_closed: need 0 <= 2s <= l");
  const int m = l - 2 * s;
  const double val = (2.0 - 2.0 / N) * s +
                     4.0 * (static_cast<double>(m) * s +
                            static_cast<double>(s) * (s - 1.0)) /
                         N;
  return std::sqrt(val);
}

int FTable::index_of(VacuumLabel label) const {
  for (size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return static_cast<int>(i);
  return -1;
}

FTable build_ftable(const VacuumTable& table) {
  FTable ft;
  ft.N = table.N;
  ft.L_max = table.L_max;
  ft.labels = table.labels();
  const int n = static_cast<int>(ft.labels.size());
  ft.f.resize(n);
  ft.f_up.resize(n);
  ft.up_.assign(n, -1);
  ft.down_.assign(n, -1);
  for (int i = 0; i < n; ++i) {
    const VacuumLabel w = ft.labels[i];
    ft.f(i) = f_closed(w.l, w.s, ft.N);
    ft.up_[i] = ft.index_of({w.l + 2, w.s + 1, w.v});
    ft.down_[i] = ft.index_of({w.l - 2, w.s - 1, w.v});
    ft.f_up(i) = ft.up_[i] >= 0 ? f_closed(w.l + 2, w.s + 1, ft.N) : 0.0;
    if (w.s > 0 && ft.down_[i] < 0)
      throw invariant_violation("build_ftable: missing lower label for " +
                                w.str());
  }
  return ft;
}

double f_numeric(const TruncatedBasis& basis, const SparseOperator& B,
                 const VacuumTable& table, VacuumLabel label) {
  const VacuumState* upper = table.find(label);
  if (!upper) throw std::invalid_argument("f_numeric: unknown label " + label.str());
  if (label.s == 0) return 0.0;
  const VacuumState* lower = table.find({label.l - 2, label.s - 1, label.v});
  if (!lower)
    throw invariant_violation("f_numeric: missing lower label for " + label.str());
  return std::abs(lower->coeffs.dot(B.dense_block(label.l) * upper->coeffs));
}

CoarseState project(const LadderSet& ladders, const Eigen::MatrixXcd& rho,
                    double* residual) {
  const int n = static_cast<int>(ladders.labels.size());
  CoarseState cs;
  cs.labels = ladders.labels;
  cs.n = Eigen::VectorXd::Zero(n);
  cs.r = Eigen::MatrixXcd::Zero(n, n);
  const Eigen::MatrixXcd M = ladders.Uc.adjoint() * rho * ladders.Uc;
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k <= ladders.ladders[i].k_max; ++k)
      cs.n(i) += M(ladders.pos(i, k), ladders.pos(i, k)).real();
    for (int j = i + 1; j < n; ++j) {
      const int kcap = std::min(ladders.ladders[i].k_max, ladders.ladders[j].k_max);
      cplx sum(0.0, 0.0);
      for (int k = 0; k <= kcap; ++k)
        sum += M(ladders.pos(i, k), ladders.pos(j, k));
      cs.r(i, j) = sum;
      cs.r(j, i) = std::conj(sum);
    }
  }
  if (residual) *residual = std::abs(rho.trace().real() - cs.n.sum());
  return cs;
}

Eigen::MatrixXcd lift(const LadderSet& ladders, const CoarseState& cs, double q,
                      double tail_tol) {
  if (q < 0 || q >= 1) throw std::invalid_argument("lift: need 0 <= q < 1");
  if (cs.labels != ladders.labels)
    throw std::invalid_argument("lift: coarse state labels do not match ladders");
  const int n = static_cast<int>(cs.labels.size());
  double dropped = 0;
  for (int i = 0; i < n; ++i)
    dropped += std::abs(cs.n(i)) * std::pow(q, ladders.ladders[i].k_max + 1);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const int kcap = std::min(ladders.ladders[i].k_max, ladders.ladders[j].k_max);
      dropped += 2.0 * std::abs(cs.r(i, j)) * std::pow(q, kcap + 1);
    }
  if (dropped > tail_tol)
    throw numerical_failure("lift: geometric tail " + std::to_string(dropped) +
                            " past the cutoff exceeds tolerance");

  Eigen::MatrixXcd X = Eigen::MatrixXcd::Zero(ladders.total_cols(),
                                              ladders.total_cols());
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k <= ladders.ladders[i].k_max; ++k)
      X(ladders.pos(i, k), ladders.pos(i, k)) =
          cs.n(i) * (1.0 - q) * std::pow(q, k);
    for (int j = i + 1; j < n; ++j) {
      const int kcap = std::min(ladders.ladders[i].k_max, ladders.ladders[j].k_max);
      for (int k = 0; k <= kcap; ++k) {
        const cplx val = cs.r(i, j) * (1.0 - q) * std::pow(q, k);
        X(ladders.pos(i, k), ladders.pos(j, k)) = val;
        X(ladders.pos(j, k), ladders.pos(i, k)) = std::conj(val);
      }
    }
  }
  return ladders.Uc * X * ladders.Uc.adjoint();
}

std::vector<LadderTerm> apply_B_ladder(const FTable& ft, VacuumLabel w, int k) {
  const int i = ft.index_of(w);
  if (i < 0) throw std::invalid_argument("apply_B_ladder: unknown label " + w.str());
  std::vector<LadderTerm> out;
  if (w.s >= 1)
    out.push_back({{w.l - 2, w.s - 1, w.v}, k, ft.f(i)});
  if (k >= 2)
    out.push_back({w, k - 2, std::sqrt(k * (k - 1.0) / ft.N)});
  return out;
}

std::vector<LadderTerm> apply_C_ladder(const TruncatedBasis& basis,
                                       const SparseOperator& C,
                                       const VacuumTable& table,
                                       const FTable& ft, VacuumLabel w, int k) {
  const int i = ft.index_of(w);
  if (i < 0) throw std::invalid_argument("apply_C_ladder: unknown label " + w.str());
  const VacuumState* vac = table.find(w);
  std::vector<LadderTerm> out;
  if (w.s >= 1)
    out.push_back({{w.l - 2, w.s - 1, w.v},
                   k + 1,
                   std::sqrt(k + 1.0) / (2.0 * std::sqrt(ft.N)) * ft.f(i)});
  if (w.l >= 1) {
    const Eigen::MatrixXd block = C.dense_block(w.l);  // shell l -> l - 1
    for (const auto& other : table.vacua) {
      if (other.label.l != w.l - 1) continue;
      const double c = other.coeffs.dot(block * vac->coeffs);
      if (std::abs(c) > 1e-13) out.push_back({other.label, k, c});
    }
  }
  if (k >= 1)
    out.push_back({w, k - 1,
                   std::sqrt(static_cast<double>(k)) *
                       (0.5 + static_cast<double>(w.l) / ft.N +
                        (k - 1.0) / (2.0 * ft.N))});
  return out;
}

Eigen::MatrixXd population_generator(const FTable& ft, const RateSet& rates) {
  const int n = static_cast<int>(ft.labels.size());
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
  const double gd = rates.gamma1_down, gu = rates.gamma1_up;
  for (int w = 0; w < n; ++w) {
    const double f2 = ft.f(w) * ft.f(w);
    const double fu2 = ft.f_up(w) * ft.f_up(w);
    G(w, w) -= 2.0 * gd * f2 + 2.0 * gu * fu2;
    if (ft.up(w) >= 0) G(w, ft.up(w)) += 2.0 * gd * fu2;
    if (ft.down(w) >= 0) G(w, ft.down(w)) += 2.0 * gu * f2;
  }
  return G;
}

int CoherenceGenerator::pair_index(int i, int j) const {
  if (i > j) std::swap(i, j);
  for (size_t p = 0; p < pairs.size(); ++p)
    if (pairs[p].first == i && pairs[p].second == j) return static_cast<int>(p);
  return -1;
}

CoherenceGenerator coherence_generator(const FTable& ft, const RateSet& rates) {
  const int n = static_cast<int>(ft.labels.size());
  CoherenceGenerator cg;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) cg.pairs.emplace_back(i, j);
  const int np = static_cast<int>(cg.pairs.size());
  cg.full = Eigen::MatrixXd::Zero(np, np);
  cg.db = Eigen::MatrixXd::Zero(np, np);
  cg.neg = Eigen::MatrixXd::Zero(np, np);
  const double gd = rates.gamma1_down, gu = rates.gamma1_up;
  for (int p = 0; p < np; ++p) {
    const auto [i, j] = cg.pairs[p];
    const double fi = ft.f(i), fj = ft.f(j);
    const double fui = ft.f_up(i), fuj = ft.f_up(j);
    cg.full(p, p) = -gd * (fi * fi + fj * fj) - gu * (fui * fui + fuj * fuj);
    cg.db(p, p) = -2.0 * gd * fi * fj - 2.0 * gu * fui * fuj;
    cg.neg(p, p) = -gd * (fi - fj) * (fi - fj) - gu * (fui - fuj) * (fui - fuj);
    if (ft.up(i) >= 0 && ft.up(j) >= 0) {
      const int pu = cg.pair_index(ft.up(i), ft.up(j));
      cg.full(p, pu) += 2.0 * gd * fui * fuj;
      cg.db(p, pu) += 2.0 * gd * fui * fuj;
    }
    if (ft.down(i) >= 0 && ft.down(j) >= 0) {
      const int pd = cg.pair_index(ft.down(i), ft.down(j));
      cg.full(p, pd) += 2.0 * gu * fi * fj;
      cg.db(p, pd) += 2.0 * gu * fi * fj;
    }
  }
  return cg;
}

CoarseTrajectory evolve_coarse(const FTable& ft, const RateSet& rates,
                               const CoarseState& cs0,
                               const std::vector<double>& sample_times,
                               double dt_target) {
  if (cs0.labels != ft.labels)
    throw std::invalid_argument("evolve_coarse: state labels do not match table");
  if (sample_times.empty() || sample_times.front() < 0)
    throw std::invalid_argument("evolve_coarse: bad sample times");
  for (size_t i = 1; i < sample_times.size(); ++i)
    if (sample_times[i] <= sample_times[i - 1])
      throw std::invalid_argument("evolve_coarse: sample times must increase");

  const Eigen::MatrixXd Gn = population_generator(ft, rates);
  const CoherenceGenerator cg = coherence_generator(ft, rates);
  const int n = static_cast<int>(ft.labels.size());
  const int np = static_cast<int>(cg.pairs.size());

  double maxdiag = 0;
  for (int i = 0; i < n; ++i) maxdiag = std::max(maxdiag, std::abs(Gn(i, i)));
  for (int p = 0; p < np; ++p)
    maxdiag = std::max(maxdiag, std::abs(cg.full(p, p)));
  double dt = dt_target > 0 ? dt_target
                            : (maxdiag > 0 ? 0.02 / maxdiag : 1.0);

  Eigen::VectorXd nv = cs0.n;
  Eigen::VectorXcd rv(np);
  for (int p = 0; p < np; ++p)
    rv(p) = cs0.r(cg.pairs[p].first, cg.pairs[p].second);

  CoarseTrajectory traj;
  traj.labels = ft.labels;

  auto record = [&](double t) {
    traj.times.push_back(t);
    Eigen::MatrixXcd rmat = Eigen::MatrixXcd::Zero(n, n);
    for (int p = 0; p < np; ++p) {
      rmat(cg.pairs[p].first, cg.pairs[p].second) = rv(p);
      rmat(cg.pairs[p].second, cg.pairs[p].first) = std::conj(rv(p));
    }
    traj.r.push_back(std::move(rmat));
    traj.n.conservativeResize(traj.times.size(), n);
    traj.n.row(traj.times.size() - 1) = nv.transpose();
  };

  auto rk4 = [&](double h) {
    const Eigen::VectorXd k1 = Gn * nv;
    const Eigen::VectorXd k2 = Gn * (nv + 0.5 * h * k1);
    const Eigen::VectorXd k3 = Gn * (nv + 0.5 * h * k2);
    const Eigen::VectorXd k4 = Gn * (nv + h * k3);
    nv += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const Eigen::VectorXcd c1 = cg.full * rv;
    const Eigen::VectorXcd c2 = cg.full * (rv + 0.5 * h * c1);
    const Eigen::VectorXcd c3 = cg.full * (rv + 0.5 * h * c2);
    const Eigen::VectorXcd c4 = cg.full * (rv + h * c3);
    rv += h / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4);
  };

  double t = 0;
  for (double target : sample_times) {
    if (target > t) {
      const int steps = std::max(1, static_cast<int>(std::ceil((target - t) / dt)));
      const double h = (target - t) / steps;
      for (int s = 0; s < steps; ++s) rk4(h);
      t = target;
    }
    record(target);
  }
  return traj;
}

Eigen::VectorXd stationary_populations(const FTable& ft, const RateSet& rates,
                                       const CoarseState& cs0) {
  if (cs0.labels != ft.labels)
    throw std::invalid_argument("stationary_populations: label mismatch");
  if (rates.gamma1_down <= 0)
    throw std::invalid_argument("stationary_populations: gamma1_down must be positive");
  const double u = rates.gamma1_up / rates.gamma1_down;
  const int n = static_cast<int>(ft.labels.size());
  std::map<std::pair<int, int>, std::vector<int>> families;  // (m, v) -> indices
  for (int i = 0; i < n; ++i) {
    const VacuumLabel w = ft.labels[i];
    families[{w.l - 2 * w.s, w.v}].push_back(i);
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (const auto& [key, members] : families) {
    double mass = 0, norm = 0;
    for (int i : members) {
      mass += cs0.n(i);
      norm += std::pow(u, ft.labels[i].s);
    }
    for (int i : members) out(i) = mass * std::pow(u, ft.labels[i].s) / norm;
  }
  return out;
}

CoarseState random_coarse_state(const std::vector<VacuumLabel>& labels,
                                std::mt19937_64& rng) {
  const int n = static_cast<int>(labels.size());
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXcd G(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) G(i, j) = cplx(gauss(rng), gauss(rng));
  Eigen::MatrixXcd M = G.adjoint() * G;
  M /= M.trace().real();
  CoarseState cs;
  cs.labels = labels;
  cs.n = M.diagonal().real();
  cs.r = M;
  cs.r.diagonal().setZero();
  return cs;
}

double check_L11_vanishes(const TruncatedBasis& basis, const CollectiveOps& ops,
                          const LadderSet& ladders, const RateSet& rates,
                          double eta, int n_draws, std::uint64_t seed,
                          int l_cap) {
  std::mt19937_64 rng(seed);
  const double q = std::exp(-rates.beta_e);
  const double c_down = rates.gamma_down * eta * eta;
  const double c_up = rates.gamma_up * eta * eta;

  std::vector<int> capped;
  for (size_t i = 0; i < ladders.labels.size(); ++i)
    if (ladders.labels[i].l <= l_cap) capped.push_back(static_cast<int>(i));
  if (capped.empty())
    throw std::invalid_argument("check_L11_vanishes: no labels under the cap");
  std::vector<VacuumLabel> sub;
  for (int i : capped) sub.push_back(ladders.labels[i]);

  double worst = 0;
  for (int d = 0; d < n_draws; ++d) {
    const CoarseState small = random_coarse_state(sub, rng);
    CoarseState cs;
    cs.labels = ladders.labels;
    cs.n = Eigen::VectorXd::Zero(ladders.labels.size());
    cs.r = Eigen::MatrixXcd::Zero(ladders.labels.size(), ladders.labels.size());
    for (size_t a = 0; a < capped.size(); ++a) {
      cs.n(capped[a]) = small.n(a);
      for (size_t b = 0; b < capped.size(); ++b)
        cs.r(capped[a], capped[b]) = small.r(a, b);
    }
    const Eigen::MatrixXcd rho = lift(ladders, cs, q, 1e300);
    const Eigen::MatrixXcd rhodot = apply_L11(rho, ops, c_down, c_up);
    const CoarseState drift = project(ladders, rhodot);
    worst = std::max(worst, drift.n.cwiseAbs().maxCoeff());
    worst = std::max(worst, drift.r.cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace bosecool
