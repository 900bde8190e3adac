// liouville.cpp -- channel applications and the fixed-step propagator
#include "bosecool/liouville.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "bosecool/errors.hpp"

namespace bosecool {

namespace {

Eigen::VectorXd real_diagonal(const SparseOperator& op) {
  return Eigen::VectorXcd(op.mat().diagonal()).real();
}

}  // namespace

CollectiveOps build_collective_ops(const TruncatedBasis& basis) {
  CollectiveOps ops;
  ops.A = build_A(basis);
  ops.B = build_B(basis);
  ops.C = build_C(basis);
  ops.D = build_D(basis);
  ops.E = build_E(basis);
  ops.Adag = ops.A.adjoint();
  ops.Bdag = ops.B.adjoint();
  ops.Cdag = ops.C.adjoint();
  ops.Ddag = ops.D.adjoint();
  ops.AdA = ops.Adag * ops.A;
  ops.AAd = ops.A * ops.Adag;
  ops.BdB = ops.Bdag * ops.B;
  ops.BBd = ops.B * ops.Bdag;
  ops.S_down = ops.Cdag * ops.A + ops.Adag * ops.C;
  ops.S_up = ops.C * ops.Adag + ops.A * ops.Cdag;
  return ops;
}

Eigen::MatrixXcd lindblad_apply(const Eigen::MatrixXcd& rho,
                                const SparseOperator& L,
                                const SparseOperator& Ldag,
                                const SparseOperator& LdagL, double rate) {
  const Eigen::MatrixXcd Lr = L.mat() * rho;
  Eigen::MatrixXcd out = 2.0 * (Lr * Ldag.mat());
  out -= LdagL.mat() * rho;
  out -= rho * LdagL.mat();
  return rate * out;
}

Eigen::MatrixXcd apply_L0(const Eigen::MatrixXcd& rho, const CollectiveOps& ops,
                          const RateSet& rates) {
  Eigen::MatrixXcd out =
      lindblad_apply(rho, ops.A, ops.Adag, ops.AdA, rates.gamma_down);
  if (rates.gamma_up > 0)
    out += lindblad_apply(rho, ops.Adag, ops.A, ops.AAd, rates.gamma_up);
  return out;
}

Eigen::MatrixXcd apply_L11(const Eigen::MatrixXcd& rho, const CollectiveOps& ops,
                           double c_down, double c_up) {
  const Eigen::MatrixXcd Ar = ops.A.mat() * rho;
  const Eigen::MatrixXcd Cr = ops.C.mat() * rho;
  Eigen::MatrixXcd term = 2.0 * (Ar * ops.Cdag.mat() + Cr * ops.Adag.mat());
  term -= ops.S_down.mat() * rho;
  term -= rho * ops.S_down.mat();
  Eigen::MatrixXcd out = -c_down * term;
  if (c_up != 0) {
    const Eigen::MatrixXcd Adr = ops.Adag.mat() * rho;
    const Eigen::MatrixXcd Cdr = ops.Cdag.mat() * rho;
    Eigen::MatrixXcd term_up = 2.0 * (Adr * ops.C.mat() + Cdr * ops.A.mat());
    term_up -= ops.S_up.mat() * rho;
    term_up -= rho * ops.S_up.mat();
    out -= c_up * term_up;
  }
  return out;
}

Eigen::MatrixXcd apply_L12(const Eigen::MatrixXcd& rho, const CollectiveOps& ops,
                           const RateSet& rates) {
  Eigen::MatrixXcd out =
      lindblad_apply(rho, ops.B, ops.Bdag, ops.BdB, rates.gamma1_down);
  if (rates.gamma1_up > 0)
    out += lindblad_apply(rho, ops.Bdag, ops.B, ops.BBd, rates.gamma1_up);
  return out;
}

ExactJumps build_exact_jumps(const TruncatedBasis& basis, const BathSpec& bath,
                             const RateSet& rates) {
  const double k1 = bath.eta;
  const double k2 = std::sqrt(2.0) * bath.eta;
  SparseMat g1(basis.dim, basis.dim);
  SparseMat g2(basis.dim, basis.dim);
  for (int n = 0; n + 1 <= basis.L_max; ++n)
    g1 += (gamma_exact(n, n + 1, k1) * bilinear(basis, n, n + 1).mat()).eval();
  for (int n = 0; n + 2 <= basis.L_max; ++n)
    g2 += (gamma_exact(n, n + 2, k2) * bilinear(basis, n, n + 2).mat()).eval();

  ExactJumps ej;
  ej.G1 = SparseOperator(basis, "G1", -1, std::move(g1));
  ej.G1dag = ej.G1.adjoint();
  ej.G2 = SparseOperator(basis, "G2", -2, std::move(g2));
  ej.G2dag = ej.G2.adjoint();
  ej.G1dG1 = ej.G1dag * ej.G1;
  ej.G1G1d = ej.G1 * ej.G1dag;
  ej.G2dG2 = ej.G2dag * ej.G2;
  ej.G2G2d = ej.G2 * ej.G2dag;
  const double e2 = bath.eta * bath.eta;
  ej.r1_down = rates.gamma_down / (bath.N * e2);
  ej.r1_up = rates.gamma_up / (bath.N * e2);
  ej.r2_down = rates.gamma1_down / (bath.N * e2 * e2);
  ej.r2_up = rates.gamma1_up / (bath.N * e2 * e2);
  return ej;
}

Eigen::MatrixXcd thermal_state(const TruncatedBasis& basis, double beta_e) {
  Eigen::VectorXd w(basis.dim);
  for (int i = 0; i < basis.dim; ++i)
    w(i) = std::exp(-beta_e * basis.shell_of(i));
  w /= w.sum();
  return w.cast<cplx>().asDiagonal();
}

Eigen::MatrixXcd pure_state(const Eigen::VectorXcd& psi) {
  const double nrm = psi.norm();
  if (nrm <= 0) throw std::invalid_argument("pure_state: zero vector");
  const Eigen::VectorXcd v = psi / nrm;
  return v * v.adjoint();
}

Trajectory evolve(const TruncatedBasis& basis, const CollectiveOps& ops,
                  const BathSpec& bath, const RateSet& rates,
                  const EvolutionConfig& cfg, const Eigen::MatrixXcd& rho0,
                  const LadderSet& ladders) {
  if (rho0.rows() != basis.dim || rho0.cols() != basis.dim)
    throw std::invalid_argument("evolve: density matrix dimension mismatch");
  if (!(cfg.l0 || cfg.l11 || cfg.l12))
    throw std::invalid_argument("evolve: no channel enabled");
  if (cfg.exact_gamma && cfg.l11)
    throw std::invalid_argument(
        "evolve: the cross channel is already contained in the exact "
        "one-quantum line");
  if (cfg.record_every < 1)
    throw std::invalid_argument("evolve: record_every must be >= 1");
  if (cfg.t_final <= 0)
    throw std::invalid_argument("evolve: t_final must be positive");

  const double e2 = bath.eta * bath.eta;
  const double c_down = rates.gamma_down * e2;
  const double c_up = rates.gamma_up * e2;

  ExactJumps ej;
  if (cfg.exact_gamma) ej = build_exact_jumps(basis, bath, rates);

  // Fastest enabled rate bounds the requested step; the stiffest diagonal
  // decay bounds the automatic step.
  double rate_max = 0;
  Eigen::VectorXd stiff = Eigen::VectorXd::Zero(basis.dim);
  if (cfg.l0) {
    rate_max = std::max({rate_max, rates.gamma_down, rates.gamma_up});
    if (cfg.exact_gamma) {
      stiff += 2.0 * ej.r1_down * real_diagonal(ej.G1dG1);
      stiff += 2.0 * ej.r1_up * real_diagonal(ej.G1G1d);
    } else {
      stiff += 2.0 * rates.gamma_down * real_diagonal(ops.AdA);
      stiff += 2.0 * rates.gamma_up * real_diagonal(ops.AAd);
    }
  }
  if (cfg.l11) {
    rate_max = std::max({rate_max, c_down, c_up});
    stiff.array() +=
        2.0 * (c_down + c_up) *
        (real_diagonal(ops.S_down).cwiseAbs().maxCoeff() +
         real_diagonal(ops.S_up).cwiseAbs().maxCoeff());
  }
  if (cfg.l12) {
    rate_max = std::max({rate_max, rates.gamma1_down, rates.gamma1_up});
    if (cfg.exact_gamma) {
      stiff += 2.0 * ej.r2_down * real_diagonal(ej.G2dG2);
      stiff += 2.0 * ej.r2_up * real_diagonal(ej.G2G2d);
    } else {
      stiff += 2.0 * rates.gamma1_down * real_diagonal(ops.BdB);
      stiff += 2.0 * rates.gamma1_up * real_diagonal(ops.BBd);
    }
  }
  if (rate_max <= 0) throw std::invalid_argument("evolve: all rates vanish");
  const double dt_rate = 0.01 / rate_max;
  const double dt_stiff = 0.8 / std::max(stiff.maxCoeff(), 1e-300);
  double dt = std::min(dt_rate, dt_stiff);
  if (cfg.dt > 0) {
    if (cfg.dt > dt_rate * (1.0 + 1e-12))
      throw std::invalid_argument(
          "evolve: dt exceeds 0.01 / (fastest enabled rate)");
    dt = cfg.dt;
  }

  const long long nsteps =
      std::max<long long>(1, static_cast<long long>(std::ceil(cfg.t_final / dt)));
  dt = cfg.t_final / static_cast<double>(nsteps);

  auto rhs = [&](const Eigen::MatrixXcd& rho) {
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(rho.rows(), rho.cols());
    if (cfg.l0) {
      if (cfg.exact_gamma) {
        out += lindblad_apply(rho, ej.G1, ej.G1dag, ej.G1dG1, ej.r1_down);
        if (ej.r1_up > 0)
          out += lindblad_apply(rho, ej.G1dag, ej.G1, ej.G1G1d, ej.r1_up);
      } else {
        out += apply_L0(rho, ops, rates);
      }
    }
    if (cfg.l11) out += apply_L11(rho, ops, c_down, c_up);
    if (cfg.l12) {
      if (cfg.exact_gamma) {
        out += lindblad_apply(rho, ej.G2, ej.G2dag, ej.G2dG2, ej.r2_down);
        if (ej.r2_up > 0)
          out += lindblad_apply(rho, ej.G2dag, ej.G2, ej.G2G2d, ej.r2_up);
      } else {
        out += apply_L12(rho, ops, rates);
      }
    }
    return out;
  };

  Trajectory traj;
  traj.dt = dt;
  traj.steps = nsteps;

  Eigen::MatrixXcd rho = 0.5 * (rho0 + rho0.adjoint());
  {
    const double tr = rho.trace().real();
    if (std::abs(tr - 1.0) > 1e-6)
      throw std::invalid_argument("evolve: initial trace " + std::to_string(tr));
    rho /= tr;
  }

  const double q = std::exp(-rates.beta_e);
  double drift_acc = 0;

  auto sample = [&](double t) {
    TrajectorySample s;
    s.t = t;
    s.coarse = project(ladders, rho, &s.coarse_residual);
    s.qdist = (rho - lift(ladders, s.coarse, q, 1e300)).norm();
    for (int sh = std::max(0, basis.L_max - 1); sh <= basis.L_max; ++sh) {
      const auto& shell = basis.shells[sh];
      for (int i = 0; i < shell.dim(); ++i)
        s.leak_top2 += rho(shell.offset + i, shell.offset + i).real();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho,
                                                       Eigen::EigenvaluesOnly);
    s.min_eig = es.eigenvalues().minCoeff();
    s.trace_drift = drift_acc;
    traj.samples.push_back(std::move(s));
    if (traj.samples.back().leak_top2 > cfg.leak_abort) {
      traj.aborted = true;
      traj.abort_reason = "cutoff leak " +
                          std::to_string(traj.samples.back().leak_top2) +
                          " above " + std::to_string(cfg.leak_abort);
    } else if (traj.samples.back().min_eig < -cfg.positivity_abort) {
      traj.aborted = true;
      traj.abort_reason = "negative eigenvalue " +
                          std::to_string(traj.samples.back().min_eig);
    }
  };

  sample(0.0);
  for (long long step = 0; step < nsteps && !traj.aborted; ++step) {
    const Eigen::MatrixXcd k1 = rhs(rho);
    const Eigen::MatrixXcd k2 = rhs(rho + (0.5 * dt) * k1);
    const Eigen::MatrixXcd k3 = rhs(rho + (0.5 * dt) * k2);
    const Eigen::MatrixXcd k4 = rhs(rho + dt * k3);
    rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    rho = 0.5 * (rho + rho.adjoint()).eval();
    const double tr = rho.trace().real();
    const double drift = std::abs(tr - 1.0);
    drift_acc += drift;
    if (drift / dt > cfg.trace_abort_rate) {
      traj.aborted = true;
      traj.abort_reason = "trace drift rate " + std::to_string(drift / dt);
      break;
    }
    rho /= tr;
    if ((step + 1) % cfg.record_every == 0 || step + 1 == nsteps)
      sample(static_cast<double>(step + 1) * dt);
  }
  traj.final_rho = std::move(rho);
  return traj;
}

namespace {

Eigen::MatrixXcd kron(const Eigen::MatrixXcd& M, const Eigen::MatrixXcd& P) {
  Eigen::MatrixXcd out(M.rows() * P.rows(), M.cols() * P.cols());
  for (int i = 0; i < M.rows(); ++i)
    for (int j = 0; j < M.cols(); ++j)
      out.block(i * P.rows(), j * P.cols(), P.rows(), P.cols()) = M(i, j) * P;
  return out;
}

// vec(L rho R) = (R^T kron L) vec(rho), column-major vec.
Eigen::MatrixXcd sandwich(const Eigen::MatrixXcd& L, const Eigen::MatrixXcd& R) {
  return kron(R.transpose(), L);
}

Eigen::MatrixXcd lindblad_super(const Eigen::MatrixXcd& L,
                                const Eigen::MatrixXcd& Ldag, double rate) {
  const Eigen::MatrixXcd LdL = Ldag * L;
  const int d = static_cast<int>(L.rows());
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(d, d);
  return rate * (2.0 * sandwich(L, Ldag) - sandwich(LdL, id) - sandwich(id, LdL));
}

}  // namespace

Eigen::MatrixXcd build_superoperator(const TruncatedBasis& basis,
                                     const CollectiveOps& ops,
                                     const RateSet& rates, bool l0, bool l11,
                                     bool l12, double eta) {
  const int d = basis.dim;
  if (d > 40)
    throw std::invalid_argument("build_superoperator: dimension above 40");
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(d, d);
  Eigen::MatrixXcd S = Eigen::MatrixXcd::Zero(d * d, d * d);
  const Eigen::MatrixXcd A = ops.A.mat().toDense();
  const Eigen::MatrixXcd Ad = ops.Adag.mat().toDense();
  const Eigen::MatrixXcd B = ops.B.mat().toDense();
  const Eigen::MatrixXcd Bd = ops.Bdag.mat().toDense();
  const Eigen::MatrixXcd C = ops.C.mat().toDense();
  const Eigen::MatrixXcd Cd = ops.Cdag.mat().toDense();
  if (l0) {
    S += lindblad_super(A, Ad, rates.gamma_down);
    S += lindblad_super(Ad, A, rates.gamma_up);
  }
  if (l11) {
    const double cd = rates.gamma_down * eta * eta;
    const double cu = rates.gamma_up * eta * eta;
    const Eigen::MatrixXcd Sd = Cd * A + Ad * C;
    const Eigen::MatrixXcd Su = C * Ad + A * Cd;
    S -= cd * (2.0 * (sandwich(A, Cd) + sandwich(C, Ad)) - sandwich(Sd, id) -
               sandwich(id, Sd));
    S -= cu * (2.0 * (sandwich(Ad, C) + sandwich(Cd, A)) - sandwich(Su, id) -
               sandwich(id, Su));
  }
  if (l12) {
    S += lindblad_super(B, Bd, rates.gamma1_down);
    S += lindblad_super(Bd, B, rates.gamma1_up);
  }
  return S;
}

Eigen::VectorXcd superop_spectrum(const Eigen::MatrixXcd& S) {
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(S, false);
  return es.eigenvalues();
}

double guard_band_l1(const TruncatedBasis& basis, const Eigen::MatrixXcd& M,
                     int max_shell) {
  double sum = 0;
  for (int i = 0; i < basis.dim; ++i) {
    if (basis.shell_of(i) > max_shell) continue;
    for (int j = 0; j < basis.dim; ++j) {
      if (basis.shell_of(j) > max_shell) continue;
      sum += std::abs(M(i, j));
    }
  }
  return sum;
}

}  // namespace bosecool
