// bath_rates.cpp -- rate formulas and the plane-wave coupling quadrature
#include "bosecool/bath_rates.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace bosecool {

namespace {

// Density-of-states weight of the alpha-quantum line.
double dos_weight(int alpha, Dispersion d) {
  return d == Dispersion::massive ? 1.0 / std::sqrt(static_cast<double>(alpha))
                                  : 1.0;
}

void validate(const BathSpec& b) {
  if (b.eta <= 0) throw std::invalid_argument("bath: eta must be positive");
  if (b.N < 1) throw std::invalid_argument("bath: N must be at least 1");
  if (b.kappa_scale <= 0)
    throw std::invalid_argument("bath: kappa_scale must be positive");
  if (b.beta_hw <= 0)
    throw std::invalid_argument("bath: beta_hw must be positive");
  if (b.beta_mu > 0)
    throw std::invalid_argument("bath: beta_mu must be non-positive");
}

}  // namespace

Dispersion dispersion_from_string(const std::string& s) {
  if (s == "massive") return Dispersion::massive;
  if (s == "massless") return Dispersion::massless;
  throw std::invalid_argument("dispersion must be 'massive' or 'massless'");
}

std::string to_string(Dispersion d) {
  return d == Dispersion::massive ? "massive" : "massless";
}

double bose_occupation(int alpha, double beta_hw, double beta_mu) {
  if (alpha < 1) throw std::invalid_argument("bose_occupation: alpha >= 1");
  if (beta_hw <= 0)
    throw std::invalid_argument("bose_occupation: beta_hw must be positive");
  if (beta_mu > 0)
    throw std::invalid_argument("bose_occupation: beta_mu must be non-positive");
  const double x = std::exp(beta_mu - alpha * beta_hw);
  if (x >= 1.0)
    throw std::invalid_argument("bose_occupation: occupation diverges");
  return x / (1.0 - x);
}

RateSet compute_rates(const BathSpec& b) {
  validate(b);
  const double n1 = bose_occupation(1, b.beta_hw, b.beta_mu);
  const double n2 = bose_occupation(2, b.beta_hw, b.beta_mu);
  const double d1 = dos_weight(1, b.dispersion);
  const double d2 = dos_weight(2, b.dispersion);
  const double base = b.kappa_scale * b.N;
  const double e2 = b.eta * b.eta;
  // The two-quantum line carries sqrt(2) eta in its exponent; the quartic
  // coefficient (sqrt(2) eta)^4 / 4 collapses to eta^4.
  const double e4 = e2 * e2;
  RateSet r;
  r.gamma_down = base * e2 * (n1 + 1.0) * d1;
  r.gamma_up = base * e2 * n1 * d1;
  r.gamma1_down = base * e4 * (n2 + 1.0) * d2;
  r.gamma1_up = base * e4 * n2 * d2;
  r.beta_e = b.beta_hw - b.beta_mu;
  r.beta_e_prime = b.beta_hw - 0.5 * b.beta_mu;
  return r;
}

BathSpec bath_from_target(double gamma_down_target, double eta, double beta_hw,
                          double beta_mu, int N, Dispersion dispersion) {
  if (gamma_down_target <= 0)
    throw std::invalid_argument("bath: gamma_down target must be positive");
  BathSpec b;
  b.eta = eta;
  b.beta_hw = beta_hw;
  b.beta_mu = beta_mu;
  b.N = N;
  b.dispersion = dispersion;
  b.kappa_scale = 1.0;
  validate(b);
  const double n1 = bose_occupation(1, beta_hw, beta_mu);
  b.kappa_scale = gamma_down_target /
                  (N * eta * eta * (n1 + 1.0) * dos_weight(1, dispersion));
  return b;
}

std::complex<double> gamma_ld(int n, int nprime, int alpha, int order,
                              double eta) {
  if (n < 0 || nprime < 0)
    throw std::invalid_argument("gamma_ld: negative level");
  if (alpha < 1) throw std::invalid_argument("gamma_ld: alpha >= 1");
  if (order < 0 || order > 2)
    throw std::invalid_argument("gamma_ld: order must be 0, 1, or 2");
  if (eta <= 0) throw std::invalid_argument("gamma_ld: eta must be positive");
  const double ea = std::sqrt(static_cast<double>(alpha)) * eta;
  std::complex<double> out(0.0, 0.0);
  if (order >= 0 && nprime == n) out += 1.0;
  if (order >= 1) {
    if (nprime == n + 1) out += std::complex<double>(0, -ea * std::sqrt(n + 1.0));
    if (nprime == n - 1)
      out += std::complex<double>(0, -ea * std::sqrt(static_cast<double>(n)));
  }
  if (order >= 2) {
    const double c = -0.5 * ea * ea;
    if (nprime == n + 2) out += c * std::sqrt((n + 1.0) * (n + 2.0));
    if (nprime == n) out += c * (2.0 * n + 1.0);
    if (nprime == n - 2) out += c * std::sqrt(n * (n - 1.0));
  }
  return out;
}

std::complex<double> gamma_exact(int n, int nprime, double k) {
  if (n < 0 || nprime < 0)
    throw std::invalid_argument("gamma_exact: negative level");
  if (n > 200 || nprime > 200)
    throw std::invalid_argument("gamma_exact: level too large for quadrature");

  // 16-point Gauss-Legendre nodes and weights on [-1, 1].
  static const double gx[8] = {
      0.09501250983763744, 0.2816035507792589, 0.4580167776572274,
      0.6178762444026438,  0.7554044083550030, 0.8656312023878318,
      0.9445750230732326,  0.9894009349916499};
  static const double gw[8] = {
      0.1894506104550685,  0.1826034150449236,  0.1691565193950025,
      0.1495959888165767,  0.1246289712555339,  0.09515851168249278,
      0.06225352393864789, 0.02715245941175409};

  // x in units of the ground-state size a; the dimensionless eigenfunction is
  // psi_n(x) = phi_n(x / ell) / sqrt(ell) with ell = sqrt(2) and phi_n the
  // unit-width Hermite functions.
  const double ell = std::sqrt(2.0);
  const int nmax = std::max(n, nprime);
  const double X = ell * std::sqrt(2.0 * nmax + 1.0) + 10.0;
  const int panels = static_cast<int>(std::ceil(2.0 * X));

  std::vector<double> phi(nmax + 1);
  auto hermite = [&](double xi) {
    phi[0] = std::pow(M_PI, -0.25) * std::exp(-0.5 * xi * xi);
    if (nmax >= 1) phi[1] = std::sqrt(2.0) * xi * phi[0];
    for (int j = 1; j < nmax; ++j)
      phi[j + 1] = std::sqrt(2.0 / (j + 1.0)) * xi * phi[j] -
                   std::sqrt(j / (j + 1.0)) * phi[j - 1];
  };

  std::complex<double> acc(0.0, 0.0);
  const double width = 2.0 * X / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = -X + (p + 0.5) * width;
    const double half = 0.5 * width;
    for (int i = 0; i < 8; ++i) {
      for (int sign = -1; sign <= 1; sign += 2) {
        const double x = mid + sign * half * gx[i];
        hermite(x / ell);
        const double dens = phi[n] * phi[nprime] / ell;
        acc += gw[i] * half * dens *
               std::complex<double>(std::cos(k * x), -std::sin(k * x));
      }
    }
  }
  return acc;
}

}  // namespace bosecool
