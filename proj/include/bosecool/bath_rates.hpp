// bath_rates.hpp -- thermal bath occupations, transition rates, trap-level couplings
#pragma once

#include <complex>
#include <string>

namespace bosecool {

enum class Dispersion { massive, massless };

Dispersion dispersion_from_string(const std::string& s);
std::string to_string(Dispersion d);

// Bath and coupling parameters. Energies are measured in trap quanta, so
// beta_hw = beta * (level spacing) and beta_mu = beta * (chemical potential),
// with beta_mu <= 0. kappa_scale is the overall system-bath constant.
struct BathSpec {
  double eta = 0.1;        // Lamb-Dicke parameter of the one-quantum line
  double beta_hw = 1.0;
  double beta_mu = -1.0;
  int N = 1;               // atom number entering the collective enhancement
  double kappa_scale = 1.0;
  Dispersion dispersion = Dispersion::massive;
};

// Derived rates. gamma_down/up drive the one-quantum channel, gamma1_down/up
// the two-quantum channel (a factor eta^2 weaker). beta_e and beta_e_prime
// are the effective inverse temperatures of the respective channels:
// gamma_up / gamma_down = exp(-beta_e), gamma1_up / gamma1_down =
// exp(-2 beta_e_prime).
struct RateSet {
  double gamma_down = 0;
  double gamma_up = 0;
  double gamma1_down = 0;
  double gamma1_up = 0;
  double beta_e = 0;
  double beta_e_prime = 0;
};

// Mean occupation of the bath mode resonant with an alpha-quantum jump.
double bose_occupation(int alpha, double beta_hw, double beta_mu);

RateSet compute_rates(const BathSpec& spec);

// Back-solve kappa_scale so that gamma_down comes out at the requested value.
BathSpec bath_from_target(double gamma_down_target, double eta, double beta_hw,
                          double beta_mu, int N, Dispersion dispersion);

// Level coupling gamma_{n -> n'} of the alpha-quantum line in the small-eta
// expansion, summed through the requested order (0, 1, or 2). The expansion
// parameter is sqrt(alpha) * eta.
std::complex<double> gamma_ld(int n, int nprime, int alpha, int order,
                              double eta);

// Same coupling without expansion: the plane-wave matrix element
// integral psi_n(x) psi_n'(x) exp(-i k x) dx with x in units of the
// ground-state size, evaluated by panel quadrature.
std::complex<double> gamma_exact(int n, int nprime, double k);

}  // namespace bosecool
