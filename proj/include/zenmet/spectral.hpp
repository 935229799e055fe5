#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include "zenmet/quadrature.hpp"

namespace zenmet {

using complexd = std::complex<double>;

/// Ohmic-family environment: J(omega) = eta * omega * (omega/omega_c)^(s-1)
/// * exp(-omega/omega_c).  s < 1 sub-Ohmic, s = 1 Ohmic, s > 1 super-Ohmic.
/// eta = 0 is the noiseless sentinel.
struct NoiseSpec {
  double eta;
  double omega_c;
  double s;

  NoiseSpec(double eta_, double omega_c_, double s_)
      : eta(eta_), omega_c(omega_c_), s(s_) {
    if (!(eta >= 0.0)) throw std::domain_error("NoiseSpec: eta must be >= 0");
    if (!(omega_c > 0.0)) throw std::domain_error("NoiseSpec: omega_c must be > 0");
    if (!(s > 0.0)) throw std::domain_error("NoiseSpec: s must be > 0");
  }
};

/// Probe mode: bare frequency omega0 (the unit scale) and the encoded
/// frequency gamma.  The dressed mode frequency omega0 + gamma stays positive.
struct ProbeSpec {
  double omega0;
  double gamma;

  ProbeSpec(double omega0_, double gamma_) : omega0(omega0_), gamma(gamma_) {
    if (!(omega0 > 0.0)) throw std::domain_error("ProbeSpec: omega0 must be > 0");
    if (!(omega0 + gamma > 0.0))
      throw std::domain_error("ProbeSpec: omega0 + gamma must be > 0");
  }

  double mode_frequency() const { return omega0 + gamma; }
};

/// Upper truncation for all frequency-domain integrals.  The exponential
/// cutoff makes the tail beyond omega_c*max(50, s+40) smaller than 1e-14 of
/// the total for every s > 0 we support.
inline double integration_cutoff(const NoiseSpec& noise) {
  return noise.omega_c * std::max(50.0, noise.s + 40.0);
}

/// J(omega); defined as 0 at omega = 0 for all s > 0 (the formula limit).
inline double spectral_density(const NoiseSpec& noise, double omega) {
  if (omega < 0.0) throw std::domain_error("spectral_density: omega must be >= 0");
  if (omega == 0.0 || noise.eta == 0.0) return 0.0;
  return noise.eta * omega * std::pow(omega / noise.omega_c, noise.s - 1.0) *
         std::exp(-omega / noise.omega_c);
}

/// d/domega of J; used by the principal-value window near its endpoint.
inline double spectral_density_derivative(const NoiseSpec& noise, double omega) {
  if (omega <= 0.0) return 0.0;
  const double x = omega / noise.omega_c;
  return noise.eta * std::pow(x, noise.s - 1.0) * std::exp(-x) * (noise.s - x);
}

/// [J(a-u) - J(a+u)] / u evaluated without cancellation: both densities are
/// exponentials of s*log(omega) - omega/omega_c, so their difference reduces
/// to expm1 of the exponent gap.  Naive subtraction turns into roundoff noise
/// of size eps*J(a)/u well before u reaches zero.
inline double spectral_density_fold(const NoiseSpec& noise, double a, double u) {
  if (noise.eta == 0.0) return 0.0;
  if (u >= a) return (spectral_density(noise, a - u) - spectral_density(noise, a + u)) / u;
  if (u < 1e-14 * a) return -2.0 * spectral_density_derivative(noise, a);
  // exponent gap: s*log((a-u)/(a+u)) + 2u/omega_c
  const double gap = noise.s * std::log1p(-2.0 * u / (a + u)) + 2.0 * u / noise.omega_c;
  const double jplus = spectral_density(noise, a + u);
  return jplus * std::expm1(gap) / u;
}

/// Memory kernel f(t) = int_0^inf J(omega) e^{-i omega t} domega, evaluated
/// through the closed form eta * omega_c^2 * Gamma(s+1) * (1+i omega_c t)^-(s+1).
inline complexd memory_kernel(const NoiseSpec& noise, double t) {
  if (t < 0.0) throw std::domain_error("memory_kernel: t must be >= 0");
  if (noise.eta == 0.0) return {0.0, 0.0};
  const double amp = noise.eta * noise.omega_c * noise.omega_c * std::tgamma(noise.s + 1.0);
  return amp * std::pow(complexd(1.0, noise.omega_c * t), -(noise.s + 1.0));
}

/// Exact primitive int_{t1}^{t2} f(tau) dtau.  These are the product-
/// integration moments of the Volterra solver, so they must stay closed-form.
inline complexd kernel_primitive(const NoiseSpec& noise, double t1, double t2) {
  if (t1 < 0.0 || t1 > t2) throw std::domain_error("kernel_primitive: need 0 <= t1 <= t2");
  if (noise.eta == 0.0 || t1 == t2) return {0.0, 0.0};
  const double amp = noise.eta * noise.omega_c * std::tgamma(noise.s + 1.0) / noise.s;
  const complexd a = std::pow(complexd(1.0, noise.omega_c * t1), -noise.s);
  const complexd b = std::pow(complexd(1.0, noise.omega_c * t2), -noise.s);
  // 1/(i s) = -i/s
  return complexd(0.0, -amp) * (a - b);
}

/// int_0^inf J(omega)/(omega - varpi) domega for varpi <= 0.  At varpi = 0 the
/// integrand is omega^(s-1)-like and still integrable for s > 0; the value
/// there is eta * omega_c * Gamma(s).
inline double dispersion_integral(const NoiseSpec& noise, double varpi) {
  if (varpi > 0.0)
    throw std::domain_error("dispersion_integral: varpi must be <= 0 (use principal_value_shift above the band)");
  if (noise.eta == 0.0) return 0.0;
  auto g = [&](double w) { return spectral_density(noise, w) / (w - varpi); };
  return quad::integrate_from_zero(g, noise.omega_c, integration_cutoff(noise),
                                   varpi == 0.0 ? noise.s : std::min(noise.s + 1.0, 2.0));
}

/// int_0^inf J(omega)/(varpi - omega)^2 domega for varpi < 0; equals
/// d/dvarpi of dispersion_integral and enters the bound-state residue.
inline double second_dispersion_integral(const NoiseSpec& noise, double varpi) {
  if (varpi >= 0.0)
    throw std::domain_error("second_dispersion_integral: varpi must be < 0");
  if (noise.eta == 0.0) return 0.0;
  auto g = [&](double w) {
    const double d = w - varpi;
    return spectral_density(noise, w) / (d * d);
  };
  return quad::integrate_from_zero(g, noise.omega_c, integration_cutoff(noise),
                                   std::min(noise.s + 1.0, 2.0));
}

/// Cauchy principal value P int_0^inf J(omega)/(a - omega) domega, a > 0.
/// The window (a-delta, a+delta) is folded symmetrically about a, where the
/// 1/(a-omega) poles cancel pairwise:
///   P int_window = int_0^delta [J(a-u) - J(a+u)]/u du,
/// and the remainder is ordinary quadrature.  delta = a * window_fraction;
/// the default 0.1 reproduces the 0.01 result to ~1e-10 relative.
inline double principal_value_shift(const NoiseSpec& noise, double a,
                                    double window_fraction = 0.1) {
  if (!(a > 0.0)) throw std::domain_error("principal_value_shift: a must be > 0");
  if (!(window_fraction > 0.0 && window_fraction < 1.0))
    throw std::domain_error("principal_value_shift: window_fraction must be in (0, 1)");
  if (noise.eta == 0.0) return 0.0;

  const double delta = a * window_fraction;
  const double omega_hi = std::max(integration_cutoff(noise), 2.0 * a);

  auto outer = [&](double w) { return spectral_density(noise, w) / (a - w); };
  const double left =
      quad::integrate_from_zero(outer, std::min(noise.omega_c, a - delta),
                                a - delta, std::min(noise.s + 1.0, 2.0));
  const double right = quad::integrate(outer, a + delta, omega_hi);

  auto folded = [&](double u) { return spectral_density_fold(noise, a, u); };
  const double window = quad::integrate(folded, 0.0, delta);

  return left + right + window;
}

}  // namespace zenmet
