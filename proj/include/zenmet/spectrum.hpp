#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>

#include "zenmet/spectral.hpp"

namespace zenmet {

/// Isolated negative-frequency eigenstate of the dressed probe-environment
/// system: pole position varpi_b < 0 and residue Z in (0, 1].
struct BoundState {
  double varpi_b;
  double Z;

  BoundState(double varpi_b_, double Z_) : varpi_b(varpi_b_), Z(Z_) {
    if (!(varpi_b < 0.0)) throw std::domain_error("BoundState: varpi_b must be < 0");
    if (!(Z > 0.0 && Z <= 1.0)) throw std::domain_error("BoundState: Z must be in (0, 1]");
  }
};

/// y(varpi) = omega0 + gamma - int_0^inf J(omega)/(omega - varpi) domega.
/// Fixed points y(varpi) = varpi below the band are the bound-state poles.
inline double y_function(const ProbeSpec& probe, const NoiseSpec& noise, double varpi) {
  if (varpi > 0.0) throw std::domain_error("y_function: varpi must be <= 0");
  return probe.mode_frequency() - dispersion_integral(noise, varpi);
}

/// Existence criterion y(0) <= 0, i.e. omega0 + gamma <= eta*omega_c*Gamma(s).
inline bool bound_state_exists(const ProbeSpec& probe, const NoiseSpec& noise) {
  return y_function(probe, noise, 0.0) <= 0.0;
}

/// Solves y(varpi) = varpi on varpi < 0.  Returns nothing when y(0) >= 0:
/// at exact marginality the pole sits on the band edge and the residue is
/// ill-defined, so the marginal case reports absent.
inline std::optional<BoundState> find_bound_state(const ProbeSpec& probe,
                                                  const NoiseSpec& noise) {
  const double y0 = y_function(probe, noise, 0.0);
  if (y0 >= 0.0) return std::nullopt;

  auto g = [&](double varpi) { return y_function(probe, noise, varpi) - varpi; };

  // g(0) = y0 < 0 and g increases without bound as varpi -> -inf.
  double lo = -probe.mode_frequency();
  int doublings = 0;
  while (g(lo) <= 0.0) {
    lo *= 2.0;
    if (++doublings > 200)
      throw std::runtime_error("find_bound_state: bracket expansion failed");
  }

  double hi = 0.0;  // g(hi) < 0
  const double tol = 1e-12 * probe.omega0;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (g(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }

  double root = 0.5 * (lo + hi);
  for (int it = 0; it < 3; ++it) {
    const double eps = 1e-7 * std::max(std::fabs(root), probe.omega0);
    const double hi_pt = std::min(root + eps, -0.25 * tol);
    const double slope = (g(hi_pt) - g(root - eps)) / (hi_pt - (root - eps));
    if (slope == 0.0) break;
    const double next = root - g(root) / slope;
    if (next < 0.0 && std::isfinite(next)) root = next;
  }

  const double residual = std::fabs(y_function(probe, noise, root) - root);
  if (!(residual < 1e-10 * probe.omega0))
    throw std::runtime_error("find_bound_state: residual above tolerance");

  const double Z = 1.0 / (1.0 + second_dispersion_integral(noise, root));
  return BoundState(root, Z);
}

/// d(varpi_b)/d(gamma) by central differences over gamma +- 1e-5*omega0.
/// Implicit differentiation of the pole condition makes this equal to Z.
inline double bound_state_gamma_sensitivity(const ProbeSpec& probe,
                                            const NoiseSpec& noise) {
  if (!find_bound_state(probe, noise))
    throw std::invalid_argument("bound_state_gamma_sensitivity: no bound state");
  const double eps = 1e-5 * probe.omega0;
  const ProbeSpec plus(probe.omega0, probe.gamma + eps);
  const ProbeSpec minus(probe.omega0, probe.gamma - eps);
  const auto bp = find_bound_state(plus, noise);
  const auto bm = find_bound_state(minus, noise);
  if (!bp || !bm)
    throw std::invalid_argument("bound_state_gamma_sensitivity: bound state lost under gamma shift");
  return (bp->varpi_b - bm->varpi_b) / (2.0 * eps);
}

}  // namespace zenmet
