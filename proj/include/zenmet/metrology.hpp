#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "zenmet/dynamics.hpp"

namespace zenmet {

/// Coherent (x) squeezed interferometer input.  N photons in total, a
/// fraction beta of them from the squeezed-vacuum port:
///   r = asinh(sqrt(beta*N)),  |alpha| = sqrt((1-beta)*N),
///   alpha = |alpha| e^{i phi_coh},  xi = r e^{i phi_sq}.
struct InputState {
  double N;
  double beta;
  double phi_coh;
  double phi_sq;
  double r;
  double alpha_mag;

  InputState(double N_, double beta_, double phi_coh_ = 0.0, double phi_sq_ = 0.0)
      : N(N_), beta(beta_), phi_coh(phi_coh_), phi_sq(phi_sq_) {
    if (!(N > 0.0)) throw std::domain_error("InputState: N must be > 0");
    if (!(beta >= 0.0 && beta < 1.0))
      throw std::domain_error("InputState: beta must lie in [0, 1)");
    r = std::asinh(std::sqrt(beta * N));
    alpha_mag = std::sqrt((1.0 - beta) * N);
  }

  double sinh2r() const { return beta * N; }           // sinh^2 r
  double cosh2r() const { return 1.0 + beta * N; }     // cosh^2 r
  complexd alpha() const { return std::polar(alpha_mag, phi_coh); }
  complexd xi() const { return std::polar(r, phi_sq); }
};

/// beta that optimizes the squeezed fraction at large N, (2 sqrt(N))^-1.
inline double optimal_beta(double N) {
  if (!(N > 1.0)) throw std::domain_error("optimal_beta: needs N > 1");
  return 0.5 / std::sqrt(N);
}

struct Stats {
  double mean_M;
  double delta_M;
};

namespace detail {

// |alpha cosh r - alpha* e^{i phi_sq} sinh r|^2 + sinh^2 r : the coefficient
// of the quadrature that carries the phase information.
inline double phase_quadrature_term(const InputState& st) {
  const double sh = std::sinh(st.r);
  const double ch = std::cosh(st.r);
  const complexd a = st.alpha();
  const complexd v = a * ch - std::conj(a) * std::polar(sh, st.phi_sq);
  return std::norm(v) + st.sinh2r();
}

// |alpha|^2 + sinh^2(2r)/2 : the coefficient of the insensitive quadrature.
inline double amplitude_quadrature_term(const InputState& st) {
  return st.alpha_mag * st.alpha_mag + 2.0 * st.sinh2r() * st.cosh2r();
}

}  // namespace detail

/// Measurement statistics of the photon-difference observable with a lossy
/// probe amplitude c at time t:
///   Mbar   = Re[e^{i omega0 t} c] (sinh^2 r - |alpha|^2)
///   dM^2   = Im[..]^2 (phase term) + Re[..]^2 (amplitude term)
///          + (1-|c|^2)(|alpha|^2 + sinh^2 r)/2.
inline Stats noisy_statistics(const InputState& state, complexd c, double omega0,
                              double t) {
  const double cmod2 = std::norm(c);
  if (cmod2 > (1.0 + 1e-6) * (1.0 + 1e-6))
    throw std::invalid_argument("noisy_statistics: |c| exceeds 1 + 1e-6");
  const complexd C = std::exp(complexd(0.0, omega0 * t)) * c;
  const double re = C.real();
  const double im = C.imag();
  const double imbalance = state.sinh2r() - state.alpha_mag * state.alpha_mag;
  const double loss = std::max(0.0, 1.0 - cmod2);
  const double var = im * im * detail::phase_quadrature_term(state) +
                     re * re * detail::amplitude_quadrature_term(state) +
                     0.5 * loss * state.N;
  return {re * imbalance, std::sqrt(var)};
}

/// Noiseless statistics; equal to noisy_statistics with c = e^{-i(omega0+gamma)t}.
inline Stats ideal_statistics(const InputState& state, double gamma, double t) {
  if (t < 0.0) throw std::domain_error("ideal_statistics: t must be >= 0");
  const double cg = std::cos(gamma * t);
  const double sg = std::sin(gamma * t);
  const double imbalance = state.sinh2r() - state.alpha_mag * state.alpha_mag;
  const double var = cg * cg * detail::amplitude_quadrature_term(state) +
                     sg * sg * detail::phase_quadrature_term(state);
  return {imbalance * cg, std::sqrt(var)};
}

/// Best ideal precision at phase-matched working points,
///   min dgamma = sqrt((1-beta) e^{-2r} + beta) / (t sqrt(N) |1-2beta|).
/// beta = 0 gives the shot-noise limit 1/(t sqrt(N)).
inline double ideal_min_delta_gamma(const InputState& state, double t) {
  if (!(t > 0.0)) throw std::domain_error("ideal_min_delta_gamma: t must be > 0");
  if (state.beta == 0.5)
    throw std::domain_error("ideal_min_delta_gamma: beta = 1/2 is degenerate (Mbar loses its gamma dependence)");
  const double e2r = std::exp(-2.0 * state.r);
  return std::sqrt((1.0 - state.beta) * e2r + state.beta) /
         (t * std::sqrt(state.N) * std::fabs(1.0 - 2.0 * state.beta));
}

/// Zeno limit (t N^{3/4})^{-1}, the large-N optimum of the ideal formula.
inline double zeno_limit(double N, double t) {
  if (!(N > 0.0) || !(t > 0.0)) throw std::domain_error("zeno_limit: need N > 0, t > 0");
  return 1.0 / (t * std::pow(N, 0.75));
}

/// Long-time precision in the bound-state regime for general beta:
///   sqrt((1-beta) e^{-2r} + beta + (1-Z^2)/(2Z^2)) / (Z t sqrt(N) |1-2beta|).
/// Z = 1 recovers the ideal formula.
inline double asymptotic_min_delta_gamma(double N, double beta, double Z, double t) {
  if (!(Z > 1e-6 && Z <= 1.0))
    throw std::domain_error("asymptotic_min_delta_gamma: Z must lie in (1e-6, 1]");
  if (!(t > 0.0)) throw std::domain_error("asymptotic_min_delta_gamma: t must be > 0");
  const InputState state(N, beta);
  if (beta == 0.5)
    throw std::domain_error("asymptotic_min_delta_gamma: beta = 1/2 is degenerate");
  const double e2r = std::exp(-2.0 * state.r);
  const double zterm = (1.0 - Z * Z) / (2.0 * Z * Z);
  return std::sqrt((1.0 - beta) * e2r + beta + zterm) /
         (Z * t * std::sqrt(N) * std::fabs(1.0 - 2.0 * beta));
}

/// The beta-optimized large-N form of the same law,
///   (t N^{3/4})^{-1} / Z * sqrt(1 + (1-Z^2) sqrt(N) / (2 Z^2)),
/// which uses e^{-2r} ~ 1/(4 sinh^2 r) and reduces to zeno_limit at Z = 1.
inline double zeno_limit_with_residue(double N, double Z, double t) {
  if (!(Z > 1e-6 && Z <= 1.0))
    throw std::domain_error("zeno_limit_with_residue: Z must lie in (1e-6, 1]");
  const double zterm = (1.0 - Z * Z) * std::sqrt(N) / (2.0 * Z * Z);
  return zeno_limit(N, t) / Z * std::sqrt(1.0 + zterm);
}

/// Markovian-regime optimum over beta, min dgamma ~ sqrt((e^{2 kappa t}-1)/(2 N t^2)).
inline double markovian_min_delta_gamma(double N, double kappa, double t) {
  if (!(N > 0.0) || !(t > 0.0) || !(kappa >= 0.0))
    throw std::domain_error("markovian_min_delta_gamma: need N > 0, t > 0, kappa >= 0");
  return std::sqrt(std::expm1(2.0 * kappa * t) / (2.0 * N * t * t));
}

/// Its best value over t, attained at t = 1/kappa:  e kappa / sqrt(2N).
/// (This drops the -1 in e^{2 kappa t} - 1 ~ e^{2 kappa t}; the exact curve's
/// optimum differs at O(e^{-2}).)  Shot-noise scaling in N.
inline double markovian_optimal_delta_gamma(double N, double kappa) {
  if (!(N > 0.0) || !(kappa >= 0.0))
    throw std::domain_error("markovian_optimal_delta_gamma: need N > 0, kappa >= 0");
  return M_E * kappa / std::sqrt(2.0 * N);
}

/// dgamma(t) along a trajectory, with the measurement statistics that
/// produced it.  Entries where |dMbar/dgamma| vanishes are NaN (undefined),
/// never zero.  local_minima stays empty here; extraction is a separate step.
struct PrecisionSeries {
  std::vector<double> times;
  std::vector<double> mean_M;
  std::vector<double> delta_M;
  std::vector<double> delta_gamma;
  std::vector<std::pair<double, double>> local_minima;
};

/// Pointwise dgamma = dM / |dMbar/dgamma| with the gamma-derivative taken
/// through the sensitivity amplitude: dMbar/dgamma = Re[e^{i omega0 t} dc/dgamma]
/// * (sinh^2 r - |alpha|^2).  delta_gamma_series_fd below is the
/// finite-difference cross-check route; this one is the production path.
inline PrecisionSeries delta_gamma_series(const InputState& state, const Trajectory& traj) {
  if (!traj.has_sensitivity())
    throw std::invalid_argument("delta_gamma_series: trajectory lacks dc_dgamma");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double imbalance = state.sinh2r() - state.alpha_mag * state.alpha_mag;
  const std::size_t n = traj.times.size();
  PrecisionSeries series;
  series.times = traj.times;
  series.mean_M.resize(n);
  series.delta_M.resize(n);
  series.delta_gamma.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = traj.times[i];
    const Stats st = noisy_statistics(state, traj.c[i], traj.probe.omega0, t);
    series.mean_M[i] = st.mean_M;
    series.delta_M[i] = st.delta_M;
    const complexd phase = std::exp(complexd(0.0, traj.probe.omega0 * t));
    const double dMdg = (phase * traj.dc_dgamma[i]).real() * imbalance;
    const double threshold = 1e-12 * t * state.N;
    series.delta_gamma[i] =
        std::fabs(dMdg) <= threshold ? nan : st.delta_M / std::fabs(dMdg);
  }
  return series;
}

/// Cross-check route: the gamma-derivative of Mbar by central differences of
/// two amplitude solves at gamma +- eps, on a grid shared with the production
/// path.  Step-size sensitive; kept for validating delta_gamma_series.
inline PrecisionSeries delta_gamma_series_fd(const InputState& state,
                                             const Trajectory& plus,
                                             const Trajectory& minus, double eps) {
  if (plus.times.size() != minus.times.size())
    throw std::invalid_argument("delta_gamma_series_fd: mismatched grids");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double imbalance = state.sinh2r() - state.alpha_mag * state.alpha_mag;
  const std::size_t n = plus.times.size();
  PrecisionSeries series;
  series.times = plus.times;
  series.mean_M.resize(n);
  series.delta_M.resize(n);
  series.delta_gamma.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = plus.times[i];
    const complexd mid = 0.5 * (plus.c[i] + minus.c[i]);
    const Stats st = noisy_statistics(state, mid, plus.probe.omega0, t);
    series.mean_M[i] = st.mean_M;
    series.delta_M[i] = st.delta_M;
    const complexd phase = std::exp(complexd(0.0, plus.probe.omega0 * t));
    const complexd dc = (plus.c[i] - minus.c[i]) / (2.0 * eps);
    const double dMdg = (phase * dc).real() * imbalance;
    const double threshold = 1e-12 * t * state.N;
    series.delta_gamma[i] =
        std::fabs(dMdg) <= threshold ? nan : st.delta_M / std::fabs(dMdg);
  }
  return series;
}

}  // namespace zenmet
