#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "zenmet/spectral.hpp"
#include "zenmet/spectrum.hpp"

namespace zenmet {

/// Probe amplitude record on a uniform grid: c(0) = 1 and, when solved
/// jointly, the sensitivity dc/dgamma.  The lost weight sum_k |d_k|^2 is
/// carried implicitly as 1 - |c|^2.
struct Trajectory {
  ProbeSpec probe{1.0, 0.0};
  NoiseSpec noise{0.0, 1.0, 1.0};
  double h = 0.0;
  std::vector<double> times;
  std::vector<complexd> c;
  std::vector<complexd> dc_dgamma;  // empty unless solve_sensitivity produced it

  bool has_sensitivity() const { return !dc_dgamma.empty(); }
};

/// Markovian loss rate kappa = pi*J(omega0+gamma) and Lamb-type shift
/// Delta = P int J(omega)/(omega0+gamma-omega) domega.
struct MarkovianParams {
  double kappa;
  double delta;

  MarkovianParams(double kappa_, double delta_) : kappa(kappa_), delta(delta_) {
    if (!(kappa >= 0.0)) throw std::domain_error("MarkovianParams: kappa must be >= 0");
  }
};

/// Step that resolves both the probe period and the kernel memory time.
inline double default_step(const ProbeSpec& probe, const NoiseSpec& noise) {
  return std::min(0.02 / probe.omega0, 0.2 / noise.omega_c);
}

namespace detail {

// Solves c' = -i(omega0+gamma) c - int_0^t f(t-tau) c(tau) dtau, c(0) = 1,
// optionally together with q = dc/dgamma, which obeys the same equation with
// source -i c(t) and q(0) = 0.
//
// Scheme: variation of constants over each step (the free rotation
// e^{-i Omega h} is applied exactly, so eta = 0 propagates to roundoff),
// trapezoidal weights on the convolution value, and product integration for
// the history: c is taken piecewise flat at substep averages while the
// kernel moments w_k = int f over each substep come from kernel_primitive in
// closed form.  Implicit in the newest value, solved per step in closed
// form; O(n^2) overall.
inline Trajectory solve_impl(const ProbeSpec& probe, const NoiseSpec& noise,
                             double t_max, double h, bool with_sensitivity) {
  if (!(t_max > 0.0)) throw std::domain_error("solve_c: t_max must be > 0");
  if (!(h > 0.0)) throw std::domain_error("solve_c: h must be > 0");
  if (h * noise.omega_c > 0.5)
    std::cerr << "zenmet: warning: h*omega_c = " << h * noise.omega_c
              << " > 0.5; the kernel memory time is under-resolved\n";

  const std::size_t n = static_cast<std::size_t>(
      std::max<long long>(1, std::llround(t_max / h)));
  const double omega = probe.mode_frequency();
  const complexd rot = std::exp(complexd(0.0, -omega * h));

  // w_k = int_{(k-1)h}^{kh} f, stored reversed so the history sum walks both
  // arrays forward:  w[m+1-j] = wrev[n-m+j].
  std::vector<double> wrev_re(n + 1, 0.0), wrev_im(n + 1, 0.0);
  for (std::size_t k = 1; k <= n; ++k) {
    const complexd w = kernel_primitive(noise, (k - 1) * h, k * h);
    wrev_re[n + 1 - k] = w.real();
    wrev_im[n + 1 - k] = w.imag();
  }
  const complexd w1(wrev_re[n], wrev_im[n]);
  const complexd denom = 1.0 + 0.25 * h * w1;

  Trajectory traj{probe, noise, h, {}, {}, {}};
  traj.times.resize(n + 1);
  traj.c.resize(n + 1);
  if (with_sensitivity) traj.dc_dgamma.assign(n + 1, complexd{});
  for (std::size_t i = 0; i <= n; ++i) traj.times[i] = static_cast<double>(i) * h;
  traj.c[0] = 1.0;

  std::vector<double> cbar_re(n, 0.0), cbar_im(n, 0.0);
  std::vector<double> qbar_re, qbar_im;
  if (with_sensitivity) {
    qbar_re.assign(n, 0.0);
    qbar_im.assign(n, 0.0);
  }

  complexd conv_c = 0.0;  // I_m for c
  complexd conv_q = 0.0;  // I_m for q
  const complexd i_unit(0.0, 1.0);

  for (std::size_t m = 0; m < n; ++m) {
    // History part of I_{m+1}: sum over completed substeps j < m.
    double sr = 0.0, si = 0.0;
    {
      const double* __restrict pr = cbar_re.data();
      const double* __restrict pi = cbar_im.data();
      const double* __restrict wr = wrev_re.data() + (n - m);
      const double* __restrict wi = wrev_im.data() + (n - m);
      for (std::size_t j = 0; j < m; ++j) {
        sr += pr[j] * wr[j] - pi[j] * wi[j];
        si += pr[j] * wi[j] + pi[j] * wr[j];
      }
    }
    const complexd hist(sr, si);

    const complexd cm = traj.c[m];
    const complexd cnew =
        (rot * (cm - 0.5 * h * conv_c) - 0.5 * h * (hist + 0.5 * w1 * cm)) / denom;
    if (!std::isfinite(cnew.real()) || !std::isfinite(cnew.imag()))
      throw std::runtime_error("solve_c: nonfinite value at step " +
                               std::to_string(m + 1) + " (t = " +
                               std::to_string((m + 1) * h) + ")");
    if (std::abs(cnew) > 1.0 + 1e-6)
      throw std::runtime_error("solve_c: contraction violated at step " +
                               std::to_string(m + 1));
    traj.c[m + 1] = cnew;
    const complexd cb = 0.5 * (cm + cnew);
    cbar_re[m] = cb.real();
    cbar_im[m] = cb.imag();
    conv_c = hist + w1 * cb;

    if (with_sensitivity) {
      double qr = 0.0, qi = 0.0;
      const double* __restrict pr = qbar_re.data();
      const double* __restrict pi = qbar_im.data();
      const double* __restrict wr = wrev_re.data() + (n - m);
      const double* __restrict wi = wrev_im.data() + (n - m);
      for (std::size_t j = 0; j < m; ++j) {
        qr += pr[j] * wr[j] - pi[j] * wi[j];
        qi += pr[j] * wi[j] + pi[j] * wr[j];
      }
      const complexd hist_q(qr, qi);
      const complexd qm = traj.dc_dgamma[m];
      const complexd qnew = (rot * (qm - 0.5 * h * (conv_q + i_unit * cm)) -
                             0.5 * h * (hist_q + 0.5 * w1 * qm) -
                             0.5 * h * i_unit * cnew) /
                            denom;
      if (!std::isfinite(qnew.real()) || !std::isfinite(qnew.imag()))
        throw std::runtime_error("solve_sensitivity: nonfinite value at step " +
                                 std::to_string(m + 1));
      traj.dc_dgamma[m + 1] = qnew;
      const complexd qb = 0.5 * (qm + qnew);
      qbar_re[m] = qb.real();
      qbar_im[m] = qb.imag();
      conv_q = hist_q + w1 * qb;
    }
  }
  return traj;
}

}  // namespace detail

/// Exact non-Markovian amplitude c(t) on [0, round(t_max/h)*h].
inline Trajectory solve_c(const ProbeSpec& probe, const NoiseSpec& noise,
                          double t_max, double h) {
  return detail::solve_impl(probe, noise, t_max, h, false);
}

/// c(t) and dc/dgamma on the same grid with the same scheme.
inline Trajectory solve_sensitivity(const ProbeSpec& probe, const NoiseSpec& noise,
                                    double t_max, double h) {
  return detail::solve_impl(probe, noise, t_max, h, true);
}

inline MarkovianParams markovian_params(const ProbeSpec& probe, const NoiseSpec& noise) {
  const double omega = probe.mode_frequency();
  const double kappa = M_PI * spectral_density(noise, omega);
  const double delta = principal_value_shift(noise, omega);
  return MarkovianParams(kappa, delta);
}

/// Weak-coupling closed form c(t) = exp(-[kappa + i(omega0+gamma+Delta)] t).
inline complexd markovian_c(const MarkovianParams& params, const ProbeSpec& probe,
                            double t) {
  if (t < 0.0) throw std::domain_error("markovian_c: t must be >= 0");
  return std::exp(complexd(-params.kappa * t,
                           -(probe.mode_frequency() + params.delta) * t));
}

/// Pole contribution Z e^{-i varpi_b t} for a raw (Z, varpi_b) pair; with
/// Z = 1 and varpi_b = omega0 + gamma this is the decoupled rotation, which
/// fixes the sign convention.
inline complexd asymptotic_c(double Z, double varpi_b, double t) {
  return Z * std::exp(complexd(0.0, -varpi_b * t));
}

/// Long-time pole contribution Z e^{-i varpi_b t}.  Not valid at short times:
/// asymptotic_c(0) = Z < 1 while c(0) = 1; the difference is the band
/// transient, which dies out by out-of-phase interference.
inline complexd asymptotic_c(const BoundState& bound, double t) {
  return asymptotic_c(bound.Z, bound.varpi_b, t);
}

/// Mean and standard deviation of |c| over the final fraction of the window
/// (the operational definition of the plateau).
struct PlateauStats {
  double mean;
  double stddev;
};

inline PlateauStats plateau_stats(const Trajectory& traj, double final_fraction = 0.2) {
  const std::size_t n = traj.c.size();
  std::size_t start = static_cast<std::size_t>(static_cast<double>(n) * (1.0 - final_fraction));
  if (start >= n) start = n - 1;
  double sum = 0.0, sum2 = 0.0;
  const std::size_t count = n - start;
  for (std::size_t i = start; i < n; ++i) {
    const double a = std::abs(traj.c[i]);
    sum += a;
    sum2 += a * a;
  }
  const double mean = sum / static_cast<double>(count);
  const double var = std::max(0.0, sum2 / static_cast<double>(count) - mean * mean);
  return {mean, std::sqrt(var)};
}

}  // namespace zenmet
