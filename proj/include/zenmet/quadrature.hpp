#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <type_traits>
#include <utility>

namespace zenmet::quad {

namespace detail {

// Gauss-Kronrod 7-15 nodes and weights on [-1, 1] (QUADPACK values).
inline constexpr double kGkNodes[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000};

inline constexpr double kKronrodWeights[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714};

inline constexpr double kGaussWeights[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

template <class T>
double value_norm(const T& v) {
  if constexpr (std::is_same_v<T, std::complex<double>>)
    return std::abs(v);
  else
    return std::fabs(v);
}

// One Gauss-Kronrod 7-15 panel; returns the Kronrod estimate and the
// |K15 - G7| error indicator.
template <class F>
auto gk15(F& f, double a, double b, double& err) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  using R = decltype(f(mid));
  R fc = f(mid);
  R res_k = fc * kKronrodWeights[7];
  R res_g = fc * kGaussWeights[3];
  for (int i = 0; i < 7; ++i) {
    const double dx = half * kGkNodes[i];
    R f1 = f(mid - dx);
    R f2 = f(mid + dx);
    res_k += (f1 + f2) * kKronrodWeights[i];
    if (i % 2 == 1) res_g += (f1 + f2) * kGaussWeights[i / 2];
  }
  res_k *= half;
  res_g *= half;
  err = value_norm(res_k - res_g);
  return res_k;
}

template <class F, class R>
void adapt(F& f, double a, double b, double budget, int depth, int max_depth,
           R& acc) {
  double err = 0.0;
  R est = gk15(f, a, b, err);
  // The second clause is the roundoff floor: once the K15-G7 gap is at the
  // relative noise level of the panel itself, refining cannot help.
  if (err <= budget || err <= 1e-14 * value_norm(est) || depth >= max_depth) {
    acc += est;
    return;
  }
  const double mid = 0.5 * (a + b);
  adapt(f, a, mid, 0.5 * budget, depth + 1, max_depth, acc);
  adapt(f, mid, b, 0.5 * budget, depth + 1, max_depth, acc);
}

}  // namespace detail

// Adaptive Gauss-Kronrod integration of f over [a, b].
// Intended for the smooth (or endpoint-integrable) integrands that arise
// from the Ohmic spectral-density family; not a general-purpose oscillatory
// integrator.
template <class F>
auto integrate(F&& f, double a, double b, double rel_tol = 1e-12,
               double abs_tol = 0.0, int max_depth = 52) {
  using R = decltype(f(a));
  if (a == b) return R{};
  double err0 = 0.0;
  R whole = detail::gk15(f, a, b, err0);
  const double scale = detail::value_norm(whole);
  const double budget = std::max(abs_tol, rel_tol * std::max(scale, 1e-300));
  R acc{};
  detail::adapt(f, a, b, budget, 0, max_depth, acc);
  return acc;
}

// Integral of g over (0, omega_hi] where g behaves like omega^(p-1) times a
// smooth decaying factor near zero, p > 0.  Uses the substitution
// omega = e^x, which removes the endpoint singularity; the neglected
// (0, omega_lo] piece is bounded by (omega_lo/scale)^p of the total and the
// cutoff below keeps that under 1e-18.
template <class F>
auto integrate_from_zero(F&& g, double scale, double omega_hi, double p,
                         double rel_tol = 1e-12) {
  const double x_hi = std::log(omega_hi);
  double x_lo = std::log(scale) - (42.0 / p + 8.0);
  if (x_lo < -690.0) x_lo = -690.0;
  if (x_lo >= x_hi) throw std::invalid_argument("integrate_from_zero: empty range");
  auto h = [&](double x) {
    const double w = std::exp(x);
    return g(w) * w;
  };
  return integrate(h, x_lo, x_hi, rel_tol);
}

}  // namespace zenmet::quad
