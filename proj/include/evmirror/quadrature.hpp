#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "evmirror/errors.hpp"

namespace evmirror {

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
  int intervals = 0;  // leaf intervals of the adaptive bisection
};

namespace detail {

// 15-point Kronrod rule with embedded 7-point Gauss rule (QUADPACK dqk15
// nodes and weights). xgk holds the nonnegative abscissae on [-1, 1];
// even indices are the Kronrod extension, odd indices the Gauss points.
inline constexpr double kGk15Wg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};
inline constexpr double kGk15Xgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double kGk15Wgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};

template <class F>
void gk15(const F& f, double a, double b, double& result, double& abserr) {
  const double centr = 0.5 * (a + b);
  const double hlgth = 0.5 * (b - a);

  const double fc = f(centr);
  double resg = fc * kGk15Wg[3];
  double resk = fc * kGk15Wgk[7];
  double fv1[7], fv2[7];
  for (int j = 0; j < 7; ++j) {
    const double absc = hlgth * kGk15Xgk[j];
    fv1[j] = f(centr - absc);
    fv2[j] = f(centr + absc);
    const double fsum = fv1[j] + fv2[j];
    resk += kGk15Wgk[j] * fsum;
    if (j % 2 == 1) resg += kGk15Wg[j / 2] * fsum;
  }

  // QUADPACK's scaled error estimate: sharper than |K - G| when the rule has
  // effectively converged, conservative when it has not.
  const double reskh = resk * 0.5;
  double resasc = kGk15Wgk[7] * std::abs(fc - reskh);
  for (int j = 0; j < 7; ++j)
    resasc += kGk15Wgk[j] * (std::abs(fv1[j] - reskh) + std::abs(fv2[j] - reskh));
  resasc *= std::abs(hlgth);

  result = resk * hlgth;
  abserr = std::abs((resk - resg) * hlgth);
  if (resasc != 0.0 && abserr != 0.0)
    abserr = resasc * std::min(1.0, std::pow(200.0 * abserr / resasc, 1.5));
}

template <class F>
void gk15_adaptive(const F& f, double a, double b, double tol, int depth, QuadratureResult& acc) {
  double value, err;
  gk15(f, a, b, value, err);
  if (err <= tol || err <= std::numeric_limits<double>::epsilon() * std::abs(value)) {
    acc.value += value;
    acc.error_estimate += err;
    ++acc.intervals;
    return;
  }
  if (depth <= 0)
    throw NumericsError("integrate_adaptive: tolerance not reached on [" + std::to_string(a) +
                        ", " + std::to_string(b) + "]");
  const double mid = 0.5 * (a + b);
  gk15_adaptive(f, a, mid, 0.5 * tol, depth - 1, acc);
  gk15_adaptive(f, mid, b, 0.5 * tol, depth - 1, acc);
}

}  // namespace detail

/// Adaptive bisection with the Gauss-Kronrod 7/15 pair. Stops when the
/// accumulated error estimate satisfies max(abs_tol, rel_tol * |integral|).
template <class F>
QuadratureResult integrate_adaptive(const F& f, double a, double b, double abs_tol = 1e-10,
                                    double rel_tol = 1e-9) {
  double whole, whole_err;
  detail::gk15(f, a, b, whole, whole_err);
  const double tol = std::max(abs_tol, rel_tol * std::abs(whole));
  QuadratureResult acc;
  detail::gk15_adaptive(f, a, b, tol, 48, acc);
  return acc;
}

}  // namespace evmirror
