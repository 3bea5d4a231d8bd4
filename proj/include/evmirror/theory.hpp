#pragma once

#include <cmath>
#include <stdexcept>

#include "evmirror/constants.hpp"
#include "evmirror/params.hpp"
#include "evmirror/quadrature.hpp"

namespace evmirror {

/// Power-law spectrum of the mirror surface roughness, P(Q) ~ 1/Q^alpha.
struct RoughnessSpectrum {
  double alpha = 4.0;    // exponent, predictions validated for [2, 5]
  double sigma_s = 0.0;  // m, rms roughness
};

/// The three azimuthal integrals behind the scattering anisotropy: weight
/// w(phi) against (1 - 2 eta cos phi + eta^2)^(-alpha/2) over [0, pi].
enum class AngularWeight {
  kXWeight,     // (cos phi - eta)^2
  kYWeight,     // sin^2 phi
  kUnitWeight,  // 1
};

inline double angular_integral(AngularWeight kind, double alpha, double eta) {
  if (!(eta >= 0.0)) throw std::invalid_argument("angular_integral: eta must be >= 0");
  if (eta == 1.0)
    throw std::invalid_argument(
        "angular_integral: eta = 1 puts an integrable singularity at phi = 0; not supported");
  if (!(alpha >= 0.0)) throw std::invalid_argument("angular_integral: alpha must be >= 0");

  const double e2 = 1.0 + eta * eta;
  auto f = [kind, alpha, eta, e2](double phi) {
    const double c = std::cos(phi);
    const double q2 = e2 - 2.0 * eta * c;  // squared ring-to-origin distance, > 0 for eta != 1
    double w = 1.0;
    switch (kind) {
      case AngularWeight::kXWeight: w = (c - eta) * (c - eta); break;
      case AngularWeight::kYWeight: w = 1.0 - c * c; break;
      case AngularWeight::kUnitWeight: break;
    }
    return w * std::pow(q2, -0.5 * alpha);
  };
  return integrate_adaptive(f, 0.0, kPi, 1e-10, 1e-9).value;
}

struct AnisotropyResult {
  double chi = 0.0;                   // sigma_vx / sigma_vy
  double numerator_integral = 0.0;    // x-weight value
  double denominator_integral = 0.0;  // y-weight value
  double alpha = 0.0;
  double eta = 0.0;
};

/// Velocity-spread anisotropy of the diffuse reflection.
inline AnisotropyResult anisotropy_chi(double alpha, double eta) {
  AnisotropyResult r;
  r.alpha = alpha;
  r.eta = eta;
  r.numerator_integral = angular_integral(AngularWeight::kXWeight, alpha, eta);
  r.denominator_integral = angular_integral(AngularWeight::kYWeight, alpha, eta);
  r.chi = std::sqrt(r.numerator_integral / r.denominator_integral);
  return r;
}

/// chi at alpha = 4 in closed form: chi^2 = 2 eta^2 - 1. (A published version
/// of this relation carries the opposite sign, which is negative for
/// eta > 1/sqrt(2) and contradicts the quadrature; the sign used here is the
/// one the quadrature confirms.)
inline double chi_alpha4_closed_form(double eta) {
  if (!(eta > 1.0 / std::sqrt(2.0)))
    throw std::invalid_argument("chi_alpha4_closed_form: requires eta > 1/sqrt(2)");
  return std::sqrt(2.0 * eta * eta - 1.0);
}

struct WmaxBound {
  double value = 0.0;
  bool exceeds_unity = false;  // still a valid upper bound, just uninformative
};

/// Upper bound on the total diffuse-reflection probability,
/// (4 pi sigma_s e^{kappa z0} / lambda_dB)^2.
inline WmaxBound wmax_bound(double sigma_s, double kappa, double z0, double lambda_dB) {
  if (!(sigma_s >= 0.0) || !(kappa > 0.0) || !(z0 >= 0.0) || !(lambda_dB > 0.0))
    throw std::invalid_argument("wmax_bound: need sigma_s >= 0, kappa > 0, z0 >= 0, lambda_dB > 0");
  const double root = 4.0 * kPi * sigma_s * std::exp(kappa * z0) / lambda_dB;
  return {root * root, root * root > 1.0};
}

/// Velocity-spread bound sigma_vx = v_rec sqrt(wmax * I_x / I_1).
inline double sigma_vx_bound(double wmax, double alpha, double eta, double v_rec) {
  if (!(wmax >= 0.0)) throw std::invalid_argument("sigma_vx_bound: wmax must be >= 0");
  const double ix = angular_integral(AngularWeight::kXWeight, alpha, eta);
  const double i1 = angular_integral(AngularWeight::kUnitWeight, alpha, eta);
  return v_rec * std::sqrt(wmax * ix / i1);
}

struct DerivedKinematics {
  double fall_time = 0.0;        // s, sqrt(2 h0 / g)
  double impact_velocity = 0.0;  // m/s, speed at the mirror for release from rest
  double lambda_dB = 0.0;        // m, de Broglie wavelength at impact
  double V_x_castin_dum = 0.0;   // m/s, (pi/2)(omega_x/omega_perp) V_perp
  double speckle_size = 0.0;     // m, lambda_dB h0 / R
};

/// Scalar consequences of the release geometry. R is the cloud size at
/// reflection; pass 0 to use R_x.
inline DerivedKinematics derived_kinematics(const EnsembleParams& params,
                                            const PhysicalConstants& constants, double R = 0.0) {
  DerivedKinematics k;
  k.fall_time = std::sqrt(2.0 * params.h0 / constants.g);
  k.impact_velocity = constants.g * k.fall_time;
  k.lambda_dB = constants.h_planck / (constants.m_atom * k.impact_velocity);
  k.V_x_castin_dum = 0.5 * kPi * (params.omega_x / params.omega_perp) * params.V_perp;
  k.speckle_size = k.lambda_dB * params.h0 / (R > 0.0 ? R : params.R_x);
  return k;
}

}  // namespace evmirror
