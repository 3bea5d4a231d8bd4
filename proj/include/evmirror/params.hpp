#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "evmirror/constants.hpp"
#include "evmirror/vec.hpp"

namespace evmirror {

/// Optical parameters of the evanescent-wave mirror.
struct EvanescentWaveParams {
  double lambda_L = 0.0;  // m, mirror laser wavelength in vacuum
  double kappa = 0.0;     // 1/m, inverse decay length of the evanescent field
  double eta = 0.0;       // K_ev / k_L, surface-wave-vector to laser-wave-vector ratio

  // Derived at load time, never read from file.
  double k_L = 0.0;       // 1/m, 2 pi / lambda_L
  double v_rec = 0.0;     // m/s, single-photon recoil h / (m lambda_L)

  static EvanescentWaveParams from_optics(double lambda_L, double kappa, double eta,
                                          const PhysicalConstants& pc) {
    EvanescentWaveParams p;
    p.lambda_L = lambda_L;
    p.kappa = kappa;
    p.eta = eta;
    p.k_L = 2.0 * kPi / lambda_L;
    p.v_rec = pc.h_planck / (pc.m_atom * lambda_L);
    return p;
  }
};

/// Released cloud: Thomas-Fermi condensate plus Gaussian thermal part.
struct EnsembleParams {
  std::size_t n_atoms = 0;
  double condensed_fraction = 0.0;  // [0, 1]
  double temperature = 0.0;         // K, thermal part
  double omega_x = 0.0;             // rad/s, weak trap axis
  double omega_perp = 0.0;          // rad/s, tight axes (y, z)
  double R_x = 0.0;                 // m, Thomas-Fermi position radius along x
  double V_x = 0.0;                 // m/s, expansion velocity radius along x
  double V_perp = 0.0;              // m/s, expansion velocity radius along y, z
  Vec3 v0;                          // m/s, centre-of-mass velocity at release
  double h0 = 0.0;                  // m, release height above the mirror
};

/// Stochastic horizontal velocity kick applied at each bounce.
struct MirrorKickModel {
  double sigma_vx = 0.0;  // m/s, 1/sqrt(e) half-width of the kick along x
  double sigma_vy = 0.0;  // m/s, same along y
  double alpha = 4.0;     // roughness spectrum power-law exponent
  double sigma_s = 0.0;   // m, rms surface roughness (diagnostic, not used by the kick)
};

/// Synthetic absorption imaging geometry. The probe line of sight is y.
struct ImagingParams {
  int pixels_x = 0;
  int pixels_z = 0;
  double field_x = 0.0;    // m, imaged extent along x
  double field_z = 0.0;    // m, imaged extent along z
  double origin_x = 0.0;   // m, lab coordinate of the low-x field edge
  double origin_z = 0.0;   // m, lab coordinate of the low-z field edge
  double blur_rms = 0.0;   // px, rms of the optical-resolution Gaussian blur
  double region_x = 0.0;   // m, analysis region extent along x
  double region_z = 0.0;   // m, analysis region extent along z

  double pitch_x() const { return field_x / pixels_x; }  // m/px
  double pitch_z() const { return field_z / pixels_z; }  // m/px
};

struct SimulationConfig {
  PhysicalConstants constants;
  EvanescentWaveParams mirror;
  EnsembleParams ensemble;
  MirrorKickModel kick;
  ImagingParams imaging;
  std::uint64_t seed = 0;
  std::vector<double> time_of_flight;  // s, imaging times counted from release
  double mirror_window = 0.0;          // s, mirror-on gate length around the bounce (bookkeeping)
};

struct Violation {
  std::string field;
  std::string message;
};

namespace detail {

inline void require_positive(double v, const char* field, std::vector<Violation>& out) {
  if (!(v > 0.0)) out.push_back({field, "must be > 0"});
}

inline void require_non_negative(double v, const char* field, std::vector<Violation>& out) {
  if (!(v >= 0.0)) out.push_back({field, "must be >= 0"});
}

}  // namespace detail

inline void validate(const PhysicalConstants& pc, std::vector<Violation>& out) {
  detail::require_positive(pc.g, "constants.g", out);
  detail::require_positive(pc.h_planck, "constants.h_planck", out);
  detail::require_positive(pc.k_boltzmann, "constants.k_boltzmann", out);
  detail::require_positive(pc.m_atom, "constants.m_atom", out);
}

inline void validate(const EvanescentWaveParams& p, const PhysicalConstants& pc,
                     std::vector<Violation>& out) {
  detail::require_positive(p.lambda_L, "mirror.lambda_L", out);
  detail::require_positive(p.kappa, "mirror.kappa", out);
  detail::require_positive(p.eta, "mirror.eta", out);
  if (p.lambda_L > 0.0 && pc.m_atom > 0.0) {
    const double k_L = 2.0 * kPi / p.lambda_L;
    const double v_rec = pc.h_planck / (pc.m_atom * p.lambda_L);
    if (std::abs(p.k_L - k_L) > 1e-6 * k_L)
      out.push_back({"mirror.k_L", "inconsistent with 2 pi / lambda_L"});
    if (std::abs(p.v_rec - v_rec) > 1e-6 * v_rec)
      out.push_back({"mirror.v_rec", "inconsistent with h / (m lambda_L)"});
  }
}

inline void validate(const EnsembleParams& p, std::vector<Violation>& out) {
  if (p.n_atoms == 0) out.push_back({"ensemble.n_atoms", "must be > 0"});
  if (!(p.condensed_fraction >= 0.0 && p.condensed_fraction <= 1.0))
    out.push_back({"ensemble.condensed_fraction", "must be within [0, 1]"});
  detail::require_positive(p.temperature, "ensemble.temperature", out);
  detail::require_positive(p.omega_x, "ensemble.omega_x", out);
  detail::require_positive(p.omega_perp, "ensemble.omega_perp", out);
  detail::require_positive(p.R_x, "ensemble.R_x", out);
  detail::require_positive(p.V_x, "ensemble.V_x", out);
  detail::require_positive(p.V_perp, "ensemble.V_perp", out);
  detail::require_positive(p.h0, "ensemble.h0", out);
}

inline void validate(const MirrorKickModel& p, std::vector<Violation>& out) {
  detail::require_non_negative(p.sigma_vx, "kick.sigma_vx", out);
  detail::require_non_negative(p.sigma_vy, "kick.sigma_vy", out);
  detail::require_positive(p.alpha, "kick.alpha", out);
  detail::require_non_negative(p.sigma_s, "kick.sigma_s", out);
}

inline void validate(const ImagingParams& p, std::vector<Violation>& out) {
  if (p.pixels_x <= 0) out.push_back({"imaging.pixels_x", "must be > 0"});
  if (p.pixels_z <= 0) out.push_back({"imaging.pixels_z", "must be > 0"});
  detail::require_positive(p.field_x, "imaging.field_x", out);
  detail::require_positive(p.field_z, "imaging.field_z", out);
  detail::require_non_negative(p.blur_rms, "imaging.blur_rms", out);
  detail::require_positive(p.region_x, "imaging.region_x", out);
  detail::require_positive(p.region_z, "imaging.region_z", out);
  if (p.region_x > p.field_x)
    out.push_back({"imaging.region_x", "analysis region exceeds the imaged field"});
  if (p.region_z > p.field_z)
    out.push_back({"imaging.region_z", "analysis region exceeds the imaged field"});
}

/// Collects every violation across all parameter groups; empty result means valid.
inline std::vector<Violation> validate_config(const SimulationConfig& cfg) {
  std::vector<Violation> out;
  validate(cfg.constants, out);
  validate(cfg.mirror, cfg.constants, out);
  validate(cfg.ensemble, out);
  validate(cfg.kick, out);
  validate(cfg.imaging, out);
  if (cfg.time_of_flight.empty())
    out.push_back({"time_of_flight", "schedule must contain at least one entry"});
  for (double t : cfg.time_of_flight)
    if (!(t > 0.0)) {
      out.push_back({"time_of_flight", "entries must be > 0"});
      break;
    }
  detail::require_non_negative(cfg.mirror_window, "mirror_window", out);
  return out;
}

}  // namespace evmirror
