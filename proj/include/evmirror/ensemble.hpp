#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "evmirror/config_io.hpp"
#include "evmirror/parallel.hpp"
#include "evmirror/params.hpp"
#include "evmirror/rng.hpp"
#include "evmirror/vec.hpp"

namespace evmirror {

struct AtomEnsemble {
  std::vector<Vec3> positions;             // m
  std::vector<Vec3> velocities;            // m/s
  std::vector<std::uint8_t> is_condensed;  // 1 = Thomas-Fermi part, 0 = thermal part
  double time = 0.0;                       // s since release

  std::size_t size() const { return positions.size(); }
};

namespace detail {

// x drawn from the 1-D projection of the Thomas-Fermi density, (1 - s^2)^2 on
// [-1, 1], by rejection against a uniform proposal (acceptance 8/15).
inline double tf_projected_coordinate(rng::Stream& st) {
  for (;;) {
    const double s = 2.0 * st.uniform() - 1.0;
    const double w = 1.0 - s * s;
    if (st.uniform() < w * w) return s;
  }
}

// Velocity direction plus magnitude drawn from the inverted parabola
// (1 - r^2) on the unit ball by rejection inside the cube (acceptance pi/15);
// axis radii are applied by the caller.
inline void tf_ball(rng::Stream& st, double& a, double& b, double& c) {
  for (;;) {
    const double x = 2.0 * st.uniform() - 1.0;
    const double y = 2.0 * st.uniform() - 1.0;
    const double z = 2.0 * st.uniform() - 1.0;
    const double r2 = x * x + y * y + z * z;
    if (r2 <= 1.0 && st.uniform() < 1.0 - r2) {
      a = x;
      b = y;
      c = z;
      return;
    }
  }
}

}  // namespace detail

/// Draws the release-time cloud: the first floor(f*N) atoms are condensed, the rest
/// thermal. Every atom owns two counter-based streams (position, velocity), so
/// the result is a function of (params, seed) alone, independent of threads.
inline AtomEnsemble sample_initial_ensemble(const EnsembleParams& params,
                                            const PhysicalConstants& constants,
                                            std::uint64_t seed, unsigned threads = 1) {
  if (params.n_atoms == 0) throw std::invalid_argument("sample_initial_ensemble: n_atoms = 0");

  const std::size_t n = params.n_atoms;
  const auto n_cond =
      static_cast<std::size_t>(std::floor(params.condensed_fraction * static_cast<double>(n)));
  const double v_th = std::sqrt(constants.k_boltzmann * params.temperature / constants.m_atom);
  const double sx = v_th / params.omega_x;     // m, thermal position rms along x
  const double sp = v_th / params.omega_perp;  // m, thermal position rms along y, z

  AtomEnsemble ens;
  ens.positions.resize(n);
  ens.velocities.resize(n);
  ens.is_condensed.resize(n);
  ens.time = 0.0;

  parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      rng::Stream pos_st(seed, i, rng::Purpose::kSamplePosition);
      rng::Stream vel_st(seed, i, rng::Purpose::kSampleVelocity);
      Vec3 pos, vel;
      if (i < n_cond) {
        pos = {params.R_x * detail::tf_projected_coordinate(pos_st), 0.0, 0.0};
        double a, b, c;
        detail::tf_ball(vel_st, a, b, c);
        vel = {params.V_x * a, params.V_perp * b, params.V_perp * c};
        ens.is_condensed[i] = 1;
      } else {
        pos = {sx * pos_st.gaussian(), sp * pos_st.gaussian(), sp * pos_st.gaussian()};
        vel = {v_th * vel_st.gaussian(), v_th * vel_st.gaussian(), v_th * vel_st.gaussian()};
        ens.is_condensed[i] = 0;
      }
      pos.z += params.h0;
      ens.positions[i] = pos;
      ens.velocities[i] = vel + params.v0;
    }
  });
  return ens;
}

struct EnsembleMoments {
  Vec3 mean_position;  // m
  Vec3 rms_position;   // m, sqrt of the raw second moment per axis
  Vec3 mean_velocity;  // m/s
  Vec3 rms_velocity;   // m/s
};

inline EnsembleMoments ensemble_moments(const AtomEnsemble& ens) {
  if (ens.size() == 0) throw std::invalid_argument("ensemble_moments: empty ensemble");
  const double inv_n = 1.0 / static_cast<double>(ens.size());
  Vec3 mp, mv, sp, sv;
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const Vec3& p = ens.positions[i];
    const Vec3& v = ens.velocities[i];
    mp += p;
    mv += v;
    sp += {p.x * p.x, p.y * p.y, p.z * p.z};
    sv += {v.x * v.x, v.y * v.y, v.z * v.z};
  }
  auto rms = [inv_n](const Vec3& s) {
    return Vec3{std::sqrt(s.x * inv_n), std::sqrt(s.y * inv_n), std::sqrt(s.z * inv_n)};
  };
  return {inv_n * mp, rms(sp), inv_n * mv, rms(sv)};
}

inline void write_ensemble_csv(const AtomEnsemble& ens, std::ostream& out) {
  out << "x,y,z,vx,vy,vz,is_condensed\n";
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const Vec3& p = ens.positions[i];
    const Vec3& v = ens.velocities[i];
    out << cfgio::format_g17(p.x) << ',' << cfgio::format_g17(p.y) << ','
        << cfgio::format_g17(p.z) << ',' << cfgio::format_g17(v.x) << ','
        << cfgio::format_g17(v.y) << ',' << cfgio::format_g17(v.z) << ','
        << int(ens.is_condensed[i]) << '\n';
  }
}

}  // namespace evmirror
