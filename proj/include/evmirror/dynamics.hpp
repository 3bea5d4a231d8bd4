#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "evmirror/ensemble.hpp"
#include "evmirror/errors.hpp"
#include "evmirror/parallel.hpp"
#include "evmirror/params.hpp"
#include "evmirror/rng.hpp"

namespace evmirror {

struct BounceRecord {
  std::size_t n_bounced = 0;
  std::size_t n_energy_clamped = 0;  // kick resampled at least once (or left specular)
  std::vector<std::array<double, 2>> kick_samples;  // m/s, applied (dvx, dvy); optional
};

/// Exact closed-form free fall over dt; no integrator error to accumulate.
inline void propagate_ballistic(AtomEnsemble& ens, double dt, const PhysicalConstants& constants) {
  if (dt < 0.0) throw std::invalid_argument("propagate_ballistic: dt < 0");
  const double g = constants.g;
  const double half_g_dt2 = 0.5 * g * dt * dt;
  for (std::size_t i = 0; i < ens.size(); ++i) {
    Vec3& p = ens.positions[i];
    Vec3& v = ens.velocities[i];
    p.x += v.x * dt;
    p.y += v.y * dt;
    p.z += v.z * dt - half_g_dt2;
    v.z -= g * dt;
  }
  ens.time += dt;
}

/// Adds a horizontal kick to an outgoing velocity (v.z >= 0) and rebalances
/// v.z so |v|^2 is conserved exactly. Returns false (v untouched) when the
/// kick energy exceeds the total kinetic energy. A zero kick leaves v
/// bit-identical; no square root touches it.
inline bool apply_horizontal_kick(Vec3& v, double dvx, double dvy) {
  if (dvx == 0.0 && dvy == 0.0) return true;
  const double vx1 = v.x + dvx;
  const double vy1 = v.y + dvy;
  const double radicand = v.z * v.z - (vx1 * vx1 + vy1 * vy1 - v.x * v.x - v.y * v.y);
  if (radicand < 0.0) return false;
  v = {vx1, vy1, std::sqrt(radicand)};
  return true;
}

namespace detail {

inline constexpr int kMaxKickResamples = 100;

// Reverses v.z and applies one Gaussian kick pair drawn from st. Resamples
// when the kick would exceed the total energy; after kMaxKickResamples tries
// the atom is left specular. Returns whether any resample happened; the
// applied pair is written to dv.
inline bool bounce_velocity(Vec3& v, const MirrorKickModel& kick, rng::Stream& st,
                            std::array<double, 2>& dv) {
  v.z = -v.z;
  for (int attempt = 0; attempt <= kMaxKickResamples; ++attempt) {
    dv = {st.gaussian() * kick.sigma_vx, st.gaussian() * kick.sigma_vy};
    if (apply_horizontal_kick(v, dv[0], dv[1])) return attempt > 0;
  }
  dv = {0.0, 0.0};
  return true;
}

}  // namespace detail

/// Reflects every atom off the mirror plane z = 0 at the current instant.
/// Requires all atoms incoming (velocity_z < 0).
inline BounceRecord bounce(AtomEnsemble& ens, const MirrorKickModel& kick, std::uint64_t seed,
                           bool record_kicks = false, unsigned threads = 1) {
  for (std::size_t i = 0; i < ens.size(); ++i)
    if (!(ens.velocities[i].z < 0.0))
      throw std::invalid_argument("bounce: atom " + std::to_string(i) +
                                  " is not incoming (velocity_z >= 0)");

  BounceRecord rec;
  rec.n_bounced = ens.size();
  if (record_kicks) rec.kick_samples.resize(ens.size());
  std::atomic<std::size_t> clamped{0};

  parallel_for(ens.size(), threads, [&](std::size_t begin, std::size_t end) {
    std::size_t local = 0;
    for (std::size_t i = begin; i < end; ++i) {
      rng::Stream st(seed, i, rng::Purpose::kBounceKick);
      std::array<double, 2> dv;
      if (detail::bounce_velocity(ens.velocities[i], kick, st, dv)) ++local;
      if (record_kicks) rec.kick_samples[i] = dv;
    }
    clamped += local;
  });
  rec.n_energy_clamped = clamped;
  return rec;
}

struct BounceExperiment {
  AtomEnsemble ensemble;
  BounceRecord record;
};

/// Samples the cloud, lets each atom fall to z = 0 along its own exact
/// parabola, bounces it there, and coasts everything to the common final
/// time. Atoms that have not reached the mirror stay in flight.
inline BounceExperiment simulate_bounce_experiment(const SimulationConfig& config,
                                                   double time_of_flight, std::uint64_t seed,
                                                   unsigned threads = 1) {
  if (time_of_flight < 0.0)
    throw std::invalid_argument("simulate_bounce_experiment: time_of_flight < 0");
  if (auto violations = validate_config(config); !violations.empty()) {
    std::string msg = "simulate_bounce_experiment: invalid configuration:";
    for (const auto& v : violations) msg += "\n  " + v.field + ": " + v.message;
    throw ConfigError(msg);
  }

  BounceExperiment out;
  out.ensemble = sample_initial_ensemble(config.ensemble, config.constants, seed, threads);
  AtomEnsemble& ens = out.ensemble;
  const double g = config.constants.g;
  const double t_final = time_of_flight;

  std::atomic<std::size_t> bounced{0}, clamped{0};
  parallel_for(ens.size(), threads, [&](std::size_t begin, std::size_t end) {
    std::size_t local_bounced = 0, local_clamped = 0;
    for (std::size_t i = begin; i < end; ++i) {
      Vec3& p = ens.positions[i];
      Vec3& v = ens.velocities[i];
      // Arrival time at z = 0: positive root of p.z + v.z t - g t^2 / 2.
      const double s = std::sqrt(v.z * v.z + 2.0 * g * p.z);  // m/s, impact speed
      const double t_hit = (v.z + s) / g;
      if (p.z > 0.0 && t_hit <= t_final) {
        p = {p.x + v.x * t_hit, p.y + v.y * t_hit, 0.0};
        v.z = -s;  // exact impact velocity, no accumulated subtraction
        rng::Stream st(seed, i, rng::Purpose::kBounceKick);
        std::array<double, 2> dv;
        if (detail::bounce_velocity(v, config.kick, st, dv)) ++local_clamped;
        ++local_bounced;
        const double dt = t_final - t_hit;
        p.x += v.x * dt;
        p.y += v.y * dt;
        p.z += v.z * dt - 0.5 * g * dt * dt;
        v.z -= g * dt;
      } else {
        p.x += v.x * t_final;
        p.y += v.y * t_final;
        p.z += v.z * t_final - 0.5 * g * t_final * t_final;
        v.z -= g * t_final;
      }
    }
    bounced += local_bounced;
    clamped += local_clamped;
  });

  ens.time = t_final;
  out.record.n_bounced = bounced;
  out.record.n_energy_clamped = clamped;
  return out;
}

}  // namespace evmirror
