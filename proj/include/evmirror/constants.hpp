#pragma once

namespace evmirror {

// CODATA 2018 exact values where available.
inline constexpr double kPlanck = 6.62607015e-34;        // J s
inline constexpr double kBoltzmann = 1.380649e-23;       // J / K
inline constexpr double kAtomicMassUnit = 1.66053906660e-27;  // kg
inline constexpr double kRb87MassAmu = 86.909;           // atomic mass units
inline constexpr double kStandardGravity = 9.81;         // m / s^2

inline constexpr double kPi = 3.141592653589793238462643383279502884;

struct PhysicalConstants {
  double g = kStandardGravity;                      // m/s^2, downward
  double h_planck = kPlanck;                        // J s
  double k_boltzmann = kBoltzmann;                  // J/K
  double m_atom = kRb87MassAmu * kAtomicMassUnit;   // kg, 87Rb
};

}  // namespace evmirror
