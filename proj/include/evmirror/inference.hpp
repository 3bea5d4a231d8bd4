#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "evmirror/dynamics.hpp"
#include "evmirror/errors.hpp"
#include "evmirror/imaging.hpp"
#include "evmirror/params.hpp"

namespace evmirror {

struct InferenceReport {
  std::vector<double> candidates;  // m/s, scanned sigma_vy values
  std::vector<double> residuals;   // one per candidate
  double best_sigma_vy = 0.0;      // m/s
  double chi = 0.0;                // sigma_vx / best_sigma_vy, inf when best is 0
  double bracket_low = 0.0;        // m/s, candidates with residual <= band * min
  double bracket_high = 0.0;       // m/s
};

/// Mean squared difference between peak-normalized profiles, the trial
/// linearly interpolated onto the reference grid over the domain overlap.
inline double profile_residual(const DensityProfile& reference, const DensityProfile& trial) {
  if (reference.z.empty() || trial.z.empty())
    throw std::invalid_argument("profile_residual: empty profile");
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < reference.z.size(); ++i) {
    const double z = reference.z[i];
    if (z < trial.z.front() || z > trial.z.back()) continue;
    const auto it = std::lower_bound(trial.z.begin(), trial.z.end(), z);
    double tv;
    if (it != trial.z.end() && *it == z) {
      // Exact grid match, taken verbatim so identical profiles score 0.
      tv = trial.value[static_cast<std::size_t>(it - trial.z.begin())];
    } else if (it == trial.z.begin()) {
      tv = trial.value.front();
    } else {
      const std::size_t hi = static_cast<std::size_t>(it - trial.z.begin());
      const std::size_t lo = hi - 1;
      const double f = (z - trial.z[lo]) / (trial.z[hi] - trial.z[lo]);
      tv = trial.value[lo] + f * (trial.value[hi] - trial.value[lo]);
    }
    const double d = reference.value[i] - tv;
    acc += d * d;
    ++count;
  }
  if (count == 0) throw std::invalid_argument("profile_residual: profiles do not overlap in z");
  return acc / static_cast<double>(count);
}

namespace detail {

inline constexpr double kBracketBand = 1.5;  // residual <= band * min stays in the bracket

}  // namespace detail

/// Grid scan over candidate sigma_vy values: each candidate is simulated with
/// the same seed (common random numbers), imaged, profiled, and scored
/// against the reference image's z-profile.
inline InferenceReport infer_sigma_vy(const AbsorptionImage& reference,
                                      const SimulationConfig& config,
                                      const std::vector<double>& candidates, std::uint64_t seed,
                                      unsigned threads = 1) {
  if (candidates.size() < 2)
    throw std::invalid_argument("infer_sigma_vy: need at least 2 candidates");
  for (double c : candidates)
    if (!(c >= 0.0)) throw std::invalid_argument("infer_sigma_vy: candidates must be >= 0");
  if (config.time_of_flight.empty() && !(reference.time > 0.0))
    throw std::invalid_argument("infer_sigma_vy: no time of flight available");

  // One extraction window for everything, the one the reference defines.
  // Re-centering per trial would compare different slices of the cloud: the
  // kick spreads the condensate into a long streak along x, and the brightest
  // pixel lands at a different spot on it for every Monte Carlo realization.
  const auto [cx, cz] = peak_center(reference);
  const DensityProfile ref_profile =
      extract_z_profile(reference, config.imaging.region_x, config.imaging.region_z, cx, cz);
  const double tof = reference.time > 0.0 ? reference.time : config.time_of_flight.front();

  InferenceReport report;
  report.candidates = candidates;
  report.residuals.resize(candidates.size());
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    SimulationConfig trial_cfg = config;
    trial_cfg.kick.sigma_vy = candidates[k];
    const BounceExperiment exp = simulate_bounce_experiment(trial_cfg, tof, seed, threads);
    const AbsorptionImage img = render_image(exp.ensemble, trial_cfg.imaging, threads);
    const DensityProfile prof =
        extract_z_profile(img, trial_cfg.imaging.region_x, trial_cfg.imaging.region_z, cx, cz);
    report.residuals[k] = profile_residual(ref_profile, prof);
  }

  std::size_t best = 0;
  for (std::size_t k = 1; k < candidates.size(); ++k)
    if (report.residuals[k] < report.residuals[best]) best = k;
  report.best_sigma_vy = candidates[best];
  report.chi = report.best_sigma_vy > 0.0 ? config.kick.sigma_vx / report.best_sigma_vy
                                          : std::numeric_limits<double>::infinity();

  const double band = detail::kBracketBand * report.residuals[best];
  report.bracket_low = report.bracket_high = candidates[best];
  for (std::size_t k = 0; k < candidates.size(); ++k)
    if (report.residuals[k] <= band) {
      report.bracket_low = std::min(report.bracket_low, candidates[k]);
      report.bracket_high = std::max(report.bracket_high, candidates[k]);
    }
  return report;
}

}  // namespace evmirror
