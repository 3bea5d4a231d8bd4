#pragma once

// Umbrella header: Monte Carlo bounce simulator, synthetic imaging, roughness
// scattering theory, and the sigma_vy grid-scan inference.

#include "evmirror/config_io.hpp"
#include "evmirror/constants.hpp"
#include "evmirror/dynamics.hpp"
#include "evmirror/ensemble.hpp"
#include "evmirror/errors.hpp"
#include "evmirror/imaging.hpp"
#include "evmirror/inference.hpp"
#include "evmirror/params.hpp"
#include "evmirror/parallel.hpp"
#include "evmirror/pgm_io.hpp"
#include "evmirror/quadrature.hpp"
#include "evmirror/rng.hpp"
#include "evmirror/theory.hpp"
#include "evmirror/vec.hpp"

namespace evmirror {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr std::uint64_t kDefaultSeed = 12345;

}  // namespace evmirror
