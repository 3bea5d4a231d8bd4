#pragma once

#include <stdexcept>
#include <string>

namespace evmirror {

/// Malformed, inconsistent or incomplete configuration input.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// File system / stream failures, including malformed binary image files.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical routine failed to reach its target (non-convergence, divergence).
class NumericsError : public std::runtime_error {
 public:
  explicit NumericsError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace evmirror
