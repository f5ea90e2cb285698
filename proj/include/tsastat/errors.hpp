#pragma once

#include <stdexcept>
#include <string>

namespace tsastat {

/// Bad usage: invalid arguments, malformed files, inconsistent shapes.
/// The CLI maps this family to exit code 1.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical breakdown: non-finite intermediates, singular matrices,
/// degenerate channels. The CLI maps this family to exit code 2.
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace tsastat
