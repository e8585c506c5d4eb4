#pragma once

#include <stdexcept>
#include <string>

namespace citl {

/// Invalid hyper-parameters or configuration files. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A loss or gradient evaluated to NaN or infinity.
class NonFiniteError : public std::runtime_error {
 public:
  explicit NonFiniteError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace citl
