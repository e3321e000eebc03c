#pragma once

#include <stdexcept>
#include <string>

namespace scoresel {

/// Runtime failure (bad data, divergence, invalid arguments).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user configuration; the CLI maps this to exit status 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace scoresel
