#pragma once

#include <stdexcept>
#include <string>

namespace gcvae {

// Failure categories map onto CLI exit codes (2 usage/config, 3 data, 4 numerical).
// Dimension and precondition violations inside the library throw std::invalid_argument.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gcvae
