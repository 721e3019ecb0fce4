#pragma once

#include <stdexcept>
#include <string>

namespace bahop {

// Input violates a structural precondition (wrong channel count, geometry
// mismatch, unknown slide id, empty cohort).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A tunable parameter is outside its legal domain (even blur kernel,
// non-divisible downsample factor, closing kernel < 1).
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Configuration file or command-line configuration is malformed. `key()`
// names the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure inside a surrogate model (e.g. kernel matrix not
// positive definite after jitter retries).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bahop
