#pragma once

#include <stdexcept>
#include <string>

namespace rbslam {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidQuaternion : public Error {
 public:
  using Error::Error;
};

/// Innovation covariance not positive definite or too badly conditioned to solve.
class SingularInnovation : public Error {
 public:
  using Error::Error;
};

/// All particle (or ancestor) weights vanished. Carries the time step, 1-based.
class DegenerateWeights : public Error {
 public:
  DegenerateWeights(const std::string& what, int step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment configuration. `key()` names the offending manifest key.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error("config key '" + key + "': " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

}  // namespace rbslam
