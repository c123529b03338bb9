#ifndef DECOLAB_ERRORS_HPP
#define DECOLAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace decolab {

/// Base class of every error raised by the engines.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on a scalar parameter failed (negative time, non-positive energy, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class NormalizationError : public Error {
 public:
  using Error::Error;
};

class NotHermitian : public Error {
 public:
  using Error::Error;
};

class NotPositiveSemidefinite : public Error {
 public:
  using Error::Error;
};

/// Raised by the integrators: trace drift, positivity loss, non-finite values.
class IntegrationError : public Error {
 public:
  using Error::Error;
};

/// Grid exceeds its cell cap or a lump does not fit in it.
class GridError : public Error {
 public:
  using Error::Error;
};

/// Scenario-file schema violation. `key()` names the offending key.
class ScenarioError : public Error {
 public:
  ScenarioError(std::string key, const std::string& what)
      : Error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace decolab

#endif  // DECOLAB_ERRORS_HPP
