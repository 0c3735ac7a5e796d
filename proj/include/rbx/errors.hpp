#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace rbx {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parameter outside the declared box, or of the wrong dimension.
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A request would exceed a configured memory or size cap.
class ResourceError : public Error {
 public:
  using Error::Error;
};

/// Singular or badly conditioned system. Carries the reciprocal condition
/// estimate when the factorization provides one (NaN otherwise).
class NumericalFailure : public Error {
 public:
  explicit NumericalFailure(const std::string& what,
                            double rcond = std::numeric_limits<double>::quiet_NaN())
      : Error(what), rcond_(rcond) {}
  double rcond() const noexcept { return rcond_; }

 private:
  double rcond_;
};

/// Snapshot is numerically inside the current reduced space.
class BasisRejection : public Error {
 public:
  using Error::Error;
};

/// Coercivity strategy cannot be applied at the requested parameter.
class StrategyInvalid : public Error {
 public:
  using Error::Error;
};

}  // namespace rbx
