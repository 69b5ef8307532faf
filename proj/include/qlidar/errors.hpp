#pragma once

#include <stdexcept>
#include <string>

namespace qlidar {

/// Thrown when a linear-algebra or optimization step fails numerically
/// (e.g. a covariance factorization that should succeed does not).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qlidar
