#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cdl {

/// Base error for all numerical and validation failures in the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Thrown when the inner (strongly convex) minimization does not converge.
/// Carries the last iterate and the gradient norm at that iterate so callers
/// can diagnose the failure.
struct MinimizeError : Error {
  MinimizeError(const std::string& msg, std::vector<double> u, double gnorm)
      : Error(msg), last_iterate(std::move(u)), grad_norm(gnorm) {}
  std::vector<double> last_iterate;
  double grad_norm;
};

}  // namespace cdl
