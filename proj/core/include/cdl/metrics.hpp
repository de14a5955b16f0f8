#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "cdl/rates.hpp"

namespace cdl {

/// Exact W1 between two equal-size empirical measures on the line via the
/// sorted (quantile) coupling. Unequal sizes: the larger sample is uniformly
/// subsampled with the given seed and the method is recorded in the result.
struct W1Result {
  double value = 0.0;
  bool subsampled = false;
  int n_used = 0;
};
W1Result w1_empirical_1d_full(std::span<const double> a, std::span<const double> b,
                              std::uint64_t seed = 0);
double w1_empirical_1d(std::span<const double> a, std::span<const double> b,
                       std::uint64_t seed = 0);

/// Bracket for the twisted distance W_f: C*W1 <= W_f <= mean f(|quantile
/// coupling gaps|). The cost f is concave, so the quantile coupling is not
/// optimal in general and W_f is deliberately not reported as a single value.
std::pair<double, double> wf_bracket(std::span<const double> a,
                                     std::span<const double> b,
                                     const RateBundle& bundle,
                                     std::uint64_t seed = 0);

struct RateFit {
  double rate = 0.0;       // negated slope of ln(y) vs t
  double intercept = 0.0;  // ln(y) at t = 0
  double r_squared = 0.0;
  double t_lo = 0.0, t_hi = 0.0;
};

/// Least squares on (t, ln y) over the window [t_lo, t_hi]. Throws if any
/// value in the window is nonpositive or fewer than two points fall inside.
RateFit fit_exponential_rate(std::span<const double> t, std::span<const double> y,
                             double t_lo, double t_hi);

}  // namespace cdl
