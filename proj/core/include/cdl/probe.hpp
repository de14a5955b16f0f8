#pragma once

#include <cstdint>
#include <vector>

namespace cdl {

/// Sampling plan over bounded boxes in state, control and momentum space.
/// Used by the assumption checker and by the kappa estimator. Samples are
/// drawn from a seeded stream, so a plan always probes the same points.
struct BoxPlan {
  std::vector<double> x_lo{-5.0}, x_hi{5.0};
  std::vector<double> u_lo{-5.0}, u_hi{5.0};
  std::vector<double> p_lo{-5.0}, p_hi{5.0};
  int n_x = 64;
  int n_u = 16;
  int n_p = 16;
  int n_dir = 8;
  std::uint64_t seed = 7;

  static BoxPlan cube(int dim_x, int dim_u, double half_width, int n_x = 64, int n_u = 16) {
    BoxPlan plan;
    plan.x_lo.assign(dim_x, -half_width);
    plan.x_hi.assign(dim_x, half_width);
    plan.u_lo.assign(dim_u, -half_width);
    plan.u_hi.assign(dim_u, half_width);
    plan.p_lo.assign(dim_x, -half_width);
    plan.p_hi.assign(dim_x, half_width);
    plan.n_x = n_x;
    plan.n_u = n_u;
    return plan;
  }
};

}  // namespace cdl
