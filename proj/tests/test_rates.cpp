#include <doctest.h>

#include <cmath>
#include <vector>

#include "cdl/error.hpp"
#include "cdl/rates.hpp"
#include "cdl/rng.hpp"
#include "oracles.hpp"

using namespace cdl;

namespace {
const double kSqrt2 = std::sqrt(2.0);
}

TEST_CASE("constant-kappa bundle matches the closed form") {
  RateBundleOptions opts;
  opts.r_max = 12.0;
  const KappaProfile kappa = KappaProfile::constant(1.0);
  const RateBundle b = compute_rate_bundle(kappa, kSqrt2, opts);
  CHECK(std::abs(b.R0) < 1e-9);
  CHECK(b.R1 == doctest::Approx(2.0 * kSqrt2).epsilon(1e-8));
  CHECK(b.lambda == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(b.C == doctest::Approx(1.0 / (4.0 * kSqrt2)).epsilon(1e-8));
  // f(r) = r - r^3/48 below R1 (g(r) = 1 - r^2/16, phi = 1)
  CHECK(b.f_eval(1.0) == doctest::Approx(1.0 - 1.0 / 48.0).epsilon(1e-7));
  CHECK(b.f_eval(2.0) == doctest::Approx(2.0 - 8.0 / 48.0).epsilon(1e-7));
  CHECK(b.fp_eval(0.0) == doctest::Approx(1.0));
  // linear extension beyond R1 with slope 1/2
  CHECK(b.fp_eval(20.0) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(b.twisted_norm_linear(1.0) == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("bundle tables satisfy the f-equivalence and concavity constraints") {
  for (double c : {0.0, 2.0, 6.0}) {
    const KappaProfile kappa = KappaProfile::constant(1.0).perturbed_by_inverse_r(c);
    RateBundleOptions opts;
    opts.r_max = std::max(14.0, suggest_r_max(kappa));
    const RateBundle b = compute_rate_bundle(kappa, kSqrt2, opts);
    for (std::size_t i = 0; i < b.r.size(); ++i) {
      CHECK(b.fp[i] <= 1.0 + 1e-12);
      CHECK(b.fp[i] >= b.C - 1e-12);
      CHECK(b.f[i] <= b.r[i] + 1e-12);
      CHECK(b.f[i] >= b.C * b.r[i] - 1e-10);
      CHECK(b.fpp[i] <= 1e-12);
    }
    CHECK(b.differential_inequality_slack(kappa) <= 1e-8);
  }
}

TEST_CASE("R0/R1 search matches closed forms for inverse-r profiles") {
  // kappa(r) = 1 - c/r: R0 = c, R1 = c + 2 sqrt 2
  for (double c : {1.0, 4.0, 9.0}) {
    const KappaProfile kappa = KappaProfile::constant(1.0).perturbed_by_inverse_r(c);
    RateBundleOptions opts;
    opts.r_max = c + 10.0;
    const RateBundle b = compute_rate_bundle(kappa, kSqrt2, opts);
    CHECK(b.R0 == doctest::Approx(c).epsilon(1e-8));
    CHECK(b.R1 == doctest::Approx(c + 2.0 * kSqrt2).epsilon(1e-8));
  }
}

TEST_CASE("R1 beyond r_max is reported with advice") {
  const KappaProfile kappa = KappaProfile::constant(1.0).perturbed_by_inverse_r(9.0);
  RateBundleOptions opts;
  opts.r_max = 6.0;
  CHECK_THROWS_WITH_AS(compute_rate_bundle(kappa, kSqrt2, opts),
                       doctest::Contains("increase r_max"), Error);
}

TEST_CASE("profiles outside K are rejected") {
  RateBundleOptions opts;
  CHECK_THROWS_AS(compute_rate_bundle(KappaProfile::constant(-0.5), kSqrt2, opts),
                  Error);
}

TEST_CASE("grid refinement moves lambda and C by less than 1e-4 relative") {
  const std::vector<KappaProfile> profiles = {
      KappaProfile::constant(1.0),
      KappaProfile::constant(1.0).perturbed_by_inverse_r(2.0),
      KappaProfile::analytic(
          [](double r) { return 1.2 - 0.8 * std::exp(-r) - 1.5 / r; }, 0.0, "mix"),
  };
  for (const auto& kappa : profiles) {
    RateBundleOptions coarse;
    coarse.r_max = std::max(16.0, suggest_r_max(kappa));
    RateBundleOptions fine = coarse;
    coarse.n_nodes = 4001;
    fine.n_nodes = 8001;
    const RateBundle bc = compute_rate_bundle(kappa, kSqrt2, coarse);
    const RateBundle bf = compute_rate_bundle(kappa, kSqrt2, fine);
    CHECK(std::abs(bc.lambda - bf.lambda) < 1e-4 * bf.lambda);
    CHECK(std::abs(bc.C - bf.C) < 1e-4 * bf.C);
  }
}

TEST_CASE("lambda and C are monotone in the profile") {
  RngStream rng(101, 0);
  for (int trial = 0; trial < 8; ++trial) {
    const double a = 0.6 + 1.2 * rng.next_uniform();
    const double c = 3.0 * rng.next_uniform();
    const double dc = 0.2 + 1.5 * rng.next_uniform();
    const KappaProfile hi = KappaProfile::analytic(
        [a, c](double r) { return a - c / r; }, 0.0, "hi");
    const KappaProfile lo = hi.perturbed_by_inverse_r(dc);
    RateBundleOptions opts;
    opts.r_max = std::max(20.0, suggest_r_max(lo));
    const RateBundle bh = compute_rate_bundle(hi, kSqrt2, opts);
    const RateBundle bl = compute_rate_bundle(lo, kSqrt2, opts);
    CHECK(bh.lambda >= bl.lambda - 1e-9);
    CHECK(bh.C >= bl.C - 1e-9);
  }
}

TEST_CASE("gradient bounds") {
  const RateBundle b = compute_rate_bundle(KappaProfile::constant(1.0), kSqrt2);
  const GradientBounds gb = gradient_bounds(1.0, 1.0, b, 50.0);
  CHECK(gb.uniform == doctest::Approx(3.0 * 4.0 * kSqrt2).epsilon(1e-6));  // 16.971
  // the long-horizon limit keeps only the running-cost term
  CHECK(gb.finite_horizon ==
        doctest::Approx(1.0 / (b.lambda * b.C)).epsilon(1e-6));

  const GradientBounds at0 = gradient_bounds(1.0, 1.0, b, 0.0);
  CHECK(at0.finite_horizon == doctest::Approx(1.0 / b.C));

  const GradientBounds pure_terminal = gradient_bounds(0.0, 1.0, b, 2.0);
  CHECK(pure_terminal.finite_horizon ==
        doctest::Approx(std::exp(-b.lambda * 2.0) / b.C));

  // the finite-horizon value never exceeds the larger of the two pure terms
  RngStream rng(5, 5);
  for (int trial = 0; trial < 50; ++trial) {
    const double MF = 2.0 * rng.next_uniform();
    const double Mg = 2.0 * rng.next_uniform();
    const double tau = 5.0 * rng.next_uniform();
    const GradientBounds g = gradient_bounds(MF, Mg, b, tau);
    const double pure = std::max(MF / (b.lambda * b.C), Mg / b.C);
    CHECK(g.finite_horizon <= pure + 1e-12);
    CHECK(g.finite_horizon <= g.uniform + 1e-12);
  }
}

TEST_CASE("coefficient bounds") {
  OmegaFn omega = [](double) { return 1.0; };
  ModelConstants mc;
  mc.M_u = 1.0;
  const CoefficientBounds cb = coefficient_bounds(mc, 1.0, omega);
  CHECK(cb.control_bound == doctest::Approx(2.0));
  CHECK(cb.drift_perturbation == doctest::Approx(2.0));
  CHECK(cb.hess_H_pp == doctest::Approx(1.0));

  ModelConstants mc2;
  mc2.MF_x = 1.0;  // M_x = 0
  CHECK(coefficient_bounds(mc2, 3.0, omega).MH_x == doctest::Approx(1.0));

  ModelConstants mc3;
  mc3.M_x = 1.0;  // M_xu = 0
  CHECK(coefficient_bounds(mc3, 3.0, omega).MH_xp == doctest::Approx(1.0));
}

TEST_CASE("hessian tail integral closed form") {
  CHECK(hessian_tail_integral(0.5, 1.0) == doctest::Approx(0.932752).epsilon(1e-4));
  // quadrature oracle: integrate lambda/(e^{lambda s} - 1) far into the tail
  for (double lambda : {0.25, 0.5, 1.5})
    for (double theta : {0.3, 1.0, 2.5}) {
      const double num = oracles::simpson(
          [lambda](double s) { return lambda / std::expm1(lambda * s); }, theta,
          theta + 200.0 / lambda, 40000);
      CHECK(hessian_tail_integral(lambda, theta) ==
            doctest::Approx(num).epsilon(1e-6));
    }
}

TEST_CASE("hessian bound has an interior minimizer") {
  const KappaProfile kappa = KappaProfile::constant(1.0).perturbed_by_inverse_r(4.0);
  RateBundleOptions opts;
  opts.r_max = suggest_r_max(kappa);
  const RateBundle b = compute_rate_bundle(kappa, kSqrt2, opts);
  ModelConstants mc;
  mc.M_u = 1.0;
  mc.MF_x = 1.0;
  mc.M_x = 1.0;
  mc.M_xx = 0.5;
  const CoefficientBounds cb =
      coefficient_bounds(mc, 2.0, [](double) { return 1.0; });
  double theta_star = 0.0;
  const double tau = 3.0;
  const double bound = hessian_bound(1.0, cb, b, tau, &theta_star);
  CHECK(theta_star > 1e-6);
  CHECK(theta_star < tau);
  // objective evaluated away from theta_star is no better
  auto objective = [&](double theta) {
    const double A = (2.0 * 1.0 * b.lambda / std::expm1(b.lambda * tau) +
                      2.0 * cb.MH_x * hessian_tail_integral(b.lambda, theta) +
                      cb.MH_xx / b.lambda) /
                     b.C;
    return A * std::exp(cb.MH_xp * theta);
  };
  CHECK(bound == doctest::Approx(objective(theta_star)).epsilon(1e-10));
  CHECK(objective(theta_star * 0.25) >= bound - 1e-12);
  CHECK(objective(std::min(tau * 0.999, theta_star * 4.0)) >= bound - 1e-12);

  // dropping the terminal term reproduces the large-horizon limit
  double ts2 = 0.0;
  const double far = hessian_bound(0.0, cb, b, 1e6, &ts2);
  double grid_min = 1e300;
  for (int i = 1; i <= 400; ++i) {
    const double theta = std::exp(std::log(1e-6) + (std::log(50.0) - std::log(1e-6)) * i / 400.0);
    const double A = (2.0 * cb.MH_x * hessian_tail_integral(b.lambda, theta) +
                      cb.MH_xx / b.lambda) /
                     b.C;
    grid_min = std::min(grid_min, A * std::exp(cb.MH_xp * theta));
  }
  CHECK(far == doctest::Approx(grid_min).epsilon(1e-3));
  CHECK_THROWS_AS(hessian_bound(1.0, cb, b, -1.0), Error);
}

TEST_CASE("turnpike constants: trivial and plug-in cases") {
  const KappaProfile kappa = KappaProfile::constant(1.0);
  const RateBundle base = compute_rate_bundle(kappa, kSqrt2);
  OmegaFn omega = [](double) { return 1.0; };

  // tau = 0 when the data bound equals the zero-terminal bound
  ModelConstants mc;
  mc.M_u = 1.0;
  mc.MF_x = 0.3;
  mc.Mg_x = 0.3;
  const double Mphi0 = 0.3 / (base.C * base.lambda);
  const TurnpikeConstants t0 = turnpike_constants(kappa, kSqrt2, mc, omega, Mphi0);
  CHECK(t0.tau == doctest::Approx(0.0));
  CHECK_FALSE(t0.tau_clamped);

  // data below the zero-terminal bound clamps tau at zero with a flag
  const TurnpikeConstants tneg =
      turnpike_constants(kappa, kSqrt2, mc, omega, 0.5 * Mphi0);
  CHECK(tneg.tau == doctest::Approx(0.0));
  CHECK(tneg.tau_clamped);

  // uncontrolled drift: no perturbation, lambda_inf equals the base rate
  ModelConstants mc_unc = mc;
  mc_unc.M_u = 0.0;
  const TurnpikeConstants tu = turnpike_constants(kappa, kSqrt2, mc_unc, omega, 1.0);
  CHECK(tu.lambda_inf == doctest::Approx(base.lambda).epsilon(1e-9));

  // Mphi0 = 2 gives the perturbation coefficient (4*3 + 3*2)/2 = 9
  ModelConstants mc9;
  mc9.M_u = 1.0;
  mc9.MF_x = 2.0 * base.C * base.lambda;
  mc9.Mg_x = 1.0;
  const TurnpikeConstants t9 = turnpike_constants(kappa, kSqrt2, mc9, omega, 1.0);
  const KappaProfile k9 = kappa.perturbed_by_inverse_r(9.0);
  RateBundleOptions o9;
  o9.r_max = suggest_r_max(k9);
  const RateBundle b9 = compute_rate_bundle(k9, kSqrt2, o9);
  CHECK(t9.Mphi0_x == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(t9.lambda_inf == doctest::Approx(b9.lambda).epsilon(1e-6));
}

TEST_CASE("stiff profiles overflow with a clear error") {
  const KappaProfile kappa = KappaProfile::constant(1.0).perturbed_by_inverse_r(160.0);
  RateBundleOptions opts;
  opts.r_max = 400.0;
  CHECK_THROWS_WITH_AS(compute_rate_bundle(kappa, kSqrt2, opts),
                       doctest::Contains("too stiff"), Error);
}
