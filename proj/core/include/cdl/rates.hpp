#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cdl/dissipativity.hpp"

namespace cdl {

/// Contraction-rate bundle built from a dissipativity profile:
/// the radii R0, R1, the auxiliary functions phi, Phi, g tabulated on
/// [0, r_max], the concave distance transform f with derivative bounds
/// C <= f' <= 1 and C*r <= f(r) <= r, the exponential rate lambda and the
/// equivalence constant C.
///
/// The table is dense (the integrals are cumulative trapezoid sums on it) and
/// f extends linearly past the last node; since g is frozen for r >= R1 and
/// phi is constant past R0, that extension is exact.
struct RateBundle {
  double sigma = 1.0;
  double R0 = 0.0;
  double R1 = 0.0;
  double lambda = 0.0;
  double C = 0.0;
  std::vector<double> r, phi, Phi, g, f, fp, fpp;
  Provenance provenance = Provenance::analytic;
  std::string source_label;

  bool certified() const { return provenance != Provenance::estimated; }

  double f_eval(double x) const;
  double fp_eval(double x) const;
  double phi_eval(double x) const;

  /// Twisted norm of a Lipschitz function with constant `lip`:
  /// lip * sup_r r/f(r). Exact for linear terminal costs.
  double twisted_norm_linear(double lip) const;

  /// Max over interior nodes of f'' - (r/4) kappa f' + (lambda/(2 sigma^2)) f,
  /// which the construction keeps <= 0 up to quadrature error.
  double differential_inequality_slack(const KappaProfile& profile) const;

  void write_f_table_csv(const std::string& path) const;
};

struct RateBundleOptions {
  double r_max = 40.0;
  int n_nodes = 8001;
  double tail_R = 64.0;        // tail window end used for the K membership check
  double bisect_tol = 1e-10;
};

/// Builds the bundle for a profile in K. Throws if the profile fails the K
/// membership check, if R1 would exceed r_max (the message advises a larger
/// r_max), or if the weights exp(psi/4) would overflow.
RateBundle compute_rate_bundle(const KappaProfile& profile, double sigma,
                               const RateBundleOptions& opts = {});

/// Scans for R1 with doubling, so callers can size r_max before building.
double suggest_r_max(const KappaProfile& profile, double start = 8.0);

/// Lipschitz bounds on the value function over a remaining horizon tau:
///   finite_horizon = C^-1 (MF_x (1 - e^{-lambda tau})/lambda + Mg_x e^{-lambda tau})
///   uniform        = C^-1 (MF_x/lambda + Mg_x)
struct GradientBounds {
  double finite_horizon = 0.0;
  double uniform = 0.0;
};
GradientBounds gradient_bounds(double MF_x, double Mg_x, const RateBundle& bundle,
                               double tau);

struct ModelConstants {
  double M_u = 0.0;
  double MF_x = 0.0;
  double Mg_x = 0.0;
  double M_x = 0.0;
  double M_xx = 0.0;
  double M_xu = 0.0;
};

/// Algebraic bounds derived from the uniform gradient bound Mphig_x.
struct CoefficientBounds {
  double control_bound = 0.0;       // |w| <= M_u (1 + Mphig_x)/omega
  double drift_perturbation = 0.0;  // |b(x,w) - b(x,0)| <= M_u^2 (1 + Mphig_x)/omega
  double hess_H_pp = 0.0;           // |D_pp H| <= M_u^2/omega
  double MH_x = 0.0;                // M_x Mphig_x + MF_x
  double MH_xp = 0.0;               // M_xu M_u (1 + Mphig_x)/omega + M_x
  double MH_xx = 0.0;               // M_xx (1 + Mphig_x) + M_xu^2 (1 + Mphig_x)^2/omega
  double Dx_w = 0.0;                // M_xu (1 + Mphig_x)/omega
  double Dp_w = 0.0;                // M_u/omega
};
using OmegaFn = std::function<double(double)>;
CoefficientBounds coefficient_bounds(const ModelConstants& mc, double Mphig_x,
                                     const OmegaFn& omega);

/// Closed form of the tail integral int_theta^inf lambda/(e^{lambda s}-1) ds.
double hessian_tail_integral(double lambda, double theta);

/// Uniform Hessian bound over remaining horizon tau:
///   inf_theta C^-1 (2 Mg_x lambda/(e^{lambda tau}-1)
///                   + 2 MH_x * (-log(1 - e^{-lambda theta})) + MH_xx/lambda)
///             * e^{MH_xp theta}
/// minimized by golden section over log theta. The bundle must be the one
/// built on the perturbed (forward-coupling) profile.
double hessian_bound(double Mg_x, const CoefficientBounds& cb,
                     const RateBundle& bundle_perturbed, double tau,
                     double* theta_star = nullptr);

/// Forward/backward stability pairs and turnpike constants.
struct StabilityPair {
  double C_inv = 0.0;   // multiplies the data gap in the estimate
  double lambda = 0.0;
  RateBundle bundle;
  KappaProfile profile;  // the perturbed profile the bundle was built on
};

/// Pair (C^-1, lambda) of the bundle on
/// kappa(r) = kappa_b(r) - 4 M_u^2 (1 + Mphig_x)/(sigma^2 omega r).
StabilityPair forward_pair(const KappaProfile& kappa_b, double sigma,
                           const ModelConstants& mc, const OmegaFn& omega,
                           double Mphig_x, const RateBundleOptions& opts = {});

/// Pair of the bundle on
/// kappa(r) = kappa_b(r) - (M_u^2/(sigma^2 r)) (4(1+Mphig_x)/omega_{Mphig_x}
///            + (Mphig_x + Mphig2_x)/omega_{max}),
/// with the backward constant C_inv = M_u^2/(lambda C omega_{max}).
StabilityPair backward_pair(const KappaProfile& kappa_b, double sigma,
                            const ModelConstants& mc, const OmegaFn& omega,
                            double Mphig_x, double Mphig2_x,
                            const RateBundleOptions& opts = {});

struct TurnpikeConstants {
  double Mphi0_x = 0.0;    // uniform gradient bound for zero terminal data
  double lambda_inf = 0.0; // data-independent turnpike rate
  double tau = 0.0;        // boundary-layer width, clamped at zero
  bool tau_clamped = false;
  double C_tilde = 0.0;
  double lambda_tilde = 0.0;
  double A_tilde = 0.0;    // multiplicative constant of the turnpike envelope
  double fwd_C = 0.0, fwd_lambda = 0.0;
  double bwd_C = 0.0, bwd_lambda = 0.0;
  RateBundle base_bundle;      // on kappa_b
  RateBundle inf_bundle;       // on the lambda_inf profile
};

/// Assembles every turnpike-theorem constant for terminal data with Lipschitz
/// constant Mgprime_x. All entries are pure functions of (model constants,
/// kappa_b, omega, sigma).
TurnpikeConstants turnpike_constants(const KappaProfile& kappa_b, double sigma,
                                     const ModelConstants& mc, const OmegaFn& omega,
                                     double Mgprime_x,
                                     const RateBundleOptions& opts = {});

}  // namespace cdl
