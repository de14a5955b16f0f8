#include "cdl/rates.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "cdl/error.hpp"
#include "cdl/report.hpp"

namespace cdl {

namespace {

constexpr double kExpArgLimit = 600.0;  // exp(psi/4) must stay in double range

// r * kappa^-(r), evaluated so that inverse-r singularities at the origin go
// through their finite limit instead of 0 * inf
double r_kappa_minus(const KappaProfile& k, double r) {
  const double s = std::max(r, 1e-12);
  const double v = k(s);
  return v < 0.0 ? -v * s : 0.0;
}

struct Scan {
  std::vector<double> r, kappa, suffix_min;
};

Scan scan_profile(const KappaProfile& profile, double r_max, int n) {
  Scan s;
  s.r.resize(n);
  s.kappa.resize(n);
  s.suffix_min.resize(n);
  for (int i = 0; i < n; ++i) {
    s.r[i] = r_max * (i + 1) / n;
    s.kappa[i] = profile(s.r[i]);
  }
  double run = std::numeric_limits<double>::infinity();
  for (int i = n - 1; i >= 0; --i) {
    run = std::min(run, s.kappa[i]);
    s.suffix_min[i] = run;
  }
  return s;
}

// inf_{r >= R} kappa(r) from the scan; valid because the profile is
// nondecreasing past its declared tail radius (checked by the caller)
double tail_min_from(const Scan& s, const KappaProfile& profile, double R) {
  auto it = std::lower_bound(s.r.begin(), s.r.end(), R);
  double m = profile(R);
  if (it != s.r.end())
    m = std::min(m, s.suffix_min[static_cast<std::size_t>(it - s.r.begin())]);
  return m;
}

struct Radii {
  double R0 = 0.0, R1 = 0.0;
  bool found = false;
};

Radii find_radii(const KappaProfile& profile, double r_max, int n_scan,
                 double bisect_tol) {
  Radii out;
  if (profile.tail_monotone_from() > r_max) return out;
  const Scan s = scan_profile(profile, r_max, n_scan);
  if (s.kappa.back() < 0.0) return out;  // negativity reaches the edge

  // R0 = sup of the negativity set
  int last_neg = -1;
  for (int i = 0; i < n_scan; ++i)
    if (s.kappa[i] < 0.0) last_neg = i;
  if (last_neg < 0) {
    out.R0 = 0.0;
  } else if (last_neg == n_scan - 1) {
    return out;
  } else {
    double lo = s.r[last_neg], hi = s.r[last_neg + 1];
    while (hi - lo > bisect_tol) {
      const double mid = 0.5 * (lo + hi);
      (profile(mid) < 0.0 ? lo : hi) = mid;
    }
    out.R0 = 0.5 * (lo + hi);
  }

  // R1: first radius >= R0 with inf_{r>=R} kappa(r) * R(R - R0) >= 8;
  // both factors are nondecreasing in R, so bisection applies
  auto condition = [&](double R) {
    return tail_min_from(s, profile, R) * R * (R - out.R0) - 8.0;
  };
  if (condition(r_max) < 0.0) return out;
  double lo = out.R0, hi = r_max;
  if (condition(std::max(out.R0, s.r.front())) >= 0.0) {
    hi = std::max(out.R0, s.r.front());
  } else {
    // coarse scan for the first grid point satisfying the condition
    for (int i = 0; i < n_scan; ++i) {
      if (s.r[i] <= out.R0) continue;
      if (s.suffix_min[i] * s.r[i] * (s.r[i] - out.R0) >= 8.0) {
        hi = s.r[i];
        lo = i > 0 ? std::max(out.R0, s.r[i - 1]) : out.R0;
        break;
      }
    }
  }
  while (hi - lo > bisect_tol) {
    const double mid = 0.5 * (lo + hi);
    (condition(mid) < 0.0 ? lo : hi) = mid;
  }
  out.R1 = 0.5 * (lo + hi);
  out.found = true;
  return out;
}

// table grid on [0, r_max]: uniform backbone plus clusters near the origin
// and near R1, with R0 and R1 inserted exactly
std::vector<double> table_grid(double r_max, int n, double R0, double R1) {
  std::vector<double> g;
  g.reserve(static_cast<std::size_t>(n) + 8);
  const int n_uniform = n / 2;
  const int n_origin = n / 4;
  const int n_r1 = n - n_uniform - n_origin;
  for (int i = 0; i <= n_uniform; ++i) g.push_back(r_max * i / n_uniform);
  const double origin_span = std::min(r_max, std::max(1.0, 0.05 * r_max));
  for (int i = 1; i <= n_origin; ++i) {
    const double u = static_cast<double>(i) / n_origin;
    g.push_back(origin_span * u * u);
  }
  const double lo = std::max(0.0, R1 - 1.0), hi = std::min(r_max, R1 + 1.0);
  for (int i = 0; i <= n_r1; ++i) g.push_back(lo + (hi - lo) * i / n_r1);
  g.push_back(R0);
  g.push_back(R1);
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

int index_of(const std::vector<double>& grid, double v) {
  auto it = std::lower_bound(grid.begin(), grid.end(), v);
  if (it == grid.end() || std::abs(*it - v) > 1e-9 * std::max(1.0, v))
    throw Error("rate bundle: grid node lookup failed");
  return static_cast<int>(it - grid.begin());
}

double interp_table(const std::vector<double>& xs, const std::vector<double>& ys,
                    double x) {
  auto it = std::upper_bound(xs.begin(), xs.end(), x);
  std::size_t i = static_cast<std::size_t>(it - xs.begin());
  if (i == 0) return ys.front();
  if (i >= xs.size()) i = xs.size() - 1;
  const double w = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
  return ys[i - 1] + w * (ys[i] - ys[i - 1]);
}

}  // namespace

double RateBundle::f_eval(double x) const {
  if (x < 0.0) throw Error("f evaluated at negative distance");
  if (x > r.back()) return f.back() + fp.back() * (x - r.back());
  return interp_table(r, f, x);
}

double RateBundle::fp_eval(double x) const {
  if (x < 0.0) throw Error("f' evaluated at negative distance");
  if (x > r.back()) return fp.back();
  return interp_table(r, fp, x);
}

double RateBundle::phi_eval(double x) const {
  if (x > r.back()) return phi.back();
  return interp_table(r, phi, x);
}

double RateBundle::twisted_norm_linear(double lip) const {
  double sup = 1.0;  // r/f(r) -> 1/f'(0) = 1 at the origin
  for (std::size_t i = 1; i < r.size(); ++i)
    if (f[i] > 0.0) sup = std::max(sup, r[i] / f[i]);
  sup = std::max(sup, 1.0 / fp.back());  // asymptote of the linear extension
  return lip * sup;
}

double RateBundle::differential_inequality_slack(const KappaProfile& profile) const {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < r.size(); ++i) {
    const double lhs = fpp[i] - 0.25 * r[i] * profile(r[i]) * fp[i];
    const double rhs = -lambda / (2.0 * sigma * sigma) * f[i];
    worst = std::max(worst, lhs - rhs);
  }
  return worst;
}

void RateBundle::write_f_table_csv(const std::string& path) const {
  write_csv(path, {"r", "phi", "Phi", "g", "f", "f_prime"},
            {&r, &phi, &Phi, &g, &f, &fp});
}

RateBundle compute_rate_bundle(const KappaProfile& profile, double sigma,
                               const RateBundleOptions& opts) {
  if (sigma <= 0.0) throw Error("rate bundle: sigma must be positive");
  if (opts.n_nodes < 64) throw Error("rate bundle: n_nodes too small");

  const MembershipReport membership =
      check_in_K(profile, std::max(opts.tail_R, opts.r_max));
  if (!membership.in_K)
    throw Error("rate bundle: profile is not in K (tail infimum " +
                format12(membership.tail_infimum) + ")");
  if (profile.tail_monotone_from() > opts.r_max)
    throw Error("rate bundle: profile tail starts beyond r_max; increase r_max");

  const Radii radii = find_radii(profile, opts.r_max, std::max(4096, opts.n_nodes),
                                 opts.bisect_tol);
  if (!radii.found)
    throw Error("rate bundle: R1 exceeds r_max = " + format12(opts.r_max) +
                "; increase r_max");

  RateBundle b;
  b.sigma = sigma;
  b.R0 = radii.R0;
  b.R1 = radii.R1;
  b.provenance = profile.provenance();
  b.source_label = profile.label();
  b.r = table_grid(opts.r_max, opts.n_nodes, radii.R0, radii.R1);
  const int n = static_cast<int>(b.r.size());

  // psi(r) = int_0^r s kappa^-(s) ds, then phi = exp(-psi/4)
  std::vector<double> psi(n, 0.0);
  {
    double prev = r_kappa_minus(profile, b.r[0]);
    for (int i = 1; i < n; ++i) {
      const double cur = r_kappa_minus(profile, b.r[i]);
      psi[i] = psi[i - 1] + 0.5 * (prev + cur) * (b.r[i] - b.r[i - 1]);
      prev = cur;
    }
  }
  const int i_R0 = index_of(b.r, b.R0);
  const int i_R1 = index_of(b.r, b.R1);
  if (psi[i_R1] / 4.0 > kExpArgLimit)
    throw Error("rate bundle: profile too stiff, exp(psi/4) overflows "
                "(psi/4 = " + format12(psi[i_R1] / 4.0) + ")");

  b.phi.resize(n);
  for (int i = 0; i < n; ++i) b.phi[i] = std::exp(-0.25 * psi[i]);

  b.Phi.resize(n);
  b.Phi[0] = 0.0;
  for (int i = 1; i < n; ++i)
    b.Phi[i] = b.Phi[i - 1] + 0.5 * (b.phi[i] + b.phi[i - 1]) * (b.r[i] - b.r[i - 1]);

  // IQ(r) = int_0^r Phi/phi and InvPhi(r) = int_0^r 1/phi
  std::vector<double> iq(n, 0.0), inv_phi_int(n, 0.0);
  for (int i = 1; i < n; ++i) {
    const double h = b.r[i] - b.r[i - 1];
    iq[i] = iq[i - 1] +
            0.5 * (b.Phi[i] / b.phi[i] + b.Phi[i - 1] / b.phi[i - 1]) * h;
    inv_phi_int[i] =
        inv_phi_int[i - 1] + 0.5 * (1.0 / b.phi[i] + 1.0 / b.phi[i - 1]) * h;
  }
  const double I_R1 = iq[i_R1];
  if (!(I_R1 > 0.0) || !std::isfinite(I_R1))
    throw Error("rate bundle: degenerate quadrature for lambda");
  b.lambda = sigma * sigma / I_R1;

  b.g.resize(n);
  for (int i = 0; i < n; ++i)
    b.g[i] = 1.0 - std::min(iq[i], I_R1) / (2.0 * I_R1);

  b.f.resize(n);
  b.fp.resize(n);
  b.fpp.resize(n);
  b.f[0] = 0.0;
  b.fp[0] = b.phi[0] * b.g[0];  // = 1
  for (int i = 1; i < n; ++i) {
    b.fp[i] = b.phi[i] * b.g[i];
    b.f[i] = b.f[i - 1] + 0.5 * (b.fp[i] + b.fp[i - 1]) * (b.r[i] - b.r[i - 1]);
  }
  for (int i = 0; i < n; ++i) {
    const double neg_part = r_kappa_minus(profile, b.r[i]);
    b.fpp[i] = -0.25 * neg_part * b.fp[i] -
               (b.r[i] < b.R1 ? b.Phi[i] / (2.0 * I_R1) : 0.0);
  }

  const double c1 = 0.5 * b.phi[i_R0];
  const double c2 = 1.0 / (2.0 * inv_phi_int[i_R1]);
  const double c3 = b.lambda * b.Phi[i_R1];
  b.C = std::min({c1, c2, c3});
  if (!(b.C > 0.0) || b.C > 1.0 + 1e-12)
    throw Error("rate bundle: constant C out of (0,1]");
  return b;
}

double suggest_r_max(const KappaProfile& profile, double start) {
  double r_max = std::max(start, 2.0 * profile.tail_monotone_from() + 1.0);
  for (int attempt = 0; attempt < 24; ++attempt) {
    const Radii radii = find_radii(profile, r_max, 8192, 1e-8);
    if (radii.found) return std::max(start, 1.3 * radii.R1 + 1.0);
    r_max *= 2.0;
  }
  throw Error("suggest_r_max: no admissible R1 below 2^24 * start");
}

GradientBounds gradient_bounds(double MF_x, double Mg_x, const RateBundle& bundle,
                               double tau) {
  if (tau < 0.0) throw Error("gradient_bounds: negative horizon");
  GradientBounds out;
  const double decay = std::exp(-bundle.lambda * tau);
  out.finite_horizon =
      (MF_x * (1.0 - decay) / bundle.lambda + Mg_x * decay) / bundle.C;
  out.uniform = (MF_x / bundle.lambda + Mg_x) / bundle.C;
  return out;
}

CoefficientBounds coefficient_bounds(const ModelConstants& mc, double Mphig_x,
                                     const OmegaFn& omega) {
  const double w = omega(Mphig_x);
  if (!(w > 0.0)) throw Error("coefficient_bounds: omega must be positive");
  CoefficientBounds cb;
  cb.control_bound = mc.M_u * (1.0 + Mphig_x) / w;
  cb.drift_perturbation = mc.M_u * mc.M_u * (1.0 + Mphig_x) / w;
  cb.hess_H_pp = mc.M_u * mc.M_u / w;
  cb.MH_x = mc.M_x * Mphig_x + mc.MF_x;
  cb.MH_xp = mc.M_xu * mc.M_u * (1.0 + Mphig_x) / w + mc.M_x;
  cb.MH_xx = mc.M_xx * (1.0 + Mphig_x) +
             mc.M_xu * mc.M_xu * (1.0 + Mphig_x) * (1.0 + Mphig_x) / w;
  cb.Dx_w = mc.M_xu * (1.0 + Mphig_x) / w;
  cb.Dp_w = mc.M_u / w;
  return cb;
}

double hessian_tail_integral(double lambda, double theta) {
  if (lambda <= 0.0 || theta <= 0.0)
    throw Error("hessian_tail_integral: lambda and theta must be positive");
  // antiderivative of lambda/(e^{lambda s}-1) is log(1 - e^{-lambda s})
  return -std::log1p(-std::exp(-lambda * theta));
}

double hessian_bound(double Mg_x, const CoefficientBounds& cb,
                     const RateBundle& bundle_perturbed, double tau,
                     double* theta_star) {
  if (tau <= 0.0) throw Error("hessian_bound: remaining horizon must be positive");
  const double lambda = bundle_perturbed.lambda;
  const double Cinv = 1.0 / bundle_perturbed.C;
  const double terminal_term = 2.0 * Mg_x * lambda / std::expm1(lambda * tau);

  auto objective = [&](double theta) {
    const double A = Cinv * (terminal_term +
                             2.0 * cb.MH_x * hessian_tail_integral(lambda, theta) +
                             cb.MH_xx / lambda);
    return A * std::exp(cb.MH_xp * theta);
  };

  // coarse bracket on a log grid, then golden section in log theta
  const double lo = std::log(std::min(tau, 1.0) * 1e-8);
  const double hi = std::log(tau * (1.0 - 1e-12));
  const int n_coarse = 96;
  double best_u = lo, best_v = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= n_coarse; ++i) {
    const double u = lo + (hi - lo) * i / n_coarse;
    const double v = objective(std::exp(u));
    if (v < best_v) {
      best_v = v;
      best_u = u;
    }
  }
  const double span = (hi - lo) / n_coarse;
  double a = std::max(lo, best_u - span), c = std::min(hi, best_u + span);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = c - gr * (c - a), x2 = a + gr * (c - a);
  double f1 = objective(std::exp(x1)), f2 = objective(std::exp(x2));
  for (int it = 0; it < 200 && c - a > 1e-12; ++it) {
    if (f1 < f2) {
      c = x2;
      x2 = x1;
      f2 = f1;
      x1 = c - gr * (c - a);
      f1 = objective(std::exp(x1));
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (c - a);
      f2 = objective(std::exp(x2));
    }
  }
  const double theta = std::exp(0.5 * (a + c));
  if (theta_star) *theta_star = theta;
  return objective(theta);
}

namespace {

RateBundleOptions sized_for(const KappaProfile& profile, RateBundleOptions opts) {
  opts.r_max = std::max(opts.r_max, suggest_r_max(profile));
  opts.tail_R = std::max(opts.tail_R, 2.0 * opts.r_max);
  return opts;
}

}  // namespace

StabilityPair forward_pair(const KappaProfile& kappa_b, double sigma,
                           const ModelConstants& mc, const OmegaFn& omega,
                           double Mphig_x, const RateBundleOptions& opts) {
  const double c =
      4.0 * mc.M_u * mc.M_u * (1.0 + Mphig_x) / (sigma * sigma * omega(Mphig_x));
  const KappaProfile kappa = kappa_b.perturbed_by_inverse_r(c);
  StabilityPair out;
  out.profile = kappa;
  out.bundle = compute_rate_bundle(kappa, sigma, sized_for(kappa, opts));
  out.lambda = out.bundle.lambda;
  out.C_inv = 1.0 / out.bundle.C;
  return out;
}

StabilityPair backward_pair(const KappaProfile& kappa_b, double sigma,
                            const ModelConstants& mc, const OmegaFn& omega,
                            double Mphig_x, double Mphig2_x,
                            const RateBundleOptions& opts) {
  const double m = std::max(Mphig_x, Mphig2_x);
  const double c = mc.M_u * mc.M_u / (sigma * sigma) *
                   (4.0 * (1.0 + Mphig_x) / omega(Mphig_x) +
                    (Mphig_x + Mphig2_x) / omega(m));
  const KappaProfile kappa = kappa_b.perturbed_by_inverse_r(c);
  StabilityPair out;
  out.profile = kappa;
  out.bundle = compute_rate_bundle(kappa, sigma, sized_for(kappa, opts));
  out.lambda = out.bundle.lambda;
  out.C_inv = mc.M_u * mc.M_u / (out.lambda * out.bundle.C * omega(m));
  return out;
}

TurnpikeConstants turnpike_constants(const KappaProfile& kappa_b, double sigma,
                                     const ModelConstants& mc, const OmegaFn& omega,
                                     double Mgprime_x,
                                     const RateBundleOptions& opts) {
  TurnpikeConstants tc;
  tc.base_bundle = compute_rate_bundle(kappa_b, sigma, sized_for(kappa_b, opts));
  const double lambda_b = tc.base_bundle.lambda;
  const double C_b = tc.base_bundle.C;
  tc.Mphi0_x = mc.MF_x / (C_b * lambda_b);

  if (!(tc.Mphi0_x > 0.0))
    throw Error("turnpike_constants: MF_x must be positive (tau is undefined "
                "for a zero running-cost gradient bound)");

  {
    const double c = mc.M_u * mc.M_u / (sigma * sigma) *
                     (4.0 * (1.0 + tc.Mphi0_x) / omega(tc.Mphi0_x) +
                      3.0 * tc.Mphi0_x / omega(2.0 * tc.Mphi0_x));
    const KappaProfile kappa_inf = kappa_b.perturbed_by_inverse_r(c);
    tc.inf_bundle = compute_rate_bundle(kappa_inf, sigma, sized_for(kappa_inf, opts));
  }
  tc.lambda_inf = tc.inf_bundle.lambda;
  const double C_inf = tc.inf_bundle.C;
  const double C_max =
      std::max(mc.M_u * mc.M_u / (tc.lambda_inf * C_inf * omega(2.0 * tc.Mphi0_x)),
               1.0 / C_inf);

  const double tau_raw = std::log(Mgprime_x / tc.Mphi0_x) / lambda_b;
  tc.tau = std::max(0.0, tau_raw);
  tc.tau_clamped = tau_raw < 0.0;

  const double Mphig_prime = (mc.MF_x / lambda_b + Mgprime_x) / C_b;
  {
    const double c = mc.M_u * mc.M_u / (sigma * sigma) *
                     (4.0 * (1.0 + tc.Mphi0_x) / omega(tc.Mphi0_x) +
                      (tc.Mphi0_x + Mphig_prime) / omega(Mphig_prime));
    const KappaProfile kappa_tilde = kappa_b.perturbed_by_inverse_r(c);
    const RateBundle tilde =
        compute_rate_bundle(kappa_tilde, sigma, sized_for(kappa_tilde, opts));
    tc.C_tilde = 1.0 / tilde.C;
    tc.lambda_tilde = tilde.lambda;
  }
  tc.A_tilde = std::max(
      C_max, C_max * tc.C_tilde * std::exp((tc.lambda_inf - tc.lambda_tilde) * tc.tau));

  const double Mphig = (mc.MF_x / lambda_b + mc.Mg_x) / C_b;
  const StabilityPair fwd = forward_pair(kappa_b, sigma, mc, omega, Mphig, opts);
  tc.fwd_C = fwd.C_inv;
  tc.fwd_lambda = fwd.lambda;
  const StabilityPair bwd =
      backward_pair(kappa_b, sigma, mc, omega, Mphig, Mphig_prime, opts);
  tc.bwd_C = bwd.C_inv;
  tc.bwd_lambda = bwd.lambda;
  return tc;
}

}  // namespace cdl
