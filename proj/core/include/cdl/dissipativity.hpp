#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cdl/probe.hpp"

namespace cdl {

enum class Provenance { analytic, estimated, perturbed };

/// Dissipativity profile r -> kappa(r), r > 0.
///
/// A profile is a base function (analytic callable or a table with linear
/// interpolation) minus an accumulated c/r perturbation. Storing the
/// perturbation coefficient separately keeps perturbations exactly additive
/// and lets the rate machinery integrate the 1/r part without cancellation.
///
/// `tail_monotone_from` declares a radius beyond which the base is
/// nondecreasing; every built-in profile has one, and the R0/R1 searches use
/// it to certify "for all r >= R" conditions past the scan window.
/// Profiles are immutable and safe to share across threads.
class KappaProfile {
 public:
  KappaProfile() = default;

  static KappaProfile analytic(std::function<double(double)> base,
                               double tail_monotone_from,
                               std::string label = "analytic");
  static KappaProfile constant(double value);
  static KappaProfile tabulated(std::vector<double> r, std::vector<double> kappa,
                                std::string label = "estimated");

  double operator()(double r) const;

  /// Returns a profile evaluating to (*this)(r) - c/r. Provenance becomes
  /// `perturbed` unless the source was `estimated` (which it stays).
  KappaProfile perturbed_by_inverse_r(double c) const;

  double inverse_r_coeff() const { return inv_r_coeff_; }
  Provenance provenance() const { return provenance_; }
  /// Certified profiles (analytic or perturbed-from-analytic) may back rate
  /// bundles used in envelope checks; estimated ones yield heuristic reports.
  bool certified() const { return provenance_ != Provenance::estimated; }
  double tail_monotone_from() const { return tail_monotone_from_; }
  const std::string& label() const { return label_; }

  /// Two-column CSV (r, kappa) sampled on the given grid.
  void write_csv(const std::string& path, std::span<const double> r_grid) const;

 private:
  std::function<double(double)> base_;
  double inv_r_coeff_ = 0.0;
  Provenance provenance_ = Provenance::analytic;
  double tail_monotone_from_ = 0.0;
  std::string label_;
};

/// Membership report for the profile class K: positive tail infimum and an
/// integrable negative part near zero.
struct MembershipReport {
  bool in_K = false;
  double tail_infimum = 0.0;
  double tail_window_lo = 0.0;
  double tail_window_hi = 0.0;
  double negpart_integral = 0.0;
};

/// Tests membership in K. The tail infimum is taken over the finite window
/// [tail_lo, tail_R] (tail_lo defaults to tail_R/2) and reported as such; the
/// negative-part integral of r*kappa^-(r) over (0,1] is computed on a log
/// grid in r down to r = 1e-8. Throws if the quadrature does not settle when
/// the cutoff is pushed down (non-integrable negative part).
MembershipReport check_in_K(const KappaProfile& profile, double tail_R,
                            double tail_lo = -1.0);

/// Sampled estimate of the dissipativity profile of a drift field:
/// for each r, the minimum over probed (x, direction, u) of
///   -2 <b(x,u) - b(x',u), x - x'> / (sigma^2 r^2),  |x - x'| = r.
/// A sampled minimum only upper-bounds the true infimum, so the result is
/// flagged `estimated`.
using ControlledDrift =
    std::function<void(std::span<const double> x, std::span<const double> u,
                       std::span<double> out)>;

KappaProfile estimate_kappa(const ControlledDrift& drift, int dim_x, int dim_u,
                            double sigma, std::span<const double> r_grid,
                            const BoxPlan& probe);

/// Convenience overload for uncontrolled drifts x -> b(x).
KappaProfile estimate_kappa(const std::function<void(std::span<const double>,
                                                     std::span<double>)>& drift,
                            int dim_x, double sigma,
                            std::span<const double> r_grid, const BoxPlan& probe);

}  // namespace cdl
