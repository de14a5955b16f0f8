#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cdl/hjb.hpp"
#include "cdl/model.hpp"
#include "cdl/rates.hpp"
#include "cdl/rng.hpp"

namespace cdl {

/// Euler-Maruyama configuration. Results depend only on (seed, dt, n_paths,
/// horizon, ...): paths are partitioned into fixed-size blocks, each path
/// draws from its own counter-based stream, and block partials are reduced in
/// block order, so worker count never changes the output.
struct SimConfig {
  double dt = 1e-3;
  int n_paths = 1000;
  double horizon = 1.0;
  std::uint64_t seed = 0;
  double merge_threshold = -1.0;  // < 0: default 10 sigma sqrt(dt)
  int output_stride = 10;         // record stats every this many steps
  int n_workers = 0;              // 0 = hardware choice; output-invariant
  bool store_snapshots = false;   // keep per-path samples at output times (d=1)

  void validate() const;  // dt in (0, horizon], n_paths >= 1
};

/// Time-dependent drift field (t, x) -> b(t,x).
using DriftField =
    std::function<void(double t, std::span<const double> x, std::span<double> out)>;
/// Initial sampler filling x_0 for one path from its stream.
using InitSampler = std::function<void(RngStream&, std::span<double>)>;

DriftField constant_drift_field(std::function<void(std::span<const double>,
                                                   std::span<double>)> b);
InitSampler point_init(std::vector<double> x0);

struct PathEnsemble {
  std::vector<double> t;
  std::vector<double> mean_x0, var_x0;  // first coordinate
  std::vector<double> mean_norm;
  std::vector<std::vector<double>> snapshots;  // [time][path], d = 1 only
  int n_flagged = 0;  // paths excluded after NaN/overflow
  int n_paths = 0;
};

PathEnsemble simulate_paths(const DriftField& drift, double sigma, int dim,
                            const InitSampler& init, const SimConfig& cfg);

/// Statistics of one coupled pair ensemble.
struct CouplingRun {
  std::vector<double> t;
  std::vector<double> mean_dist;       // E|X - X'|
  std::vector<double> mean_f;          // E f(|X - X'|) (zeros without a bundle)
  std::vector<double> stderr_f;
  std::vector<double> coalesced_frac;  // nondecreasing for reflection coupling
  std::vector<double> stderr_dist;
  std::vector<double> tau;             // per-path coalescence time, inf if none
  std::vector<double> terminal_first;  // terminal samples (store_snapshots, d=1)
  std::vector<double> terminal_second;
  double merge_threshold = 0.0;
  int n_paths = 0;
  int n_flagged = 0;  // paths excluded after NaN/overflow

  double survival(int k) const { return 1.0 - coalesced_frac[k]; }
  double survival_stderr(int k) const;
  /// CSV columns: s, mean_dist, mean_f_r, coalesced_frac, stderr.
  void write_csv(const std::string& path) const;
};

/// Coupling by reflection of two solutions of the same SDE: the second path
/// is driven by the increment reflected across the separation direction until
/// the paths come within the merge threshold, then they evolve as one and the
/// pair counts as coalesced.
CouplingRun reflection_coupling(const DriftField& drift, double sigma,
                                std::span<const double> x,
                                std::span<const double> x_prime,
                                const SimConfig& cfg,
                                const RateBundle* bundle = nullptr);

/// Controlled reflection coupling (scalar state): the first path runs the
/// optimal process for the supplied value function; the second applies the
/// same realized control process, evaluated along the first path, under
/// reflected noise. Reports the coupling statistics plus the realized cost
/// gap J(x'-path) - J(x-path).
struct ControlledCouplingRun {
  CouplingRun run;
  double mean_cost_gap = 0.0;
  double stderr_cost_gap = 0.0;
};
ControlledCouplingRun controlled_reflection_coupling(const ControlModel& model,
                                                     const ValueFunction& vf,
                                                     double x, double x_prime,
                                                     const SimConfig& cfg,
                                                     const RateBundle* bundle = nullptr);

/// Dominating scalar process for sticky coupling:
///   dr = (M_s - (sigma^2/2) kappa0(r) r) ds + 2 sigma 1{r>0} dW.
///
/// The indicator noise is discretized as a vanishing ramp min(1, r/band)
/// (band defaults to four one-step noise quanta) with truncation at zero for
/// the rare remaining overshoots. A hard indicator with truncation converges
/// to the *reflected* process instead, whose boundary local time breaks the
/// Gronwall envelope E f(r_s) <= int_0^s M; the ramp keeps the conditional
/// mean exact at the boundary, which is the defining property of the sticky
/// solution. kappa0 is evaluated as kappa0(min(max(r, cap_lo), cap_hi)) so the
/// effective profile is Lipschitz and constant outside a bounded interval.
struct StickyRun {
  std::vector<double> t;
  std::vector<double> mean_r, stderr_r;
  std::vector<double> mean_f, stderr_f;
};
StickyRun sticky_dominating(const KappaProfile& kappa0,
                            const std::function<double(double)>& M_schedule,
                            double sigma, double r0, const SimConfig& cfg,
                            const RateBundle* bundle = nullptr,
                            double noise_band = -1.0, double cap_lo = 1e-6,
                            double cap_hi = 1e6);

/// Implementable approximation of sticky coupling for two different drifts:
/// reflection steps while |X - X'| > delta_switch, synchronous steps
/// otherwise. Pairs never merge.
CouplingRun two_drift_coupling(const DriftField& drift1, const DriftField& drift2,
                               double sigma, std::span<const double> x,
                               std::span<const double> x_prime,
                               double delta_switch, const SimConfig& cfg);

/// Long-run samples of the invariant measure: an ensemble of chains, each
/// burned in and then thinned. cfg.n_paths is the chain count; horizon is
/// ignored.
std::vector<double> invariant_sampler(const DriftField& drift, double sigma,
                                      double burn_in, double thin_spacing,
                                      int samples_per_chain, const SimConfig& cfg);

/// Closed-form stationary density in one dimension,
///   density(x) proportional to exp((2/sigma^2) int_0^x beta(y) dy),
/// normalized by quadrature on the grid. Throws when the density does not
/// normalize (mass escaping at the grid boundary).
struct DensityTable {
  std::vector<double> x, pdf, cdf;
  double quantile(double q) const;
  double mean_abs_dev(double x0) const;  // int |x0 - y| density(y) dy
  std::vector<double> quantile_sample(int n) const;
};
DensityTable stationary_density_1d(const std::function<double(double)>& drift,
                                   double sigma, const Grid1D& grid);

}  // namespace cdl
