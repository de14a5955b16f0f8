#pragma once

#include <limits>
#include <string>
#include <vector>

#include "cdl/model.hpp"

namespace cdl {

struct Grid1D {
  double x_min = -6.0;
  double x_max = 6.0;
  int n_x = 601;

  double dx() const { return (x_max - x_min) / (n_x - 1); }
  double x(int i) const { return x_min + i * dx(); }
  int nearest(double x) const;
  std::vector<double> nodes() const;
  void validate() const;  // throws on n_x < 3 or x_min >= x_max
};

struct SolveOptions {
  double dt_hint = std::numeric_limits<double>::infinity();
  double dt_exact = 0.0;       // > 0 pins dt (stability_decay shares it)
  double grad_clamp = std::numeric_limits<double>::infinity();
  double cfl_safety = 0.9;
  int n_snapshots = 201;
  int max_restarts = 8;
  int hess_boundary_skip = 5;  // interior window for Hessian diagnostics
};

/// Scalar diagnostics recorded at every time step of a solve.
struct DiagnosticsTrace {
  std::vector<double> t, lip_norm, hess_sup;
};

/// Space-time table of the value function: snapshot rows at increasing times
/// t_0 = 0 .. t_K = T, last row equal to the terminal data on the grid.
/// Immutable once returned by the solver.
class ValueFunction {
 public:
  Grid1D grid;
  std::vector<double> times;
  std::vector<std::vector<double>> values;  // [time][node]
  DiagnosticsTrace trace;
  double dt_used = 0.0;
  double grad_clamp = std::numeric_limits<double>::infinity();
  bool clamp_hit_interior = false;
  std::string terminal_tag;

  int n_times() const { return static_cast<int>(times.size()); }
  const std::vector<double>& slice(int k) const { return values[k]; }

  /// Bilinear interpolation in (t, x); x is clamped to the grid (Lipschitz
  /// extension consistent with the boundary treatment of the solver).
  double value(double t, double x) const;
  /// Spatial gradient at (t, x) from per-snapshot difference tables.
  double gradient(double t, double x) const;

  void build_gradient_tables();
  void write_csv(const std::string& path) const;  // t, x, value, grad, hess

 private:
  std::vector<std::vector<double>> grads_;
  int locate_time(double t) const;
};

/// Explicit monotone upwind solve of the backward semilinear equation
///   d_t phi = H(x, grad phi) - (sigma^2/2) lap phi,  phi_T = terminal,
/// on a 1D grid. The gradient is upwinded against the sign of the optimal
/// drift; boundary nodes use one-sided differences with the gradient clamped
/// to +-grad_clamp. dt respects dt <= dx^2 / (sigma^2 + dx sup|drift|),
/// adapted by halving and restarting when the drift grows mid-solve.
/// Throws on repeated CFL violation or non-finite values.
ValueFunction solve_backward(const ControlModel& model,
                             const std::vector<double>& terminal_values,
                             double T, const Grid1D& grid,
                             const SolveOptions& opts = {},
                             const std::string& terminal_tag = "");

struct ValueDiagnostics {
  double lip_norm = 0.0;
  double hess_sup = 0.0;  // over the interior window
  std::vector<double> grad, hess;
};
ValueDiagnostics value_diagnostics(const ValueFunction& vf, int t_index,
                                   int boundary_skip = 5);

struct ErgodicOptions {
  double unit_horizon = 1.0;
  double tol = 1e-6;
  int max_iter = 60;
  SolveOptions solve;
};

/// Stationary solution (alpha_inf, phi_inf) by fixed-point iteration of
/// g -> phi_0^{T,g} - phi_0^{T,g}(0) over the unit horizon. phi_inf is
/// normalized to vanish at the node nearest 0. The per-horizon drift of the
/// additive constant gives |alpha_inf|; its sign convention is recorded
/// explicitly because the two natural conventions differ.
struct ErgodicSolution {
  double alpha_inf = 0.0;
  std::vector<double> phi_inf;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> increment_sup;  // per-iteration sup-norm increments
  std::vector<double> increment_lip;
  std::string sign_convention =
      "value over one horizon T equals phi_inf + alpha_inf*T";
  Grid1D grid;

  double phi_inf_at(double x) const;       // linear interpolation, clamped
  double phi_inf_gradient(double x) const;
  void write_csv(const std::string& path) const;
};

ErgodicSolution ergodic_solve(const ControlModel& model, const Grid1D& grid,
                              const ErgodicOptions& opts = {});

/// Per-time Lipschitz distance between the value functions for terminal data
/// g and g'. Both solves share the grid and dt.
struct DecayCurve {
  std::vector<double> t;             // snapshot times
  std::vector<double> lip_distance;  // discrete Lip norm of the difference
};
DecayCurve stability_decay(const ControlModel& model,
                           const std::vector<double>& g,
                           const std::vector<double>& g_prime, double T,
                           const Grid1D& grid, const SolveOptions& opts = {});

}  // namespace cdl
