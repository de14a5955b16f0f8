#include "cdl/hjb.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "cdl/error.hpp"
#include "cdl/report.hpp"

namespace cdl {

void Grid1D::validate() const {
  if (n_x < 3) throw Error("grid: n_x must be at least 3");
  if (!(x_min < x_max)) throw Error("grid: x_min must be below x_max");
}

int Grid1D::nearest(double xq) const {
  const double i = std::round((xq - x_min) / dx());
  return static_cast<int>(std::clamp(i, 0.0, static_cast<double>(n_x - 1)));
}

std::vector<double> Grid1D::nodes() const {
  std::vector<double> xs(n_x);
  for (int i = 0; i < n_x; ++i) xs[i] = x(i);
  return xs;
}

namespace {

double clampv(double v, double bound) { return std::clamp(v, -bound, bound); }

struct SliceDiags {
  double lip = 0.0;
  double hess_sup = 0.0;
};

SliceDiags slice_diagnostics(const std::vector<double>& phi, double dx,
                             int boundary_skip) {
  SliceDiags d;
  const int n = static_cast<int>(phi.size());
  for (int i = 0; i + 1 < n; ++i)
    d.lip = std::max(d.lip, std::abs(phi[i + 1] - phi[i]) / dx);
  const int lo = std::max(1, boundary_skip);
  const int hi = std::min(n - 2, n - 1 - boundary_skip);
  for (int i = lo; i <= hi; ++i)
    d.hess_sup = std::max(
        d.hess_sup, std::abs(phi[i + 1] - 2.0 * phi[i] + phi[i - 1]) / (dx * dx));
  return d;
}

}  // namespace

double ValueFunction::value(double t, double x) const {
  const int k = locate_time(t);
  const double xq = std::clamp(x, grid.x_min, grid.x_max);
  const double fi = (xq - grid.x_min) / grid.dx();
  const int i = std::min(static_cast<int>(fi), grid.n_x - 2);
  const double wx = fi - i;
  auto at = [&](int kk) {
    return values[kk][i] * (1.0 - wx) + values[kk][i + 1] * wx;
  };
  if (k + 1 >= n_times() || times[k + 1] == times[k]) return at(k);
  const double wt = (t - times[k]) / (times[k + 1] - times[k]);
  return at(k) * (1.0 - wt) + at(k + 1) * wt;
}

double ValueFunction::gradient(double t, double x) const {
  if (grads_.empty())
    throw Error("value function: gradient tables not built");
  const int k = locate_time(t);
  const double xq = std::clamp(x, grid.x_min, grid.x_max);
  const double fi = (xq - grid.x_min) / grid.dx();
  const int i = std::min(static_cast<int>(fi), grid.n_x - 2);
  const double wx = fi - i;
  auto at = [&](int kk) {
    return grads_[kk][i] * (1.0 - wx) + grads_[kk][i + 1] * wx;
  };
  if (k + 1 >= n_times() || times[k + 1] == times[k]) return at(k);
  const double wt = (t - times[k]) / (times[k + 1] - times[k]);
  return at(k) * (1.0 - wt) + at(k + 1) * wt;
}

int ValueFunction::locate_time(double t) const {
  if (t <= times.front()) return 0;
  if (t >= times.back()) return n_times() - 1;
  auto it = std::upper_bound(times.begin(), times.end(), t);
  return static_cast<int>(it - times.begin()) - 1;
}

void ValueFunction::build_gradient_tables() {
  if (!grads_.empty()) return;
  const double dx = grid.dx();
  grads_.resize(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    const auto& v = values[k];
    auto& g = grads_[k];
    g.resize(v.size());
    const int n = static_cast<int>(v.size());
    g[0] = clampv((v[1] - v[0]) / dx, grad_clamp);
    g[n - 1] = clampv((v[n - 1] - v[n - 2]) / dx, grad_clamp);
    for (int i = 1; i + 1 < n; ++i) g[i] = (v[i + 1] - v[i - 1]) / (2.0 * dx);
  }
}

void ValueFunction::write_csv(const std::string& path) const {
  std::ofstream out = open_output(path);
  out << "t,x,value,grad,hess\n";
  const double dx = grid.dx();
  for (int k = 0; k < n_times(); ++k) {
    const auto& v = values[k];
    for (int i = 0; i < grid.n_x; ++i) {
      double grad;
      if (i == 0)
        grad = (v[1] - v[0]) / dx;
      else if (i == grid.n_x - 1)
        grad = (v[i] - v[i - 1]) / dx;
      else
        grad = (v[i + 1] - v[i - 1]) / (2.0 * dx);
      double hess = 0.0;
      if (i > 0 && i + 1 < grid.n_x)
        hess = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (dx * dx);
      out << format12(times[k]) << "," << format12(grid.x(i)) << ","
          << format12(v[i]) << "," << format12(grad) << "," << format12(hess)
          << "\n";
    }
  }
}

ValueFunction solve_backward(const ControlModel& model,
                             const std::vector<double>& terminal_values, double T,
                             const Grid1D& grid, const SolveOptions& opts,
                             const std::string& terminal_tag) {
  grid.validate();
  if (model.state_dim() != 1)
    throw Error("solve_backward: the PDE solver is one-dimensional");
  if (!(T > 0.0)) throw Error("solve_backward: T must be positive");
  if (static_cast<int>(terminal_values.size()) != grid.n_x)
    throw Error("solve_backward: terminal data size does not match grid");

  const int n = grid.n_x;
  const double dx = grid.dx();
  const double s2 = model.sigma() * model.sigma();
  const std::vector<double> xs = grid.nodes();

  // initial dt from the terminal slice drift, with margin for growth
  double beta_est = 1.0;
  {
    std::vector<double> g0(n);
    g0[0] = clampv((terminal_values[1] - terminal_values[0]) / dx, opts.grad_clamp);
    g0[n - 1] = clampv((terminal_values[n - 1] - terminal_values[n - 2]) / dx,
                       opts.grad_clamp);
    for (int i = 1; i + 1 < n; ++i)
      g0[i] = (terminal_values[i + 1] - terminal_values[i - 1]) / (2.0 * dx);
    for (int i = 0; i < n; ++i)
      beta_est = std::max(beta_est, std::abs(optimal_drift1(model, xs[i], g0[i])));
  }
  double dt = opts.cfl_safety * dx * dx / (s2 + dx * 1.5 * beta_est);
  dt = std::min(dt, opts.dt_hint);
  const bool pinned = opts.dt_exact > 0.0;
  if (pinned) dt = opts.dt_exact;

  for (int attempt = 0; attempt <= opts.max_restarts; ++attempt) {
    const int K = std::max(1, static_cast<int>(std::ceil(T / dt - 1e-12)));
    const double dts = T / K;
    const int snap_every = std::max(1, K / std::max(1, opts.n_snapshots - 1));

    ValueFunction vf;
    vf.grid = grid;
    vf.dt_used = dts;
    vf.grad_clamp = opts.grad_clamp;
    vf.terminal_tag = terminal_tag;

    std::vector<double> phi = terminal_values;
    std::vector<double> next(n), grad_c(n), w_node(n), beta(n);
    std::vector<double> w_warm(n, 0.0);
    bool restart = false;

    // snapshots are collected backward then reversed
    std::vector<std::vector<double>> snaps;
    std::vector<double> snap_times;

    for (int step = K; step >= 1; --step) {
      const double t = step * dts;

      grad_c[0] = clampv((phi[1] - phi[0]) / dx, opts.grad_clamp);
      grad_c[n - 1] = clampv((phi[n - 1] - phi[n - 2]) / dx, opts.grad_clamp);
      for (int i = 1; i + 1 < n; ++i) grad_c[i] = (phi[i + 1] - phi[i - 1]) / (2.0 * dx);

      const SliceDiags diags = slice_diagnostics(phi, dx, opts.hess_boundary_skip);
      vf.trace.t.push_back(t);
      vf.trace.lip_norm.push_back(diags.lip);
      vf.trace.hess_sup.push_back(diags.hess_sup);
      if ((K - step) % snap_every == 0) {
        snaps.push_back(phi);
        snap_times.push_back(t);
      }

      double max_beta = 0.0;
      for (int i = 0; i < n; ++i) {
        w_node[i] = minimizer_w1(model, xs[i], grad_c[i], w_warm[i]);
        beta[i] = model.drift1(xs[i], w_node[i]);
        max_beta = std::max(max_beta, std::abs(beta[i]));
      }
      if (dts > dx * dx / (s2 + dx * max_beta)) {
        if (pinned)
          throw Error("solve_backward: pinned dt violates the CFL constraint");
        restart = true;
        break;
      }

      for (int i = 0; i < n; ++i) {
        double p_up;
        if (i == 0)
          p_up = grad_c[0];
        else if (i == n - 1)
          p_up = grad_c[n - 1];
        else
          p_up = beta[i] > 0.0 ? (phi[i + 1] - phi[i]) / dx
                               : (phi[i] - phi[i - 1]) / dx;
        const double w_up = minimizer_w1(model, xs[i], p_up, w_node[i]);
        const double hamil = -(model.cost1(xs[i], w_up) +
                               model.drift1(xs[i], w_up) * p_up);
        double lap;
        if (i == 0)
          lap = ((phi[1] - phi[0]) / dx - grad_c[0]) / dx;
        else if (i == n - 1)
          lap = (grad_c[n - 1] - (phi[n - 1] - phi[n - 2]) / dx) / dx;
        else
          lap = (phi[i + 1] - 2.0 * phi[i] + phi[i - 1]) / (dx * dx);
        next[i] = phi[i] - dts * (hamil - 0.5 * s2 * lap);
        w_warm[i] = w_up;
      }
      phi.swap(next);

      double amax = 0.0;
      for (double v : phi) amax = std::max(amax, std::abs(v));
      if (!std::isfinite(amax))
        throw Error("solve_backward: non-finite value at step " +
                    std::to_string(K - step + 1));
    }

    if (restart) {
      dt *= 0.5;
      continue;
    }

    const SliceDiags diags0 = slice_diagnostics(phi, dx, opts.hess_boundary_skip);
    vf.trace.t.push_back(0.0);
    vf.trace.lip_norm.push_back(diags0.lip);
    vf.trace.hess_sup.push_back(diags0.hess_sup);
    snaps.push_back(phi);
    snap_times.push_back(0.0);

    std::reverse(snaps.begin(), snaps.end());
    std::reverse(snap_times.begin(), snap_times.end());
    std::reverse(vf.trace.t.begin(), vf.trace.t.end());
    std::reverse(vf.trace.lip_norm.begin(), vf.trace.lip_norm.end());
    std::reverse(vf.trace.hess_sup.begin(), vf.trace.hess_sup.end());
    vf.values = std::move(snaps);
    vf.times = std::move(snap_times);

    // warn-level flag: interior nodes whose one-sided slope reaches the clamp
    for (const auto& slice : vf.values) {
      for (int i = n / 4; i < 3 * n / 4; ++i) {
        if (std::abs((slice[i + 1] - slice[i]) / dx) >= opts.grad_clamp)
          vf.clamp_hit_interior = true;
      }
    }
    vf.build_gradient_tables();
    return vf;
  }
  throw Error("solve_backward: CFL violation persists after dt adaptation");
}

ValueDiagnostics value_diagnostics(const ValueFunction& vf, int t_index,
                                   int boundary_skip) {
  if (t_index < 0 || t_index >= vf.n_times())
    throw Error("value_diagnostics: time index out of range");
  const auto& v = vf.slice(t_index);
  const int n = static_cast<int>(v.size());
  const double dx = vf.grid.dx();
  ValueDiagnostics d;
  d.grad.resize(n);
  d.hess.assign(n, 0.0);
  d.grad[0] = (v[1] - v[0]) / dx;
  d.grad[n - 1] = (v[n - 1] - v[n - 2]) / dx;
  for (int i = 1; i + 1 < n; ++i) d.grad[i] = (v[i + 1] - v[i - 1]) / (2.0 * dx);
  for (int i = 1; i + 1 < n; ++i)
    d.hess[i] = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (dx * dx);
  for (double g : d.grad) d.lip_norm = std::max(d.lip_norm, std::abs(g));
  const int lo = std::max(1, boundary_skip);
  const int hi = std::min(n - 2, n - 1 - boundary_skip);
  for (int i = lo; i <= hi; ++i) d.hess_sup = std::max(d.hess_sup, std::abs(d.hess[i]));
  return d;
}

double ErgodicSolution::phi_inf_at(double x) const {
  const double xq = std::clamp(x, grid.x_min, grid.x_max);
  const double fi = (xq - grid.x_min) / grid.dx();
  const int i = std::min(static_cast<int>(fi), grid.n_x - 2);
  const double w = fi - i;
  return phi_inf[i] * (1.0 - w) + phi_inf[i + 1] * w;
}

double ErgodicSolution::phi_inf_gradient(double x) const {
  const double dx = grid.dx();
  const double xq = std::clamp(x, grid.x_min, grid.x_max);
  int i = grid.nearest(xq);
  i = std::clamp(i, 1, grid.n_x - 2);
  return (phi_inf[i + 1] - phi_inf[i - 1]) / (2.0 * dx);
}

void ErgodicSolution::write_csv(const std::string& path) const {
  std::ofstream out = open_output(path);
  out << "x,phi_inf\n";
  for (int i = 0; i < grid.n_x; ++i)
    out << format12(grid.x(i)) << "," << format12(phi_inf[i]) << "\n";
}

ErgodicSolution ergodic_solve(const ControlModel& model, const Grid1D& grid,
                              const ErgodicOptions& opts) {
  grid.validate();
  if (!(opts.tol > 0.0)) throw Error("ergodic_solve: tol must be positive");

  const int n = grid.n_x;
  const int i0 = grid.nearest(0.0);
  const double dx = grid.dx();

  ErgodicSolution sol;
  sol.grid = grid;
  sol.phi_inf.assign(n, 0.0);

  SolveOptions sopts = opts.solve;
  sopts.n_snapshots = 2;  // only the t = 0 slice is needed per sweep

  std::vector<double> g(n, 0.0);
  double alpha_per_horizon = 0.0;
  for (int it = 1; it <= opts.max_iter; ++it) {
    const ValueFunction vf =
        solve_backward(model, g, opts.unit_horizon, grid, sopts, "ergodic-iterate");
    std::vector<double> next = vf.slice(0);
    alpha_per_horizon = next[i0];
    for (double& v : next) v -= alpha_per_horizon;

    double sup = 0.0, lip = 0.0;
    for (int i = 0; i < n; ++i) sup = std::max(sup, std::abs(next[i] - g[i]));
    for (int i = 0; i + 1 < n; ++i)
      lip = std::max(lip, std::abs((next[i + 1] - g[i + 1]) - (next[i] - g[i])) / dx);
    sol.increment_sup.push_back(sup);
    sol.increment_lip.push_back(lip);
    g.swap(next);
    sol.iterations = it;
    if (sup < opts.tol) {
      sol.converged = true;
      break;
    }
  }
  if (!sol.converged) {
    throw Error("ergodic_solve: no convergence within max_iter; last increment " +
                format12(sol.increment_sup.empty() ? -1.0 : sol.increment_sup.back()));
  }

  // one extra sweep measures the residual and the additive drift per horizon
  const ValueFunction vf =
      solve_backward(model, g, opts.unit_horizon, grid, sopts, "ergodic-residual");
  const std::vector<double>& last = vf.slice(0);
  double residual = 0.0;
  for (int i = 0; i < n; ++i)
    residual = std::max(residual, std::abs((last[i] - last[i0]) - g[i]));
  sol.residual = residual;
  sol.alpha_inf = last[i0] / opts.unit_horizon;
  sol.phi_inf = g;
  return sol;
}

DecayCurve stability_decay(const ControlModel& model, const std::vector<double>& g,
                           const std::vector<double>& g_prime, double T,
                           const Grid1D& grid, const SolveOptions& opts) {
  const ValueFunction vf = solve_backward(model, g, T, grid, opts, "g");
  SolveOptions pinned = opts;
  pinned.dt_exact = vf.dt_used;  // both solves share grid and dt
  const ValueFunction vfp = solve_backward(model, g_prime, T, grid, pinned, "g_prime");
  if (vf.n_times() != vfp.n_times())
    throw Error("stability_decay: snapshot schedules diverged");

  DecayCurve curve;
  const double dx = grid.dx();
  for (int k = 0; k < vf.n_times(); ++k) {
    const auto& a = vf.slice(k);
    const auto& b = vfp.slice(k);
    double lip = 0.0;
    for (int i = 0; i + 1 < grid.n_x; ++i) {
      const double d1 = (a[i + 1] - b[i + 1]) - (a[i] - b[i]);
      lip = std::max(lip, std::abs(d1) / dx);
    }
    curve.t.push_back(vf.times[k]);
    curve.lip_distance.push_back(lip);
  }
  return curve;
}

}  // namespace cdl
