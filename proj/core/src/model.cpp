#include "cdl/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cdl/error.hpp"
#include "cdl/report.hpp"
#include "cdl/rng.hpp"

namespace cdl {

namespace {

constexpr double kFdStepBase = 6.055454452393343e-06;  // cbrt(machine epsilon)

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace

ControlModel::ControlModel(Config cfg) : cfg_(std::move(cfg)) {
  if (cfg_.state_dim < 1 || cfg_.control_dim < 1)
    throw Error("model: dimensions must be positive");
  if (!(cfg_.sigma > 0.0)) throw Error("model: sigma must be positive");
  if (!cfg_.drift || !cfg_.running_cost || !cfg_.terminal_cost)
    throw Error("model: drift, running cost and terminal cost are required");
  if (!cfg_.omega) throw Error("model: convexity modulus omega is required");
  const auto& mc = cfg_.constants;
  if (mc.M_u < 0 || mc.MF_x < 0 || mc.Mg_x < 0 || mc.M_x < 0 || mc.M_xx < 0 ||
      mc.M_xu < 0)
    throw Error("model: declared constants must be nonnegative");
  for (double R : {1.0, 10.0, 100.0}) {
    if (!(cfg_.omega(R) > 0.0))
      throw Error("model: omega_R must be strictly positive (degenerate at R=" +
                  format12(R) + ")");
  }
  if (cfg_.omega(10.0) > cfg_.omega(1.0) + 1e-12 ||
      cfg_.omega(100.0) > cfg_.omega(10.0) + 1e-12)
    throw Error("model: omega_R must be nonincreasing in R");
}

double ControlModel::drift1(double x, double u) const {
  double out = 0.0;
  cfg_.drift(std::span<const double>(&x, 1), std::span<const double>(&u, 1),
             std::span<double>(&out, 1));
  return out;
}

double ControlModel::cost1(double x, double u) const {
  return cfg_.running_cost(std::span<const double>(&x, 1),
                           std::span<const double>(&u, 1));
}

double ControlModel::terminal1(double x) const {
  return cfg_.terminal_cost(std::span<const double>(&x, 1));
}

void ControlModel::objective_gradient(std::span<const double> x,
                                      std::span<const double> u,
                                      std::span<const double> p,
                                      std::span<double> grad) const {
  if (cfg_.du_objective) {
    cfg_.du_objective(x, u, p, grad);
    return;
  }
  // central differences of u -> F(x,u) + b(x,u).p
  const int pdim = cfg_.control_dim;
  std::vector<double> up(u.begin(), u.end());
  std::vector<double> b(cfg_.state_dim);
  auto objective_at = [&](std::span<const double> uu) {
    cfg_.drift(x, uu, b);
    return cfg_.running_cost(x, uu) + dot(b, p);
  };
  for (int j = 0; j < pdim; ++j) {
    const double h = kFdStepBase * (1.0 + std::abs(u[j]));
    const double keep = up[j];
    up[j] = keep + h;
    const double fp = objective_at(up);
    up[j] = keep - h;
    const double fm = objective_at(up);
    up[j] = keep;
    grad[j] = (fp - fm) / (2.0 * h);
  }
}

std::vector<double> minimizer_w(const ControlModel& model,
                                std::span<const double> x,
                                std::span<const double> p,
                                const MinimizeOptions& opts,
                                std::span<const double> warm_start) {
  const int pdim = model.control_dim();
  std::vector<double> u(pdim, 0.0);
  if (static_cast<int>(warm_start.size()) == pdim)
    u.assign(warm_start.begin(), warm_start.end());

  if (model.has_closed_form_minimizer()) {
    std::vector<double> out(pdim);
    model.closed_form_minimize(x, p, out);
    return out;
  }

  const double pn = norm(p);
  const double omega = model.omega(std::max(pn, 1e-12));
  if (!(omega > 0.0)) throw Error("minimizer_w: omega at |p| is not positive");

  std::vector<double> b(model.state_dim());
  auto objective = [&](std::span<const double> uu) {
    model.drift(x, uu, b);
    return model.running_cost(x, uu) + dot(b, p);
  };
  const double scale = 1.0 + std::abs(objective(u)) + pn;
  const double tol = opts.tol_grad * scale;

  std::vector<double> grad(pdim), gp(pdim), trial(pdim);
  for (int it = 0; it < opts.max_iter; ++it) {
    model.objective_gradient(x, u, p, grad);
    const double gnorm = norm(grad);
    if (gnorm <= tol) return u;

    // Newton direction from a finite-difference Hessian; strong convexity
    // keeps the diagonal bounded below by omega
    std::vector<double> step(pdim, 0.0);
    if (pdim == 1) {
      const double h = kFdStepBase * (1.0 + std::abs(u[0]));
      trial = u;
      trial[0] = u[0] + h;
      model.objective_gradient(x, trial, p, gp);
      double hess = (gp[0] - grad[0]) / h;
      hess = std::max(hess, 0.5 * omega);
      step[0] = -grad[0] / hess;
    } else {
      // diagonal quasi-Newton: cheap and adequate for the small control
      // dimensions this library targets
      for (int j = 0; j < pdim; ++j) {
        const double h = kFdStepBase * (1.0 + std::abs(u[j]));
        trial = u;
        trial[j] = u[j] + h;
        model.objective_gradient(x, trial, p, gp);
        double hess = (gp[j] - grad[j]) / h;
        hess = std::max(hess, 0.5 * omega);
        step[j] = -grad[j] / hess;
      }
    }

    // damping on the gradient norm
    double factor = 1.0;
    bool accepted = false;
    for (int halve = 0; halve < 40; ++halve) {
      for (int j = 0; j < pdim; ++j) trial[j] = u[j] + factor * step[j];
      model.objective_gradient(x, trial, p, gp);
      if (norm(gp) < gnorm) {
        u = trial;
        accepted = true;
        break;
      }
      factor *= 0.5;
    }
    if (!accepted) {
      if (pdim == 1) break;  // fall through to golden section below
      throw MinimizeError("minimizer_w: damped Newton stalled", u, gnorm);
    }
  }

  model.objective_gradient(x, u, p, grad);
  if (norm(grad) <= tol) return u;

  if (pdim == 1) {
    // golden-section fallback on a bracket wide enough to contain the
    // minimizer bound M_u (1+|p|)/omega
    const double B =
        2.0 * std::max(1.0, model.constants().M_u) * (1.0 + pn) / omega + 1.0;
    double a = -B, c = B;
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = c - gr * (c - a), x2 = a + gr * (c - a);
    auto obj1 = [&](double v) { return objective(std::span<const double>(&v, 1)); };
    double f1 = obj1(x1), f2 = obj1(x2);
    for (int it = 0; it < 400 && c - a > 1e-14 * B; ++it) {
      if (f1 < f2) {
        c = x2;
        x2 = x1;
        f2 = f1;
        x1 = c - gr * (c - a);
        f1 = obj1(x1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + gr * (c - a);
        f2 = obj1(x2);
      }
    }
    u[0] = 0.5 * (a + c);
    model.objective_gradient(x, u, p, grad);
    if (norm(grad) <= std::max(tol, 1e2 * kFdStepBase * kFdStepBase * scale))
      return u;
  }
  throw MinimizeError("minimizer_w: no convergence within max_iter", u, norm(grad));
}

double hamiltonian(const ControlModel& model, std::span<const double> x,
                   std::span<const double> p, const MinimizeOptions& opts) {
  const std::vector<double> w = minimizer_w(model, x, p, opts);
  std::vector<double> b(model.state_dim());
  model.drift(x, w, b);
  return -(model.running_cost(x, w) + dot(b, p));
}

std::vector<double> optimal_drift(const ControlModel& model,
                                  std::span<const double> x,
                                  std::span<const double> p,
                                  const MinimizeOptions& opts) {
  const std::vector<double> w = minimizer_w(model, x, p, opts);
  std::vector<double> b(model.state_dim());
  model.drift(x, w, b);
  return b;
}

double minimizer_w1(const ControlModel& model, double x, double p, double warm) {
  const std::vector<double> w =
      minimizer_w(model, std::span<const double>(&x, 1),
                  std::span<const double>(&p, 1), {}, std::span<const double>(&warm, 1));
  return w[0];
}

double hamiltonian1(const ControlModel& model, double x, double p) {
  return hamiltonian(model, std::span<const double>(&x, 1),
                     std::span<const double>(&p, 1));
}

double optimal_drift1(const ControlModel& model, double x, double p) {
  return optimal_drift(model, std::span<const double>(&x, 1),
                       std::span<const double>(&p, 1))[0];
}

const AssumptionCheck* AssumptionReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

AssumptionReport check_assumptions(const ControlModel& model, const BoxPlan& probe,
                                   double tol) {
  const int dx = model.state_dim();
  const int du = model.control_dim();
  if (static_cast<int>(probe.x_lo.size()) != dx ||
      static_cast<int>(probe.u_lo.size()) != du)
    throw Error("check_assumptions: probe box dimension mismatch");

  RngStream rng(probe.seed, 0xa55e);
  auto draw = [&](const std::vector<double>& lo, const std::vector<double>& hi,
                  std::vector<double>& out) {
    for (std::size_t c = 0; c < lo.size(); ++c)
      out[c] = lo[c] + (hi[c] - lo[c]) * rng.next_uniform();
  };

  std::vector<double> x(dx), x2(dx), u(du), u0(du, 0.0);
  std::vector<double> b(dx), b2(dx);
  const auto& mc = model.constants();

  AssumptionReport rep;
  rep.tol = tol;

  double worst_dub = 0.0, worst_duF0 = 0.0, worst_F_lip = 0.0, worst_g_lip = 0.0;
  double min_omega_curvature = std::numeric_limits<double>::infinity();

  for (int i = 0; i < probe.n_x; ++i) {
    draw(probe.x_lo, probe.x_hi, x);
    draw(probe.x_lo, probe.x_hi, x2);
    double dxn = 0.0;
    for (int c = 0; c < dx; ++c) dxn += (x[c] - x2[c]) * (x[c] - x2[c]);
    dxn = std::sqrt(dxn);

    // |g(x)-g(x')| <= Mg_x |x-x'|
    if (dxn > 1e-9)
      worst_g_lip = std::max(worst_g_lip,
                             std::abs(model.terminal_cost(x) - model.terminal_cost(x2)) / dxn);

    for (int j = 0; j < std::max(1, probe.n_u); ++j) {
      draw(probe.u_lo, probe.u_hi, u);

      // |D_u b| by column-wise central differences
      for (int c = 0; c < du; ++c) {
        const double h = kFdStepBase * (1.0 + std::abs(u[c]));
        const double keep = u[c];
        u[c] = keep + h;
        model.drift(x, u, b);
        u[c] = keep - h;
        model.drift(x, u, b2);
        u[c] = keep;
        for (int rr = 0; rr < dx; ++rr)
          worst_dub = std::max(worst_dub, std::abs(b[rr] - b2[rr]) / (2.0 * h));
      }

      // |F(x,u)-F(x',u)| <= MF_x |x-x'|
      if (dxn > 1e-9)
        worst_F_lip = std::max(worst_F_lip,
                               std::abs(model.running_cost(x, u) -
                                        model.running_cost(x2, u)) / dxn);

      // curvature of u -> F(x,u) + b(x,u).p along coordinate directions
      std::vector<double> pvec(dx);
      draw(probe.p_lo, probe.p_hi, pvec);
      for (int c = 0; c < du; ++c) {
        const double h = 1e-4 * (1.0 + std::abs(u[c]));
        const double keep = u[c];
        auto obj = [&](double val) {
          u[c] = val;
          model.drift(x, u, b);
          const double res = model.running_cost(x, u) + dot(b, pvec);
          u[c] = keep;
          return res;
        };
        const double second = (obj(keep + h) - 2.0 * obj(keep) + obj(keep - h)) / (h * h);
        min_omega_curvature = std::min(min_omega_curvature, second);
      }
    }

    // |D_u F(x,0)| <= M_u
    for (int c = 0; c < du; ++c) {
      const double h = kFdStepBase;
      u0[c] = h;
      const double fpv = model.running_cost(x, u0);
      u0[c] = -h;
      const double fmv = model.running_cost(x, u0);
      u0[c] = 0.0;
      worst_duF0 = std::max(worst_duF0, std::abs(fpv - fmv) / (2.0 * h));
    }
  }

  auto push = [&](const std::string& name, double worst, double declared) {
    AssumptionCheck c;
    c.name = name;
    c.worst = worst;
    c.declared = declared;
    c.pass = worst <= declared + tol + 1e-6 * std::abs(declared);
    rep.all_pass = rep.all_pass && c.pass;
    rep.checks.push_back(c);
  };
  push("control_derivative_of_drift", worst_dub, mc.M_u);
  push("control_derivative_of_cost_at_zero", worst_duF0, mc.M_u);
  push("state_lipschitz_of_cost", worst_F_lip, mc.MF_x);
  push("state_lipschitz_of_terminal", worst_g_lip, mc.Mg_x);

  // omega positivity: sampled curvature must be >= omega at the probed |p|
  double p_rad = 0.0;
  for (std::size_t c = 0; c < probe.p_hi.size(); ++c)
    p_rad = std::max(p_rad, std::max(std::abs(probe.p_lo[c]), std::abs(probe.p_hi[c])));
  AssumptionCheck oc;
  oc.name = "convexity_modulus";
  oc.worst = min_omega_curvature;  // here "worst" is the smallest curvature
  oc.declared = model.omega(p_rad);
  oc.pass = min_omega_curvature >= oc.declared - 1e-3 - tol;
  rep.all_pass = rep.all_pass && oc.pass;
  rep.checks.push_back(oc);
  return rep;
}

ControlModel make_example_fk(const FkExampleParams& params) {
  if (!(params.alpha > 0.0)) throw Error("fk: alpha must be positive");
  if (!(params.sigma > 0.0)) throw Error("fk: sigma must be positive");
  if (!(params.ell_convexity > 0.0)) throw Error("fk: ell_convexity must be positive");

  auto gamma = params.gamma ? params.gamma : [](double) { return 0.0; };
  auto f_cost = params.f_cost ? params.f_cost : [](double) { return 0.0; };
  auto ell = params.ell ? params.ell : [](double u) { return 0.5 * u * u; };
  auto ell_d1 = params.ell_d1 ? params.ell_d1 : [](double u) { return u; };
  auto g_terminal = params.g_terminal ? params.g_terminal : [](double x) { return x; };

  // validate the declared gamma bounds by sampling
  {
    double sup = 0.0, lip = 0.0;
    for (int i = 0; i <= 400; ++i) {
      const double x = -20.0 + 40.0 * i / 400;
      sup = std::max(sup, std::abs(gamma(x)));
      const double h = 1e-5;
      lip = std::max(lip, std::abs(gamma(x + h) - gamma(x - h)) / (2.0 * h));
    }
    const double slack = 1e-6;
    if (sup > params.gamma_sup + slack)
      throw Error("fk: sampled |gamma| = " + format12(sup) +
                  " exceeds declared bound " + format12(params.gamma_sup));
    if (lip > params.gamma_lip + slack)
      throw Error("fk: sampled |gamma'| = " + format12(lip) +
                  " exceeds declared bound " + format12(params.gamma_lip));
  }

  ControlModel::Config cfg;
  cfg.state_dim = 1;
  cfg.control_dim = 1;
  cfg.sigma = params.sigma;
  cfg.label = "fk";
  cfg.drift = [alpha = params.alpha, gamma](std::span<const double> x,
                                            std::span<const double> u,
                                            std::span<double> out) {
    out[0] = -alpha * x[0] + gamma(x[0]) + u[0];
  };
  cfg.running_cost = [ell, f_cost](std::span<const double> x,
                                   std::span<const double> u) {
    return ell(u[0]) + f_cost(x[0]);
  };
  cfg.terminal_cost = [g_terminal](std::span<const double> x) {
    return g_terminal(x[0]);
  };
  cfg.omega = [w = params.ell_convexity](double) { return w; };
  // b = b0(x) + u makes the control gradient of the objective ell'(u) + p
  cfg.du_objective = [ell_d1](std::span<const double>, std::span<const double> u,
                              std::span<const double> p, std::span<double> grad) {
    grad[0] = ell_d1(u[0]) + p[0];
  };
  if (params.ell_quadratic) {
    cfg.closed_form_minimizer = [](std::span<const double>, std::span<const double> p,
                                   std::span<double> u_out) { u_out[0] = -p[0]; };
  }
  cfg.constants.M_u = std::max(1.0, std::abs(ell_d1(0.0)));
  cfg.constants.MF_x = params.f_lip;
  cfg.constants.Mg_x = params.g_lip;
  cfg.constants.M_x = params.alpha + params.gamma_lip;
  cfg.constants.M_xx = std::max(params.gamma_d2, params.f_d2);
  cfg.constants.M_xu = 0.0;
  return ControlModel(std::move(cfg));
}

KappaProfile fk_kappa_lower_bound(const FkExampleParams& params) {
  const double a = params.alpha;
  const double lip = params.gamma_lip;
  const double sup = params.gamma_sup;
  const double s2 = params.sigma * params.sigma;
  // the two regimes cross at r = 2 sup / lip; beyond it the bound increases
  const double tail_from = lip > 0.0 ? 2.0 * sup / lip : 0.0;
  return KappaProfile::analytic(
      [a, lip, sup, s2](double r) {
        const double deficit = lip > 0.0 ? std::min(lip, 2.0 * sup / r) : 0.0;
        return 2.0 / s2 * (a - deficit);
      },
      tail_from, "fk_two_regime");
}

}  // namespace cdl
