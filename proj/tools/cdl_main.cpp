// cdl: command-line front end for the controlled-diffusion laboratory.
//
// Subcommands wire a scenario file to one experiment each and emit
// machine-readable reports (JSON + CSV) into the output directory. Reports
// are deterministic for a fixed (scenario, seed); wall-clock timings go to a
// separate sidecar file.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cdl/coupling.hpp"
#include "cdl/error.hpp"
#include "cdl/hjb.hpp"
#include "cdl/metrics.hpp"
#include "cdl/model.hpp"
#include "cdl/rates.hpp"
#include "cdl/report.hpp"
#include "cdl/scenario.hpp"
#include "cdl/verify.hpp"
#include "cdl/version.hpp"

namespace {

using namespace cdl;

struct CommonArgs {
  std::string scenario_path;
  std::string out_override;
  std::uint64_t seed_override = 0;
  bool seed_set = false;
  int paths_override = 0;
  double dt_override = 0.0;
};

Scenario load_with_overrides(const CommonArgs& args) {
  Scenario s = load_scenario(args.scenario_path);
  if (!args.out_override.empty()) s.out_dir = args.out_override;
  if (args.seed_set) s.sim.seed = args.seed_override;
  if (args.paths_override > 0) s.sim.n_paths = args.paths_override;
  if (args.dt_override > 0.0) s.sim.dt = args.dt_override;
  s.sim.validate();
  return s;
}

void attach_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--scenario", args.scenario_path, "scenario JSON file")
      ->required();
  cmd->add_option("--out", args.out_override, "output directory override");
  cmd->add_option("--seed", args.seed_override, "seed override")
      ->each([&args](const std::string&) { args.seed_set = true; });
  cmd->add_option("--paths", args.paths_override, "path count override");
  cmd->add_option("--dt", args.dt_override, "time step override");
}

JsonWriter report_header(const Scenario& s) {
  JsonWriter w;
  w.begin_object();
  w.field("version", kVersion);
  w.raw_field("scenario", s.to_json());
  return w;
}

// rate bundle plus the derived constant ledger for the scenario model
int cmd_rates(const Scenario& s) {
  const KappaProfile kappa = s.kappa_lower_bound();
  const ControlModel model = s.build_model();
  const ModelConstants& mc = model.constants();
  const RateBundle bundle = compute_rate_bundle(kappa, s.sigma);

  const GradientBounds gb = gradient_bounds(mc.MF_x, mc.Mg_x, bundle, s.horizon);
  const double Mphig = gb.uniform;
  const CoefficientBounds cb = coefficient_bounds(mc, Mphig, model.omega_fn());
  const StabilityPair fwd = forward_pair(kappa, s.sigma, mc, model.omega_fn(), Mphig);
  double theta_star = 0.0;
  const double hess =
      hessian_bound(mc.Mg_x, cb, fwd.bundle, std::max(s.horizon, 0.1), &theta_star);
  const TurnpikeConstants tc =
      turnpike_constants(kappa, s.sigma, mc, model.omega_fn(), s.alt_terminal.lip());

  JsonWriter out = report_header(s);
  out.raw_field("bundle", [&] {
    JsonWriter b;
    b.begin_object()
        .field("R0", fixed12(bundle.R0))
        .field("R1", fixed12(bundle.R1))
        .field("lambda", fixed12(bundle.lambda))
        .field("C", fixed12(bundle.C))
        .field("sigma", fixed12(bundle.sigma))
        .field("certified", bundle.certified())
        .end_object();
    return b.str();
  }());
  out.raw_field("ledger", [&] {
    JsonWriter l;
    l.begin_object()
        .field("M_phi_g_x_tau", fixed12(gb.finite_horizon))
        .field("M_phi_g_x", fixed12(gb.uniform))
        .field("control_bound", fixed12(cb.control_bound))
        .field("drift_perturbation", fixed12(cb.drift_perturbation))
        .field("hess_H_pp", fixed12(cb.hess_H_pp))
        .field("M_H_x", fixed12(cb.MH_x))
        .field("M_H_xp", fixed12(cb.MH_xp))
        .field("M_H_xx", fixed12(cb.MH_xx))
        .field("M_phi_g_xx_tau", fixed12(hess))
        .field("theta_star", fixed12(theta_star))
        .field("fwd_C", fixed12(tc.fwd_C))
        .field("fwd_lambda", fixed12(tc.fwd_lambda))
        .field("bwd_C", fixed12(tc.bwd_C))
        .field("bwd_lambda", fixed12(tc.bwd_lambda))
        .field("lambda_inf", fixed12(tc.lambda_inf))
        .field("tau", fixed12(tc.tau))
        .field("tau_clamped", tc.tau_clamped)
        .field("C_tilde", fixed12(tc.C_tilde))
        .field("lambda_tilde", fixed12(tc.lambda_tilde))
        .field("A_tilde", fixed12(tc.A_tilde))
        .field("M_phi0_x", fixed12(tc.Mphi0_x))
        .end_object();
    return l.str();
  }());
  out.end_object();
  write_text_file(s.out_dir + "/rates_report.json", out.str());
  bundle.write_f_table_csv(s.out_dir + "/f_table.csv");
  kappa.write_csv(s.out_dir + "/kappa.csv",
                  std::span<const double>(bundle.r).subspan(1));
  std::printf("rates: lambda=%s C=%s -> %s\n", format12(bundle.lambda).c_str(),
              format12(bundle.C).c_str(), (s.out_dir + "/rates_report.json").c_str());
  return 0;
}

int cmd_hjb(const Scenario& s) {
  const ControlModel model = s.build_model();
  const ModelConstants& mc = model.constants();
  const KappaProfile kappa = s.kappa_lower_bound();
  const RateBundle bundle = compute_rate_bundle(kappa, s.sigma);
  SolveOptions sopt;
  sopt.grad_clamp = gradient_bounds(mc.MF_x, mc.Mg_x, bundle, s.horizon).uniform;
  if (s.sim.dt > 0.0) sopt.dt_hint = s.sim.dt;

  std::vector<double> terminal(s.grid.n_x);
  const auto g = s.terminal.fn();
  for (int i = 0; i < s.grid.n_x; ++i) terminal[i] = g(s.grid.x(i));
  const ValueFunction vf =
      solve_backward(model, terminal, s.horizon, s.grid, sopt, s.terminal.tag());
  vf.write_csv(s.out_dir + "/value_function.csv");

  JsonWriter out = report_header(s);
  out.field("dt_used", fixed12(vf.dt_used));
  out.field("grad_clamp", fixed12(vf.grad_clamp));
  out.field("clamp_hit_interior", vf.clamp_hit_interior);
  std::vector<double> bound(vf.trace.t.size());
  for (std::size_t k = 0; k < vf.trace.t.size(); ++k)
    bound[k] = fixed12(gradient_bounds(mc.MF_x, mc.Mg_x, bundle,
                                       s.horizon - vf.trace.t[k])
                           .finite_horizon);
  std::vector<double> tt(vf.trace.t.size()), ll(vf.trace.t.size()),
      hh(vf.trace.t.size());
  for (std::size_t k = 0; k < tt.size(); ++k) {
    tt[k] = fixed12(vf.trace.t[k]);
    ll[k] = fixed12(vf.trace.lip_norm[k]);
    hh[k] = fixed12(vf.trace.hess_sup[k]);
  }
  out.field("trace_t", tt);
  out.field("trace_lip_norm", ll);
  out.field("trace_hess_sup", hh);
  out.field("gradient_bound", bound);
  out.end_object();
  write_text_file(s.out_dir + "/hjb_report.json", out.str());
  std::printf("hjb: %d time steps, dt=%s -> %s\n",
              static_cast<int>(vf.trace.t.size()), format12(vf.dt_used).c_str(),
              (s.out_dir + "/value_function.csv").c_str());
  return 0;
}

int cmd_ergodic(const Scenario& s) {
  const ControlModel model = s.build_model();
  ErgodicOptions eopt;
  eopt.unit_horizon = 1.0;
  const ErgodicSolution sol = ergodic_solve(model, s.grid, eopt);
  sol.write_csv(s.out_dir + "/phi_inf.csv");

  // sample the invariant measure of the ergodic optimal drift and check it
  // against the closed-form density
  DriftField beta_inf = [&](double, std::span<const double> x, std::span<double> out) {
    const double p = sol.phi_inf_gradient(x[0]);
    out[0] = model.drift1(x[0], minimizer_w1(model, x[0], p, -p));
  };
  SimConfig scfg = s.sim;
  scfg.n_paths = std::max(250, s.sim.n_paths / 10);  // chains
  scfg.horizon = 1.0;
  const std::vector<double> samples =
      invariant_sampler(beta_inf, s.sigma, 6.0, 0.5, 40, scfg);
  write_csv(s.out_dir + "/mu_inf_samples.csv", {"x"}, {&samples});
  const double span = std::max(3.0, 1.5 * std::max(std::abs(s.grid.x_min),
                                                   std::abs(s.grid.x_max)));
  const DensityTable mu = stationary_density_1d(
      [&](double x) {
        const double p = sol.phi_inf_gradient(x);
        return model.drift1(x, minimizer_w1(model, x, p, -p));
      },
      s.sigma, Grid1D{-span, span, 3601});
  const double w1 = w1_empirical_1d(
      samples, mu.quantile_sample(static_cast<int>(samples.size())));

  JsonWriter out = report_header(s);
  out.field("mu_inf_w1_vs_density", fixed12(w1));
  out.field("mu_inf_samples", static_cast<int>(samples.size()));
  out.field("alpha_inf", fixed12(sol.alpha_inf));
  out.field("sign_convention", sol.sign_convention);
  out.field("residual", fixed12(sol.residual));
  out.field("iterations", sol.iterations);
  std::vector<double> inc(sol.increment_sup.size());
  for (std::size_t k = 0; k < inc.size(); ++k) inc[k] = fixed12(sol.increment_sup[k]);
  out.field("increment_sup", inc);
  out.end_object();
  write_text_file(s.out_dir + "/ergodic_report.json", out.str());
  std::printf("ergodic: alpha_inf=%s residual=%s iterations=%d\n",
              format12(sol.alpha_inf).c_str(), format12(sol.residual).c_str(),
              sol.iterations);
  return 0;
}

int cmd_coupling(const Scenario& s) {
  const ControlModel model = s.build_model();
  const KappaProfile kappa = s.kappa_lower_bound();
  const RateBundle bundle = compute_rate_bundle(kappa, s.sigma);

  // reflection coupling of the zero-control dynamics
  DriftField drift = [&model](double, std::span<const double> x,
                              std::span<double> out) {
    out[0] = model.drift1(x[0], 0.0);
  };
  const double x0 = 0.5, x0p = -0.5;
  const CouplingRun run =
      reflection_coupling(drift, s.sigma, {&x0, 1}, {&x0p, 1}, s.sim, &bundle);
  run.write_csv(s.out_dir + "/coupling_run.csv");

  double worst = -1e300;
  const double f_r0 = bundle.f_eval(1.0);
  for (std::size_t k = 0; k < run.t.size(); ++k)
    worst = std::max(worst, run.mean_f[k] -
                                f_r0 * std::exp(-bundle.lambda * run.t[k]) -
                                3.0 * run.stderr_f[k]);
  JsonWriter out = report_header(s);
  out.field("lambda", fixed12(bundle.lambda));
  out.field("C", fixed12(bundle.C));
  out.field("merge_threshold", fixed12(run.merge_threshold));
  out.field("worst_envelope_excess", fixed12(worst));
  out.field("envelope_holds", worst <= 1e-7);
  out.end_object();
  write_text_file(s.out_dir + "/coupling_report.json", out.str());
  std::printf("coupling: worst envelope excess %s -> %s\n", format12(worst).c_str(),
              (s.out_dir + "/coupling_run.csv").c_str());
  return worst <= 1e-7 ? 0 : 1;
}

int cmd_turnpike(const Scenario& s) {
  const ControlModel model = s.build_model();
  const ModelConstants& mc = model.constants();
  const KappaProfile kappa = s.kappa_lower_bound();
  const RateBundle base = compute_rate_bundle(kappa, s.sigma);
  const TurnpikeConstants tc =
      turnpike_constants(kappa, s.sigma, mc, model.omega_fn(), s.alt_terminal.lip());

  const ErgodicSolution erg = [&] {
    ErgodicOptions eopt;
    return ergodic_solve(model, s.grid, eopt);
  }();
  auto beta_inf = [&](double x) {
    const double p = erg.phi_inf_gradient(x);
    return model.drift1(x, minimizer_w1(model, x, p, -p));
  };
  const double span = std::max(3.0, 1.5 * std::max(std::abs(s.grid.x_min),
                                                   std::abs(s.grid.x_max)));
  const DensityTable mu =
      stationary_density_1d(beta_inf, s.sigma, Grid1D{-span, span, 3601});

  const ControlModel model_gp = s.build_model(s.alt_terminal);
  SolveOptions sopt;
  sopt.grad_clamp =
      gradient_bounds(mc.MF_x, s.alt_terminal.lip(), base, s.horizon).uniform;
  std::vector<double> terminal(s.grid.n_x);
  const auto gp = s.alt_terminal.fn();
  for (int i = 0; i < s.grid.n_x; ++i) terminal[i] = gp(s.grid.x(i));
  const ValueFunction vf = solve_backward(model_gp, terminal, s.horizon, s.grid,
                                          sopt, s.alt_terminal.tag());

  DriftField drift = [&](double t, std::span<const double> x, std::span<double> out) {
    const double p = vf.gradient(t, x[0]);
    out[0] = model_gp.drift1(x[0], minimizer_w1(model_gp, x[0], p, -p));
  };
  SimConfig cfg = s.sim;
  cfg.store_snapshots = true;
  const double x0 = 2.0;
  const PathEnsemble ens = simulate_paths(drift, s.sigma, 1, point_init({x0}), cfg);

  double g_phi_lip = 0.0;
  for (int i = 0; i + 1 < erg.grid.n_x; ++i) {
    const double d1 = (gp(erg.grid.x(i + 1)) - erg.phi_inf[i + 1]) -
                      (gp(erg.grid.x(i)) - erg.phi_inf[i]);
    g_phi_lip = std::max(g_phi_lip, std::abs(d1) / erg.grid.dx());
  }
  const double w1_init = mu.mean_abs_dev(x0);
  const std::vector<double> q = mu.quantile_sample(cfg.n_paths);

  std::vector<double> w1_curve(ens.t.size()), envelope(ens.t.size()),
      se(ens.t.size());
  for (std::size_t k = 0; k < ens.t.size(); ++k) {
    std::vector<double> sorted = ens.snapshots[k];
    std::sort(sorted.begin(), sorted.end());
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      const double d = std::abs(sorted[i] - q[i]);
      sum += d;
      sum_sq += d * d;
    }
    const double n = static_cast<double>(q.size());
    w1_curve[k] = sum / n;
    se[k] = std::sqrt(std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0)) / n);
    envelope[k] =
        tc.A_tilde * (w1_init * std::exp(-tc.lambda_inf * ens.t[k]) +
                      g_phi_lip * std::exp(-tc.lambda_inf * (s.horizon - ens.t[k])));
  }
  write_csv(s.out_dir + "/turnpike_curve.csv",
            {"s", "w1_to_mu_inf", "envelope", "stderr"},
            {&ens.t, &w1_curve, &envelope, &se});

  // decay-rate fits on both boundary layers of the curve
  std::size_t k_min = 0;
  for (std::size_t k = 1; k < w1_curve.size(); ++k)
    if (w1_curve[k] < w1_curve[k_min]) k_min = k;
  JsonWriter out = report_header(s);
  out.field("lambda_inf", fixed12(tc.lambda_inf));
  out.field("tau", fixed12(tc.tau));
  out.field("A_tilde", fixed12(tc.A_tilde));
  out.field("w1_initial", fixed12(w1_init));
  out.field("g_phi_lip_gap", fixed12(g_phi_lip));
  out.field("s_at_min", fixed12(ens.t[k_min]));
  out.field("w1_min", fixed12(w1_curve[k_min]));
  bool have_fit = false;
  if (k_min > 3) {
    try {
      const RateFit fit = fit_exponential_rate(ens.t, w1_curve, 0.0, ens.t[k_min]);
      out.field("approach_rate", fixed12(fit.rate));
      out.field("approach_r_squared", fixed12(fit.r_squared));
      have_fit = true;
    } catch (const Error&) {
    }
  }
  if (!have_fit) out.field("approach_rate", "unavailable");
  out.end_object();
  write_text_file(s.out_dir + "/turnpike_report.json", out.str());
  std::printf("turnpike: min W1 %s at s=%s -> %s\n", format12(w1_curve[k_min]).c_str(),
              format12(ens.t[k_min]).c_str(),
              (s.out_dir + "/turnpike_curve.csv").c_str());
  return 0;
}

int cmd_verify(const Scenario& s) {
  VerifyOptions vopt;
  vopt.seed = s.sim.seed;
  vopt.out_dir = s.out_dir;
  const std::vector<CriterionResult> results = run_acceptance(vopt);
  for (const auto& r : results)
    std::printf("[%s] criterion %2d: %s (%.1fs) %s\n", r.pass ? "PASS" : "FAIL",
                r.id, r.name.c_str(), r.seconds, r.pass ? "" : r.details.c_str());
  write_text_file(s.out_dir + "/verify_report.json",
                  acceptance_report_json(results, vopt.seed));
  write_text_file(s.out_dir + "/verify_timing.json",
                  acceptance_timing_json(results));
  const bool ok = all_pass(results);
  std::printf("verify: %s -> %s\n", ok ? "all criteria pass" : "FAILURES",
              (s.out_dir + "/verify_report.json").c_str());
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cdl: coupling/contraction laboratory for controlled diffusions"};
  app.set_version_flag("--version", cdl::kVersion);
  app.require_subcommand(1);

  CommonArgs args;
  int (*handler)(const Scenario&) = nullptr;
  struct Sub {
    const char* name;
    const char* help;
    int (*fn)(const Scenario&);
  };
  const Sub subs[] = {
      {"rates", "rate bundle and constant ledger", cmd_rates},
      {"hjb", "backward value-function solve with diagnostics", cmd_hjb},
      {"ergodic", "stationary solution by fixed-point iteration", cmd_ergodic},
      {"coupling", "reflection-coupling run and envelope check", cmd_coupling},
      {"turnpike", "distance-to-turnpike curve and envelope", cmd_turnpike},
      {"verify", "full acceptance suite", cmd_verify},
  };
  for (const auto& sub : subs) {
    CLI::App* cmd = app.add_subcommand(sub.name, sub.help);
    attach_common(cmd, args);
    cmd->callback([&handler, fn = sub.fn] { handler = fn; });
  }

  CLI11_PARSE(app, argc, argv);
  try {
    const Scenario s = load_with_overrides(args);
    return handler(s);
  } catch (const cdl::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
