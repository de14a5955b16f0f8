#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdl/dissipativity.hpp"
#include "cdl/probe.hpp"
#include "cdl/rates.hpp"

namespace cdl {

/// A stochastic control problem instance: drift b(x,u), running cost F(x,u),
/// terminal cost g(x), additive noise amplitude sigma, a convexity modulus
/// omega_R for the control minimization, and the declared regularity
/// constants. Evaluators are pure; a model may be shared across threads.
class ControlModel {
 public:
  using DriftFn = std::function<void(std::span<const double> x,
                                     std::span<const double> u,
                                     std::span<double> out)>;
  using CostFn = std::function<double(std::span<const double>, std::span<const double>)>;
  using TerminalFn = std::function<double(std::span<const double>)>;
  using MinimizerFn = std::function<void(std::span<const double> x,
                                         std::span<const double> p,
                                         std::span<double> u_out)>;

  struct Config {
    int state_dim = 1;
    int control_dim = 1;
    DriftFn drift;
    CostFn running_cost;
    TerminalFn terminal_cost;
    double sigma = 1.0;
    OmegaFn omega;  // R -> omega_R > 0, nonincreasing
    ModelConstants constants;
    /// Optional analytic derivative of u -> F(x,u) + b(x,u).p; central finite
    /// differences with step h = cbrt(eps)*scale otherwise.
    std::function<void(std::span<const double> x, std::span<const double> u,
                       std::span<const double> p, std::span<double> grad)>
        du_objective;
    /// Optional closed-form argmin of u -> F(x,u) + b(x,u).p.
    MinimizerFn closed_form_minimizer;
    std::string label;
  };

  explicit ControlModel(Config cfg);

  int state_dim() const { return cfg_.state_dim; }
  int control_dim() const { return cfg_.control_dim; }
  double sigma() const { return cfg_.sigma; }
  const ModelConstants& constants() const { return cfg_.constants; }
  double omega(double R) const { return cfg_.omega(R); }
  const OmegaFn& omega_fn() const { return cfg_.omega; }
  const std::string& label() const { return cfg_.label; }
  bool has_closed_form_minimizer() const {
    return static_cast<bool>(cfg_.closed_form_minimizer);
  }
  void closed_form_minimize(std::span<const double> x, std::span<const double> p,
                            std::span<double> u_out) const {
    cfg_.closed_form_minimizer(x, p, u_out);
  }

  void drift(std::span<const double> x, std::span<const double> u,
             std::span<double> out) const {
    cfg_.drift(x, u, out);
  }
  double running_cost(std::span<const double> x, std::span<const double> u) const {
    return cfg_.running_cost(x, u);
  }
  double terminal_cost(std::span<const double> x) const {
    return cfg_.terminal_cost(x);
  }

  // scalar fast paths for d = p = 1
  double drift1(double x, double u) const;
  double cost1(double x, double u) const;
  double terminal1(double x) const;

  void objective_gradient(std::span<const double> x, std::span<const double> u,
                          std::span<const double> p, std::span<double> grad) const;

 private:
  Config cfg_;
};

struct MinimizeOptions {
  double tol_grad = 1e-10;  // scaled by (1 + |objective at start|)
  int max_iter = 100;
};

/// argmin_u F(x,u) + b(x,u).p by damped Newton (golden-section fallback for
/// scalar controls), exploiting the strong convexity omega_{|p|} > 0. Uses the
/// model's closed-form minimizer when present. Throws MinimizeError on
/// non-convergence.
std::vector<double> minimizer_w(const ControlModel& model,
                                std::span<const double> x,
                                std::span<const double> p,
                                const MinimizeOptions& opts = {},
                                std::span<const double> warm_start = {});

/// H(x,p) = -min_u { F(x,u) + b(x,u).p }.
double hamiltonian(const ControlModel& model, std::span<const double> x,
                   std::span<const double> p, const MinimizeOptions& opts = {});

/// b(x, w(x,p)) = -D_p H(x,p).
std::vector<double> optimal_drift(const ControlModel& model,
                                  std::span<const double> x,
                                  std::span<const double> p,
                                  const MinimizeOptions& opts = {});

// scalar conveniences (d = p = 1)
double minimizer_w1(const ControlModel& model, double x, double p,
                    double warm_start = 0.0);
double hamiltonian1(const ControlModel& model, double x, double p);
double optimal_drift1(const ControlModel& model, double x, double p);

/// Sampled necessary-condition checks of the standing assumptions. A pass
/// does not prove an assumption; failures are reported, not thrown.
struct AssumptionCheck {
  std::string name;
  double worst = 0.0;     // worst sampled value of the checked quantity
  double declared = 0.0;  // declared constant it must not exceed
  bool pass = true;
};
struct AssumptionReport {
  std::vector<AssumptionCheck> checks;
  bool all_pass = true;
  double tol = 0.0;
  const AssumptionCheck* find(const std::string& name) const;
};
AssumptionReport check_assumptions(const ControlModel& model, const BoxPlan& probe,
                                   double tol = 1e-9);

/// Built-in model family: b(x,u) = -alpha x + gamma(x) + u,
/// F(x,u) = ell(u) + f(x), scalar state and control.
struct FkExampleParams {
  double alpha = 1.0;
  double sigma = 1.0;
  std::function<double(double)> gamma;  // default 0
  double gamma_sup = 0.0;
  double gamma_lip = 0.0;
  double gamma_d2 = 0.0;
  std::function<double(double)> f_cost;  // default 0
  double f_lip = 0.0;
  double f_d2 = 0.0;
  std::function<double(double)> ell;     // default u^2/2
  std::function<double(double)> ell_d1;  // derivative of ell, enables Newton
  double ell_convexity = 1.0;            // lower bound of ell'' (= omega)
  bool ell_quadratic = true;             // installs the closed-form minimizer
  std::function<double(double)> g_terminal;  // default x -> x
  double g_lip = 1.0;
};

/// Assembles the family model with auto-derived declared constants and
/// validates the declared gamma bounds by sampling (construction error on
/// violation).
ControlModel make_example_fk(const FkExampleParams& params);

/// Analytic two-regime lower bound for the dissipativity profile of
/// b0(x) = -alpha x + gamma(x):
///   kappa(r) = (2/sigma^2) (alpha - min(gamma_lip, 2 gamma_sup / r)).
/// Pointwise below the true profile, so bundles built on it are valid
/// certificates.
KappaProfile fk_kappa_lower_bound(const FkExampleParams& params);

}  // namespace cdl
