#include <doctest.h>

#include <cmath>
#include <vector>

#include "cdl/error.hpp"
#include "cdl/model.hpp"
#include "cdl/rng.hpp"
#include "oracles.hpp"

using namespace cdl;

namespace {

const double kSqrt2 = std::sqrt(2.0);

// b = -x + u, F = u^2/2 (+ optional state cost), assembled by hand so the
// generic Newton path is exercised (no closed-form minimizer installed)
ControlModel raw_lq_model(std::function<double(double)> f_cost = nullptr,
                          bool analytic_gradient = false) {
  ControlModel::Config cfg;
  cfg.state_dim = 1;
  cfg.control_dim = 1;
  cfg.sigma = kSqrt2;
  cfg.drift = [](std::span<const double> x, std::span<const double> u,
                 std::span<double> out) { out[0] = -x[0] + u[0]; };
  cfg.running_cost = [f_cost](std::span<const double> x, std::span<const double> u) {
    return 0.5 * u[0] * u[0] + (f_cost ? f_cost(x[0]) : 0.0);
  };
  cfg.terminal_cost = [](std::span<const double> x) { return x[0]; };
  cfg.omega = [](double) { return 1.0; };
  cfg.constants.M_u = 1.0;
  cfg.constants.Mg_x = 1.0;
  cfg.constants.M_x = 1.0;
  if (analytic_gradient) {
    cfg.du_objective = [](std::span<const double>, std::span<const double> u,
                          std::span<const double> p, std::span<double> grad) {
      grad[0] = u[0] + p[0];
    };
  }
  return ControlModel(std::move(cfg));
}

double h1(const ControlModel& m, double x, double p) { return hamiltonian1(m, x, p); }

}  // namespace

TEST_CASE("hamiltonian closed-form and grid-search oracle agree") {
  const ControlModel m = raw_lq_model();
  // H(x,p) = p^2/2 + x p for this model
  CHECK(h1(m, 1.0, 2.0) == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(h1(m, 0.0, 0.0) == doctest::Approx(0.0));
  const double oracle = oracles::grid_search_hamiltonian(
      [](double x, double u) { return -x + u; },
      [](double, double u) { return 0.5 * u * u; }, 1.0, 2.0, -10.0, 10.0, 400000);
  CHECK(h1(m, 1.0, 2.0) == doctest::Approx(oracle).epsilon(1e-8));

  const ControlModel mf =
      raw_lq_model([](double x) { return std::sqrt(1.0 + x * x); });
  CHECK(h1(mf, 0.0, 1.0) == doctest::Approx(-0.5).epsilon(1e-9));
  const double oracle_f = oracles::grid_search_hamiltonian(
      [](double x, double u) { return -x + u; },
      [](double x, double u) { return 0.5 * u * u + std::sqrt(1.0 + x * x); }, 0.0,
      1.0, -10.0, 10.0, 400000);
  CHECK(h1(mf, 0.0, 1.0) == doctest::Approx(oracle_f).epsilon(1e-8));
}

TEST_CASE("minimizer_w solves the first-order condition") {
  const ControlModel m = raw_lq_model();
  CHECK(minimizer_w1(m, 0.7, 3.0) == doctest::Approx(-3.0).epsilon(1e-8));
  CHECK(minimizer_w1(m, 0.0, 0.0) == doctest::Approx(0.0));

  const ControlModel ma = raw_lq_model(nullptr, true);  // analytic gradient
  CHECK(minimizer_w1(ma, 0.7, 3.0) == doctest::Approx(-3.0).epsilon(1e-9));

  // quartic control cost: w solves u^3 + u + p = 0
  FkExampleParams qp;
  qp.sigma = kSqrt2;
  qp.ell = [](double u) { return 0.25 * u * u * u * u + 0.5 * u * u; };
  qp.ell_d1 = [](double u) { return u * u * u + u; };
  qp.ell_quadratic = false;
  const ControlModel mq = make_example_fk(qp);
  const double root = oracles::bisect([](double u) { return u * u * u + u + 1.0; },
                                      -2.0, 0.0);
  CHECK(root == doctest::Approx(-0.6823278).epsilon(1e-6));
  CHECK(minimizer_w1(mq, 0.3, 1.0) == doctest::Approx(root).epsilon(1e-9));
}

TEST_CASE("minimizer reports non-convergence with its last iterate") {
  const ControlModel m = raw_lq_model();
  MinimizeOptions opts;
  opts.max_iter = 0;
  opts.tol_grad = 1e-300;
  const double x = 0.0, p = 5.0;
  bool threw = false;
  try {
    minimizer_w(m, {&x, 1}, {&p, 1}, opts);
  } catch (const MinimizeError& e) {
    threw = true;
    CHECK(e.last_iterate.size() == 1);
    CHECK(e.grad_norm > 0.0);
  }
  CHECK(threw);
}

TEST_CASE("optimal drift equals the negative momentum gradient of H") {
  const ControlModel m = raw_lq_model();
  CHECK(optimal_drift1(m, 1.0, 2.0) == doctest::Approx(-3.0).epsilon(1e-8));
  CHECK(optimal_drift1(m, 0.0, 0.0) == doctest::Approx(0.0));

  const ControlModel mq = [] {
    FkExampleParams qp;
    qp.sigma = kSqrt2;
    qp.ell = [](double u) { return 0.25 * u * u * u * u + 0.5 * u * u; };
    qp.ell_d1 = [](double u) { return u * u * u + u; };
    qp.ell_quadratic = false;
    qp.f_cost = [](double x) { return 0.2 * std::sqrt(1.0 + x * x); };
    qp.f_lip = 0.2;
    qp.f_d2 = 0.2;
    return make_example_fk(qp);
  }();
  for (double p : {-2.0, -0.5, 0.8, 3.0}) {
    const double h = 1e-4;
    const double fd = -(hamiltonian1(mq, 0.4, p + h) - hamiltonian1(mq, 0.4, p - h)) /
                      (2.0 * h);
    CHECK(optimal_drift1(mq, 0.4, p) == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("minimality and control-size invariants hold on probes") {
  FkExampleParams qp;
  qp.sigma = kSqrt2;
  qp.ell = [](double u) { return 0.25 * u * u * u * u + 0.5 * u * u; };
  qp.ell_d1 = [](double u) { return u * u * u + u; };
  qp.ell_quadratic = false;
  const ControlModel m = make_example_fk(qp);
  const auto& mc = m.constants();
  RngStream rng(3, 3);
  for (int trial = 0; trial < 60; ++trial) {
    const double x = -4.0 + 8.0 * rng.next_uniform();
    const double p = -4.0 + 8.0 * rng.next_uniform();
    const double H = hamiltonian1(m, x, p);
    const double w = minimizer_w1(m, x, p);
    for (int j = 0; j < 12; ++j) {
      const double u = -6.0 + 12.0 * rng.next_uniform();
      CHECK(-H <= m.cost1(x, u) + m.drift1(x, u) * p + 1e-10);
    }
    const double omega = m.omega(std::abs(p));
    CHECK(std::abs(w) <= mc.M_u * (1.0 + std::abs(p)) / omega + 1e-8);
    CHECK(std::abs(m.drift1(x, w) - m.drift1(x, 0.0)) <=
          mc.M_u * mc.M_u * (1.0 + std::abs(p)) / omega + 1e-8);
  }
}

TEST_CASE("assumption checker: passes and failures") {
  // quadratic control cost reports unit curvature
  FkExampleParams p;
  p.sigma = kSqrt2;
  const ControlModel fk = make_example_fk(p);
  const AssumptionReport rep = check_assumptions(fk, BoxPlan::cube(1, 1, 5.0));
  CHECK(rep.all_pass);
  const AssumptionCheck* omega_check = rep.find("convexity_modulus");
  REQUIRE(omega_check != nullptr);
  CHECK(omega_check->worst == doctest::Approx(1.0).epsilon(1e-4));

  // b = -x + sin(u) has |D_u b| <= 1
  ControlModel::Config cfg;
  cfg.drift = [](std::span<const double> x, std::span<const double> u,
                 std::span<double> out) { out[0] = -x[0] + std::sin(u[0]); };
  cfg.running_cost = [](std::span<const double>, std::span<const double> u) {
    return 0.5 * u[0] * u[0];
  };
  cfg.terminal_cost = [](std::span<const double> x) { return x[0]; };
  cfg.sigma = 1.0;
  cfg.omega = [](double) { return 0.5 ; };
  cfg.constants.M_u = 1.0;
  cfg.constants.Mg_x = 1.0;
  const ControlModel msin{std::move(cfg)};
  const AssumptionReport rep2 = check_assumptions(msin, BoxPlan::cube(1, 1, 5.0));
  CHECK(rep2.find("control_derivative_of_drift")->pass);
  CHECK(rep2.find("control_derivative_of_drift")->worst <= 1.0 + 1e-6);

  // F(x,u) = x^2 cannot be 1-Lipschitz on [-10, 10]
  ControlModel::Config bad;
  bad.drift = [](std::span<const double> x, std::span<const double> u,
                 std::span<double> out) { out[0] = -x[0] + u[0]; };
  bad.running_cost = [](std::span<const double> x, std::span<const double>) {
    return x[0] * x[0];
  };
  bad.terminal_cost = [](std::span<const double> x) { return x[0]; };
  bad.sigma = 1.0;
  bad.omega = [](double) { return 1.0; };
  bad.constants.M_u = 1.0;
  bad.constants.MF_x = 1.0;
  bad.constants.Mg_x = 1.0;
  const ControlModel mbad{std::move(bad)};
  BoxPlan wide = BoxPlan::cube(1, 1, 10.0);
  wide.n_x = 512;
  const AssumptionReport rep3 = check_assumptions(mbad, wide);
  const AssumptionCheck* lip = rep3.find("state_lipschitz_of_cost");
  REQUIRE(lip != nullptr);
  CHECK_FALSE(lip->pass);
  CHECK(lip->worst > 10.0);
  CHECK(lip->worst < 20.0 + 1e-6);
  CHECK_FALSE(rep3.all_pass);
}

TEST_CASE("model construction validates its invariants") {
  ControlModel::Config cfg;
  cfg.drift = [](std::span<const double> x, std::span<const double> u,
                 std::span<double> out) { out[0] = -x[0] + u[0]; };
  cfg.running_cost = [](std::span<const double>, std::span<const double> u) {
    return 0.5 * u[0] * u[0];
  };
  cfg.terminal_cost = [](std::span<const double> x) { return x[0]; };
  cfg.omega = [](double) { return 1.0; };

  auto copy = cfg;
  copy.sigma = 0.0;
  CHECK_THROWS_AS(ControlModel(std::move(copy)), Error);

  copy = cfg;
  copy.sigma = 1.0;
  copy.constants.M_u = -1.0;
  CHECK_THROWS_AS(ControlModel(std::move(copy)), Error);

  copy = cfg;
  copy.sigma = 1.0;
  copy.omega = [](double) { return 0.0; };  // degenerate modulus
  CHECK_THROWS_AS(ControlModel(std::move(copy)), Error);

  copy = cfg;
  copy.sigma = 1.0;
  copy.omega = [](double R) { return 0.1 + 0.01 * R; };  // increasing
  CHECK_THROWS_AS(ControlModel(std::move(copy)), Error);
}

TEST_CASE("fk family: derived constants and dissipativity profile") {
  FkExampleParams ou;
  ou.alpha = 1.0;
  ou.sigma = kSqrt2;
  const ControlModel m = make_example_fk(ou);
  CHECK(m.constants().M_u == doctest::Approx(1.0));
  CHECK(m.constants().M_x == doctest::Approx(1.0));
  const KappaProfile k = fk_kappa_lower_bound(ou);
  for (double r : {0.1, 1.0, 10.0})
    CHECK(k(r) == doctest::Approx(2.0 / (ou.sigma * ou.sigma)));

  // two-regime profile with a negative dip for a weighted tanh perturbation
  FkExampleParams tw;
  tw.alpha = 1.0;
  tw.sigma = kSqrt2;
  tw.gamma = [](double x) { return 2.0 * std::tanh(x); };
  tw.gamma_sup = 2.0;
  tw.gamma_lip = 2.0;
  tw.gamma_d2 = 2.0 * 0.77;
  const KappaProfile k2 = fk_kappa_lower_bound(tw);
  CHECK(k2(0.1) == doctest::Approx(-1.0));
  CHECK(k2(100.0) > 0.9);
  CHECK(k2.tail_monotone_from() == doctest::Approx(2.0));

  // declared gamma bounds are validated by sampling
  FkExampleParams lie = tw;
  lie.gamma_sup = 1.0;  // actual sup is 2
  CHECK_THROWS_AS(make_example_fk(lie), Error);
}
