#include <doctest.h>

#include <cmath>
#include <string>

#include "cdl/error.hpp"
#include "cdl/scenario.hpp"

using namespace cdl;

namespace {

const char* kValid = R"({
  "name": "fk-test",
  "model": {
    "family": "fk",
    "alpha": 1.0,
    "sigma": 1.4142135623730951,
    "gamma": {"kind": "tanh", "weight": 0.4},
    "state_cost": {"kind": "sqrt1p", "weight": 0.1},
    "control_cost": {"kind": "quadratic"},
    "terminal": {"kind": "linear", "weight": 0.25}
  },
  "alt_terminal": {"kind": "linear", "weight": 2.0},
  "grid": {"x_min": -6.0, "x_max": 6.0, "n_x": 601},
  "horizon": 3.0,
  "sim": {"dt": 0.001, "n_paths": 1000, "seed": 42, "output_stride": 50},
  "out": "out/test"
})";

}  // namespace

TEST_CASE("valid scenario parses and builds its model") {
  const Scenario s = parse_scenario_json(kValid);
  CHECK(s.name == "fk-test");
  CHECK(s.alpha == doctest::Approx(1.0));
  CHECK(s.gamma_weight == doctest::Approx(0.4));
  CHECK(s.state_cost_weight == doctest::Approx(0.1));
  CHECK(s.terminal.lip() == doctest::Approx(0.25));
  CHECK(s.alt_terminal.lip() == doctest::Approx(2.0));
  CHECK(s.grid.n_x == 601);
  CHECK(s.sim.seed == 42);
  CHECK(s.sim.horizon == doctest::Approx(3.0));

  const ControlModel m = s.build_model();
  CHECK(m.constants().MF_x == doctest::Approx(0.1));
  CHECK(m.constants().Mg_x == doctest::Approx(0.25));
  CHECK(m.constants().M_x == doctest::Approx(1.4));

  const KappaProfile k = s.kappa_lower_bound();
  CHECK(k(100.0) > 0.9);

  // canonical serialization is reproducible
  CHECK(s.to_json() == parse_scenario_json(kValid).to_json());
}

TEST_CASE("unknown keys are rejected by name") {
  std::string text = kValid;
  text.replace(text.find("\"horizon\""), 9, "\"horizzon\"");
  CHECK_THROWS_WITH_AS(parse_scenario_json(text), doctest::Contains("horizzon"),
                       Error);

  CHECK_THROWS_WITH_AS(parse_scenario_json(R"({"model": {"familia": "fk"}})"),
                       doctest::Contains("familia"), Error);
}

TEST_CASE("invalid values are rejected") {
  CHECK_THROWS_AS(parse_scenario_json(R"({"horizon": -1.0})"), Error);
  CHECK_THROWS_AS(parse_scenario_json(R"({"model": {"family": "mystery"}})"), Error);
  CHECK_THROWS_AS(
      parse_scenario_json(R"({"model": {"terminal": {"kind": "cubic"}}})"), Error);
  CHECK_THROWS_AS(parse_scenario_json(R"({"grid": {"n_x": 2}})"), Error);
  CHECK_THROWS_AS(parse_scenario_json("not json"), Error);
}

TEST_CASE("terminal spec factory") {
  TerminalSpec lin{"linear", 2.0, 0.1};
  CHECK(lin.fn()(3.0) == doctest::Approx(6.0));
  CHECK(lin.lip() == doctest::Approx(2.0));

  TerminalSpec smooth{"abs_smooth", 1.0, 0.1};
  CHECK(smooth.fn()(0.0) == doctest::Approx(0.0));
  CHECK(smooth.fn()(5.0) == doctest::Approx(std::sqrt(25.01) - 0.1));

  TerminalSpec zero{"zero", 3.0, 0.1};
  CHECK(zero.fn()(4.0) == doctest::Approx(0.0));
  CHECK(zero.lip() == doctest::Approx(0.0));
}
