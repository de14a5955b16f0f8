#pragma once

#include <cstdint>
#include <string>

#include "cdl/coupling.hpp"
#include "cdl/hjb.hpp"
#include "cdl/model.hpp"

namespace cdl {

/// Terminal-cost choices the scenario schema knows about.
struct TerminalSpec {
  std::string kind = "linear";  // linear | sqrt1p | abs_smooth | zero
  double weight = 1.0;
  double smoothing = 0.1;  // abs_smooth only

  std::function<double(double)> fn() const;
  double lip() const;
  std::string tag() const;
};

/// Everything one experiment needs: a model family with parameters, a grid, a
/// horizon, the simulation configuration and an alternative terminal cost for
/// two-data experiments. Fully serialized into every report for provenance.
struct Scenario {
  std::string name = "unnamed";

  // model (family "fk"): b(x,u) = -alpha x + gamma_weight tanh(x) + u,
  // F(x,u) = ell(u) + state_cost, scalar state/control
  double alpha = 1.0;
  double sigma = 1.4142135623730951;  // sqrt(2)
  double gamma_weight = 0.0;
  std::string state_cost_kind = "sqrt1p";  // sqrt1p | zero
  double state_cost_weight = 0.0;
  std::string control_cost_kind = "quadratic";  // quadratic | quartic
  TerminalSpec terminal;
  TerminalSpec alt_terminal;

  Grid1D grid;
  double horizon = 1.0;
  SimConfig sim;

  std::string out_dir = "out";

  FkExampleParams fk_params() const;
  ControlModel build_model() const;                    // with scenario terminal
  ControlModel build_model(const TerminalSpec&) const; // custom terminal
  KappaProfile kappa_lower_bound() const;
  std::string to_json() const;  // canonical serialization for reports
};

/// Parses a scenario file. Unknown keys are rejected with an error naming the
/// key; values are validated against the module constructors.
Scenario load_scenario(const std::string& path);
Scenario parse_scenario_json(const std::string& text);

}  // namespace cdl
