#include "cdl/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cdl/error.hpp"
#include "cdl/report.hpp"

namespace cdl {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::set<std::string>& known,
                         const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!known.count(it.key()))
      throw Error("scenario: unknown key \"" + it.key() + "\" in " + where);
  }
}

TerminalSpec parse_terminal(const json& j, const std::string& where) {
  reject_unknown_keys(j, {"kind", "weight", "smoothing"}, where);
  TerminalSpec t;
  t.kind = j.value("kind", "linear");
  t.weight = j.value("weight", 1.0);
  t.smoothing = j.value("smoothing", 0.1);
  if (t.kind != "linear" && t.kind != "sqrt1p" && t.kind != "abs_smooth" &&
      t.kind != "zero")
    throw Error("scenario: unknown terminal kind \"" + t.kind + "\" in " + where);
  if (t.kind == "abs_smooth" && !(t.smoothing > 0.0))
    throw Error("scenario: abs_smooth needs positive smoothing in " + where);
  return t;
}

}  // namespace

std::function<double(double)> TerminalSpec::fn() const {
  const double w = weight;
  if (kind == "linear") return [w](double x) { return w * x; };
  if (kind == "sqrt1p") return [w](double x) { return w * std::sqrt(1.0 + x * x); };
  if (kind == "abs_smooth") {
    const double eps = smoothing;
    return [w, eps](double x) { return w * (std::sqrt(x * x + eps * eps) - eps); };
  }
  return [](double) { return 0.0; };  // zero
}

double TerminalSpec::lip() const {
  return kind == "zero" ? 0.0 : std::abs(weight);
}

std::string TerminalSpec::tag() const {
  if (kind == "zero") return "zero";
  return kind + "(" + format12(weight) + ")";
}

FkExampleParams Scenario::fk_params() const {
  FkExampleParams p;
  p.alpha = alpha;
  p.sigma = sigma;
  if (gamma_weight != 0.0) {
    const double w = gamma_weight;
    p.gamma = [w](double x) { return w * std::tanh(x); };
    p.gamma_sup = std::abs(w);
    p.gamma_lip = std::abs(w);
    // max |(tanh)''| = 4/(3 sqrt 3)
    p.gamma_d2 = std::abs(w) * 4.0 / (3.0 * std::sqrt(3.0));
  }
  if (state_cost_kind == "sqrt1p" && state_cost_weight != 0.0) {
    const double w = state_cost_weight;
    p.f_cost = [w](double x) { return w * std::sqrt(1.0 + x * x); };
    p.f_lip = std::abs(w);
    p.f_d2 = std::abs(w);
  }
  if (control_cost_kind == "quartic") {
    p.ell = [](double u) { return 0.25 * u * u * u * u + 0.5 * u * u; };
    p.ell_d1 = [](double u) { return u * u * u + u; };
    p.ell_convexity = 1.0;
    p.ell_quadratic = false;
  }
  p.g_terminal = terminal.fn();
  p.g_lip = terminal.lip();
  return p;
}

ControlModel Scenario::build_model() const { return make_example_fk(fk_params()); }

ControlModel Scenario::build_model(const TerminalSpec& t) const {
  FkExampleParams p = fk_params();
  p.g_terminal = t.fn();
  p.g_lip = t.lip();
  return make_example_fk(p);
}

KappaProfile Scenario::kappa_lower_bound() const {
  return fk_kappa_lower_bound(fk_params());
}

std::string Scenario::to_json() const {
  JsonWriter w;
  w.begin_object()
      .field("name", name)
      .field("alpha", alpha)
      .field("sigma", sigma)
      .field("gamma_weight", gamma_weight)
      .field("state_cost_kind", state_cost_kind)
      .field("state_cost_weight", state_cost_weight)
      .field("control_cost_kind", control_cost_kind)
      .field("terminal", terminal.tag())
      .field("alt_terminal", alt_terminal.tag())
      .field("grid_x_min", grid.x_min)
      .field("grid_x_max", grid.x_max)
      .field("grid_n_x", grid.n_x)
      .field("horizon", horizon)
      .field("dt", sim.dt)
      .field("n_paths", sim.n_paths)
      .field("seed", static_cast<std::uint64_t>(sim.seed))
      .field("output_stride", sim.output_stride)
      .end_object();
  return w.str();
}

Scenario parse_scenario_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw Error(std::string("scenario: JSON parse failure: ") + e.what());
  }

  reject_unknown_keys(
      j, {"name", "model", "grid", "horizon", "sim", "alt_terminal", "out"},
      "top level");

  Scenario s;
  s.name = j.value("name", "unnamed");
  s.out_dir = j.value("out", "out");
  s.horizon = j.value("horizon", 1.0);
  if (!(s.horizon > 0.0)) throw Error("scenario: horizon must be positive");

  if (j.contains("model")) {
    const json& m = j["model"];
    reject_unknown_keys(m,
                        {"family", "alpha", "sigma", "gamma", "state_cost",
                         "control_cost", "terminal"},
                        "model");
    const std::string family = m.value("family", "fk");
    if (family != "fk")
      throw Error("scenario: unknown model family \"" + family + "\"");
    s.alpha = m.value("alpha", 1.0);
    s.sigma = m.value("sigma", std::sqrt(2.0));
    if (m.contains("gamma")) {
      reject_unknown_keys(m["gamma"], {"kind", "weight"}, "model.gamma");
      const std::string kind = m["gamma"].value("kind", "none");
      if (kind == "tanh")
        s.gamma_weight = m["gamma"].value("weight", 0.0);
      else if (kind != "none")
        throw Error("scenario: unknown gamma kind \"" + kind + "\"");
    }
    if (m.contains("state_cost")) {
      reject_unknown_keys(m["state_cost"], {"kind", "weight"}, "model.state_cost");
      s.state_cost_kind = m["state_cost"].value("kind", "sqrt1p");
      s.state_cost_weight = m["state_cost"].value("weight", 0.0);
      if (s.state_cost_kind != "sqrt1p" && s.state_cost_kind != "zero")
        throw Error("scenario: unknown state_cost kind \"" + s.state_cost_kind + "\"");
    }
    if (m.contains("control_cost")) {
      reject_unknown_keys(m["control_cost"], {"kind"}, "model.control_cost");
      s.control_cost_kind = m["control_cost"].value("kind", "quadratic");
      if (s.control_cost_kind != "quadratic" && s.control_cost_kind != "quartic")
        throw Error("scenario: unknown control_cost kind \"" + s.control_cost_kind +
                    "\"");
    }
    if (m.contains("terminal")) s.terminal = parse_terminal(m["terminal"], "model.terminal");
  }

  if (j.contains("alt_terminal"))
    s.alt_terminal = parse_terminal(j["alt_terminal"], "alt_terminal");

  if (j.contains("grid")) {
    const json& g = j["grid"];
    reject_unknown_keys(g, {"x_min", "x_max", "n_x"}, "grid");
    s.grid.x_min = g.value("x_min", -6.0);
    s.grid.x_max = g.value("x_max", 6.0);
    s.grid.n_x = g.value("n_x", 601);
    s.grid.validate();
  }

  if (j.contains("sim")) {
    const json& sim = j["sim"];
    reject_unknown_keys(
        sim, {"dt", "n_paths", "seed", "n_workers", "output_stride"}, "sim");
    s.sim.dt = sim.value("dt", 1e-3);
    s.sim.n_paths = sim.value("n_paths", 1000);
    s.sim.seed = sim.value("seed", std::uint64_t{0});
    s.sim.n_workers = sim.value("n_workers", 0);
    s.sim.output_stride = sim.value("output_stride", 10);
  }
  s.sim.horizon = s.horizon;
  s.sim.validate();

  // construct the model once so parameter errors surface at load time
  (void)s.build_model();
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("scenario: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario_json(buf.str());
}

}  // namespace cdl
