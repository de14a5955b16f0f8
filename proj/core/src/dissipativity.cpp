#include "cdl/dissipativity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "cdl/error.hpp"
#include "cdl/report.hpp"
#include "cdl/rng.hpp"

namespace cdl {

KappaProfile KappaProfile::analytic(std::function<double(double)> base,
                                    double tail_monotone_from, std::string label) {
  KappaProfile p;
  p.base_ = std::move(base);
  p.tail_monotone_from_ = tail_monotone_from;
  p.provenance_ = Provenance::analytic;
  p.label_ = std::move(label);
  return p;
}

KappaProfile KappaProfile::constant(double value) {
  return analytic([value](double) { return value; }, 0.0, "constant");
}

KappaProfile KappaProfile::tabulated(std::vector<double> r, std::vector<double> kappa,
                                     std::string label) {
  if (r.size() != kappa.size() || r.size() < 2)
    throw Error("tabulated profile needs matching r/kappa arrays of size >= 2");
  if (!std::is_sorted(r.begin(), r.end()))
    throw Error("tabulated profile grid must be increasing");
  if (r.front() <= 0.0) throw Error("tabulated profile grid must be positive");
  KappaProfile p;
  const double tail_from = r.back();
  auto rr = std::make_shared<std::vector<double>>(std::move(r));
  auto kk = std::make_shared<std::vector<double>>(std::move(kappa));
  p.base_ = [rr, kk](double x) {
    const auto& rg = *rr;
    const auto& kg = *kk;
    if (x <= rg.front()) return kg.front();
    if (x >= rg.back()) return kg.back();
    auto it = std::upper_bound(rg.begin(), rg.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - rg.begin());
    const double w = (x - rg[i - 1]) / (rg[i] - rg[i - 1]);
    return kg[i - 1] + w * (kg[i] - kg[i - 1]);
  };
  // past the table the profile is frozen at its last value, hence trivially
  // nondecreasing there
  p.tail_monotone_from_ = tail_from;
  p.provenance_ = Provenance::estimated;
  p.label_ = std::move(label);
  return p;
}

double KappaProfile::operator()(double r) const {
  if (r <= 0.0) throw Error("kappa profile evaluated at r <= 0");
  double v = base_(r) - inv_r_coeff_ / r;
  if (!std::isfinite(v)) throw Error("kappa profile not finite at r=" + format12(r));
  return v;
}

KappaProfile KappaProfile::perturbed_by_inverse_r(double c) const {
  if (c < 0.0) throw Error("inverse-r perturbation needs c >= 0");
  KappaProfile p = *this;
  p.inv_r_coeff_ += c;
  if (p.provenance_ != Provenance::estimated && c > 0.0)
    p.provenance_ = Provenance::perturbed;
  return p;
}

void KappaProfile::write_csv(const std::string& path,
                             std::span<const double> r_grid) const {
  std::ofstream out = open_output(path);
  out << "r,kappa\n";
  for (double r : r_grid) out << format12(r) << "," << format12((*this)(r)) << "\n";
}

namespace {

// integral of r*kappa^-(r) over [r_min, 1] on a log grid (trapezoid in
// t = log r; the integrand becomes e^{2t} kappa^-(e^t), smooth for the
// inverse-r perturbations this shows up with)
double negpart_integral_from(const KappaProfile& profile, double r_min, int n) {
  const double t_lo = std::log(r_min);
  const double t_hi = 0.0;
  const double h = (t_hi - t_lo) / n;
  auto integrand = [&](double t) {
    const double r = std::exp(t);
    const double k = profile(r);
    return k < 0.0 ? -k * r * r : 0.0;
  };
  double acc = 0.5 * (integrand(t_lo) + integrand(t_hi));
  for (int i = 1; i < n; ++i) acc += integrand(t_lo + i * h);
  return acc * h;
}

}  // namespace

MembershipReport check_in_K(const KappaProfile& profile, double tail_R, double tail_lo) {
  if (tail_R <= 0.0) throw Error("check_in_K: tail_R must be positive");
  if (tail_lo <= 0.0) tail_lo = 0.5 * tail_R;
  if (tail_lo >= tail_R) throw Error("check_in_K: tail window is empty");

  MembershipReport rep;
  rep.tail_window_lo = tail_lo;
  rep.tail_window_hi = tail_R;

  const int n_tail = 512;
  double inf = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= n_tail; ++i) {
    const double r = tail_lo + (tail_R - tail_lo) * i / n_tail;
    inf = std::min(inf, profile(r));
  }
  rep.tail_infimum = inf;

  const double coarse = negpart_integral_from(profile, 1e-6, 4096);
  const double fine = negpart_integral_from(profile, 1e-8, 8192);
  const double increment = std::abs(fine - coarse);
  if (increment > 1e-4 * std::max(1.0, std::abs(fine)))
    throw Error("check_in_K: negative-part quadrature does not converge "
                "(increment " + format12(increment) + "), integral likely infinite");
  rep.negpart_integral = fine;
  rep.in_K = rep.tail_infimum > 0.0 && std::isfinite(rep.negpart_integral);
  return rep;
}

KappaProfile estimate_kappa(const ControlledDrift& drift, int dim_x, int dim_u,
                            double sigma, std::span<const double> r_grid,
                            const BoxPlan& probe) {
  if (sigma <= 0.0) throw Error("estimate_kappa: sigma must be positive");
  if (r_grid.empty()) throw Error("estimate_kappa: empty r grid");
  if (!std::is_sorted(r_grid.begin(), r_grid.end()))
    throw Error("estimate_kappa: r grid must be increasing");
  if (probe.n_x <= 0 || probe.n_dir <= 0)
    throw Error("estimate_kappa: empty probe plan");
  if (static_cast<int>(probe.x_lo.size()) != dim_x)
    throw Error("estimate_kappa: probe box dimension mismatch");

  const int n_u = dim_u > 0 ? std::max(1, probe.n_u) : 1;
  RngStream rng(probe.seed, 0xd155);

  // probe points are shared across radii so profiles are comparable node to node
  std::vector<std::vector<double>> xs(probe.n_x, std::vector<double>(dim_x));
  std::vector<std::vector<double>> dirs(probe.n_dir, std::vector<double>(dim_x));
  std::vector<std::vector<double>> us(n_u, std::vector<double>(std::max(dim_u, 1)));
  for (auto& x : xs)
    for (int c = 0; c < dim_x; ++c)
      x[c] = probe.x_lo[c] + (probe.x_hi[c] - probe.x_lo[c]) * rng.next_uniform();
  for (auto& v : dirs) {
    double norm = 0.0;
    do {
      norm = 0.0;
      for (int c = 0; c < dim_x; ++c) {
        v[c] = rng.next_normal();
        norm += v[c] * v[c];
      }
      norm = std::sqrt(norm);
    } while (norm < 1e-12);
    for (int c = 0; c < dim_x; ++c) v[c] /= norm;
  }
  if (dim_u > 0) {
    for (auto& u : us)
      for (int c = 0; c < dim_u; ++c)
        u[c] = probe.u_lo[c] + (probe.u_hi[c] - probe.u_lo[c]) * rng.next_uniform();
  }

  std::vector<double> bx(dim_x), bxp(dim_x), xp(dim_x);
  std::vector<double> kappa(r_grid.size());
  std::span<const double> u_empty;
  for (std::size_t k = 0; k < r_grid.size(); ++k) {
    const double r = r_grid[k];
    if (r <= 0.0) throw Error("estimate_kappa: r grid must be positive");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& x : xs) {
      for (const auto& v : dirs) {
        for (int c = 0; c < dim_x; ++c) xp[c] = x[c] + r * v[c];
        for (const auto& u : us) {
          std::span<const double> uu =
              dim_u > 0 ? std::span<const double>(u.data(), dim_u) : u_empty;
          drift(x, uu, bx);
          drift(xp, uu, bxp);
          double ip = 0.0;
          for (int c = 0; c < dim_x; ++c) ip += (bx[c] - bxp[c]) * (x[c] - xp[c]);
          best = std::min(best, -2.0 * ip / (sigma * sigma * r * r));
        }
      }
    }
    kappa[k] = best;
  }
  return KappaProfile::tabulated(std::vector<double>(r_grid.begin(), r_grid.end()),
                                 std::move(kappa), "estimated");
}

KappaProfile estimate_kappa(const std::function<void(std::span<const double>,
                                                     std::span<double>)>& drift,
                            int dim_x, double sigma,
                            std::span<const double> r_grid, const BoxPlan& probe) {
  ControlledDrift wrapped = [&drift](std::span<const double> x,
                                     std::span<const double>,
                                     std::span<double> out) { drift(x, out); };
  return estimate_kappa(wrapped, dim_x, 0, sigma, r_grid, probe);
}

}  // namespace cdl
