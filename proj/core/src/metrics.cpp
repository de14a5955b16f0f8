#include "cdl/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "cdl/error.hpp"
#include "cdl/rng.hpp"

namespace cdl {

namespace {

// uniform subsample without replacement (partial Fisher-Yates, seeded)
std::vector<double> subsample(std::span<const double> v, std::size_t m,
                              std::uint64_t seed) {
  std::vector<double> pool(v.begin(), v.end());
  RngStream rng(seed, 0x5ab5);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + rng.next_u64() % (pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(m);
  return pool;
}

}  // namespace

W1Result w1_empirical_1d_full(std::span<const double> a, std::span<const double> b,
                              std::uint64_t seed) {
  if (a.empty() || b.empty()) throw Error("w1_empirical_1d: empty input");
  W1Result res;
  std::vector<double> sa, sb;
  if (a.size() == b.size()) {
    sa.assign(a.begin(), a.end());
    sb.assign(b.begin(), b.end());
  } else {
    res.subsampled = true;
    const std::size_t m = std::min(a.size(), b.size());
    sa = a.size() == m ? std::vector<double>(a.begin(), a.end())
                       : subsample(a, m, seed);
    sb = b.size() == m ? std::vector<double>(b.begin(), b.end())
                       : subsample(b, m, seed + 1);
  }
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) acc += std::abs(sa[i] - sb[i]);
  res.value = acc / sa.size();
  res.n_used = static_cast<int>(sa.size());
  return res;
}

double w1_empirical_1d(std::span<const double> a, std::span<const double> b,
                       std::uint64_t seed) {
  return w1_empirical_1d_full(a, b, seed).value;
}

std::pair<double, double> wf_bracket(std::span<const double> a,
                                     std::span<const double> b,
                                     const RateBundle& bundle, std::uint64_t seed) {
  if (a.empty() || b.empty()) throw Error("wf_bracket: empty input");
  std::vector<double> sa, sb;
  const std::size_t m = std::min(a.size(), b.size());
  sa = a.size() == m ? std::vector<double>(a.begin(), a.end()) : subsample(a, m, seed);
  sb = b.size() == m ? std::vector<double>(b.begin(), b.end())
                     : subsample(b, m, seed + 1);
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double w1 = 0.0, upper = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double d = std::abs(sa[i] - sb[i]);
    w1 += d;
    upper += bundle.f_eval(d);
  }
  w1 /= m;
  upper /= m;
  return {bundle.C * w1, upper};
}

RateFit fit_exponential_rate(std::span<const double> t, std::span<const double> y,
                             double t_lo, double t_hi) {
  if (t.size() != y.size()) throw Error("fit_exponential_rate: size mismatch");
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  int n = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_lo || t[i] > t_hi) continue;
    if (!(y[i] > 0.0))
      throw Error("fit_exponential_rate: nonpositive value inside the window");
    const double ly = std::log(y[i]);
    sx += t[i];
    sy += ly;
    sxx += t[i] * t[i];
    sxy += t[i] * ly;
    syy += ly * ly;
    ++n;
  }
  if (n < 2) throw Error("fit_exponential_rate: fewer than two points in window");
  const double det = n * sxx - sx * sx;
  if (std::abs(det) < 1e-30) throw Error("fit_exponential_rate: degenerate window");
  const double slope = (n * sxy - sx * sy) / det;
  const double intercept = (sy - slope * sx) / n;
  RateFit fit;
  fit.rate = -slope;
  fit.intercept = intercept;
  fit.t_lo = t_lo;
  fit.t_hi = t_hi;
  const double ss_tot = syy - sy * sy / n;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_lo || t[i] > t_hi) continue;
    const double pred = intercept + slope * t[i];
    const double resid = std::log(y[i]) - pred;
    ss_res += resid * resid;
  }
  fit.r_squared = ss_tot > 0.0 ? std::max(0.0, 1.0 - ss_res / ss_tot) : 1.0;
  return fit;
}

}  // namespace cdl
