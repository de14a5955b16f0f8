#include "cdl/coupling.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <thread>

#include "cdl/error.hpp"
#include "cdl/report.hpp"

namespace cdl {

namespace {

constexpr int kBlock = 256;  // fixed block size keeps results worker-invariant

int worker_count(int requested, int n_blocks) {
  int w = requested > 0 ? requested
                        : static_cast<int>(std::thread::hardware_concurrency());
  if (w <= 0) w = 1;
  return std::max(1, std::min(w, n_blocks));
}

/// Runs fn(block_index, path_begin, path_end) over fixed-size path blocks.
/// Blocks are claimed dynamically but write only block-indexed state, so the
/// schedule cannot influence any result.
void run_blocks(int n_paths, int n_workers,
                const std::function<void(int, int, int)>& fn) {
  const int n_blocks = (n_paths + kBlock - 1) / kBlock;
  const int workers = worker_count(n_workers, n_blocks);
  if (workers == 1) {
    for (int b = 0; b < n_blocks; ++b)
      fn(b, b * kBlock, std::min(n_paths, (b + 1) * kBlock));
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const int b = next.fetch_add(1);
        if (b >= n_blocks) return;
        fn(b, b * kBlock, std::min(n_paths, (b + 1) * kBlock));
      }
    });
  }
  for (auto& th : pool) th.join();
}

std::vector<int> record_steps(int K, int stride) {
  std::vector<int> steps;
  for (int s = 0; s <= K; s += stride) steps.push_back(s);
  if (steps.back() != K) steps.push_back(K);
  return steps;
}

struct Welford {
  double sum = 0.0, sum_sq = 0.0;
  long long n = 0;
  void add(double v) {
    sum += v;
    sum_sq += v * v;
    ++n;
  }
  void merge(const Welford& o) {
    sum += o.sum;
    sum_sq += o.sum_sq;
    n += o.n;
  }
  double mean() const { return n > 0 ? sum / n : 0.0; }
  double stderr_mean() const {
    if (n < 2) return 0.0;
    const double var = std::max(0.0, (sum_sq - sum * sum / n) / (n - 1));
    return std::sqrt(var / n);
  }
};

}  // namespace

void SimConfig::validate() const {
  if (!(dt > 0.0)) throw Error("sim config: dt must be positive");
  if (!(horizon >= dt)) throw Error("sim config: dt exceeds the horizon");
  if (n_paths < 1) throw Error("sim config: n_paths must be at least 1");
  if (output_stride < 1) throw Error("sim config: output_stride must be >= 1");
}

DriftField constant_drift_field(
    std::function<void(std::span<const double>, std::span<double>)> b) {
  return [b = std::move(b)](double, std::span<const double> x,
                            std::span<double> out) { b(x, out); };
}

InitSampler point_init(std::vector<double> x0) {
  return [x0 = std::move(x0)](RngStream&, std::span<double> out) {
    std::copy(x0.begin(), x0.end(), out.begin());
  };
}

PathEnsemble simulate_paths(const DriftField& drift, double sigma, int dim,
                            const InitSampler& init, const SimConfig& cfg) {
  cfg.validate();
  if (sigma <= 0.0) throw Error("simulate_paths: sigma must be positive");
  const int K = static_cast<int>(std::llround(cfg.horizon / cfg.dt));
  const std::vector<int> recs = record_steps(std::max(1, K), cfg.output_stride);
  const int n_out = static_cast<int>(recs.size());
  const int n_blocks = (cfg.n_paths + kBlock - 1) / kBlock;
  const double root_dt = std::sqrt(cfg.dt);

  std::vector<std::vector<Welford>> blk_x0(n_blocks,
                                           std::vector<Welford>(n_out));
  std::vector<std::vector<Welford>> blk_norm(n_blocks,
                                             std::vector<Welford>(n_out));
  std::vector<int> blk_flagged(n_blocks, 0);

  PathEnsemble ens;
  ens.n_paths = cfg.n_paths;
  if (cfg.store_snapshots) {
    if (dim != 1) throw Error("simulate_paths: snapshots only for dim = 1");
    ens.snapshots.assign(n_out, std::vector<double>(cfg.n_paths, 0.0));
  }

  run_blocks(cfg.n_paths, cfg.n_workers, [&](int b, int lo, int hi) {
    std::vector<double> x(dim), bx(dim), dw(dim);
    for (int path = lo; path < hi; ++path) {
      RngStream rng(cfg.seed, static_cast<std::uint64_t>(path));
      init(rng, x);
      bool bad = false;
      std::size_t rec_i = 0;
      for (int step = 0; step <= K; ++step) {
        if (rec_i < recs.size() && recs[rec_i] == step) {
          if (!bad) {
            double nrm = 0.0;
            for (double c : x) nrm += c * c;
            blk_x0[b][rec_i].add(x[0]);
            blk_norm[b][rec_i].add(std::sqrt(nrm));
            if (cfg.store_snapshots) ens.snapshots[rec_i][path] = x[0];
          } else if (cfg.store_snapshots) {
            ens.snapshots[rec_i][path] = std::numeric_limits<double>::quiet_NaN();
          }
          ++rec_i;
        }
        if (step == K) break;
        for (int c = 0; c < dim; ++c) dw[c] = rng.next_normal() * root_dt;
        if (bad) continue;
        drift(step * cfg.dt, x, bx);
        bool finite = true;
        for (int c = 0; c < dim; ++c) {
          x[c] += bx[c] * cfg.dt + sigma * dw[c];
          finite = finite && std::isfinite(x[c]);
        }
        if (!finite) {
          bad = true;
          ++blk_flagged[b];
        }
      }
    }
  });

  ens.t.resize(n_out);
  ens.mean_x0.resize(n_out);
  ens.var_x0.resize(n_out);
  ens.mean_norm.resize(n_out);
  for (int k = 0; k < n_out; ++k) {
    Welford w0, wn;
    for (int b = 0; b < n_blocks; ++b) {
      w0.merge(blk_x0[b][k]);
      wn.merge(blk_norm[b][k]);
    }
    ens.t[k] = recs[k] * cfg.dt;
    ens.mean_x0[k] = w0.mean();
    ens.var_x0[k] =
        w0.n > 1 ? std::max(0.0, (w0.sum_sq - w0.sum * w0.sum / w0.n) / (w0.n - 1))
                 : 0.0;
    ens.mean_norm[k] = wn.mean();
  }
  for (int b = 0; b < n_blocks; ++b) ens.n_flagged += blk_flagged[b];
  return ens;
}

double CouplingRun::survival_stderr(int k) const {
  const double p = coalesced_frac[k];
  return std::sqrt(std::max(0.0, p * (1.0 - p)) / std::max(1, n_paths));
}

void CouplingRun::write_csv(const std::string& path) const {
  std::ofstream out = open_output(path);
  out << "s,mean_dist,mean_f_r,coalesced_frac,stderr\n";
  for (std::size_t k = 0; k < t.size(); ++k)
    out << format12(t[k]) << "," << format12(mean_dist[k]) << ","
        << format12(mean_f[k]) << "," << format12(coalesced_frac[k]) << ","
        << format12(stderr_f[k]) << "\n";
}

namespace {

struct PairStats {
  std::vector<Welford> dist, f;
  std::vector<long long> coalesced;
  int flagged = 0;
  explicit PairStats(int n_out) : dist(n_out), f(n_out), coalesced(n_out, 0) {}
};

CouplingRun finalize_run(std::vector<PairStats>& blocks,
                         const std::vector<int>& recs, double dt, int n_paths,
                         double merge_threshold) {
  const int n_out = static_cast<int>(recs.size());
  CouplingRun run;
  run.n_paths = n_paths;
  run.merge_threshold = merge_threshold;
  run.t.resize(n_out);
  run.mean_dist.resize(n_out);
  run.mean_f.resize(n_out);
  run.stderr_f.resize(n_out);
  run.stderr_dist.resize(n_out);
  run.coalesced_frac.resize(n_out);
  for (auto& b : blocks) run.n_flagged += b.flagged;
  for (int k = 0; k < n_out; ++k) {
    Welford wd, wf;
    long long ncoal = 0;
    for (auto& b : blocks) {
      wd.merge(b.dist[k]);
      wf.merge(b.f[k]);
      ncoal += b.coalesced[k];
    }
    run.t[k] = recs[k] * dt;
    run.mean_dist[k] = wd.mean();
    run.stderr_dist[k] = wd.stderr_mean();
    run.mean_f[k] = wf.mean();
    run.stderr_f[k] = wf.stderr_mean();
    run.coalesced_frac[k] = static_cast<double>(ncoal) / n_paths;
  }
  return run;
}

}  // namespace

CouplingRun reflection_coupling(const DriftField& drift, double sigma,
                                std::span<const double> x0,
                                std::span<const double> x0p,
                                const SimConfig& cfg, const RateBundle* bundle) {
  cfg.validate();
  const int dim = static_cast<int>(x0.size());
  if (x0.size() != x0p.size()) throw Error("reflection_coupling: dim mismatch");
  const int K = static_cast<int>(std::llround(cfg.horizon / cfg.dt));
  const std::vector<int> recs = record_steps(std::max(1, K), cfg.output_stride);
  const int n_blocks = (cfg.n_paths + kBlock - 1) / kBlock;
  const double root_dt = std::sqrt(cfg.dt);
  const double merge =
      cfg.merge_threshold > 0.0 ? cfg.merge_threshold : 10.0 * sigma * root_dt;

  std::vector<PairStats> blocks(n_blocks, PairStats(static_cast<int>(recs.size())));
  CouplingRun run;
  run.tau.assign(cfg.n_paths, std::numeric_limits<double>::infinity());
  std::vector<double>* term_a = nullptr;
  std::vector<double>* term_b = nullptr;
  std::vector<double> ta, tb;
  if (cfg.store_snapshots) {
    ta.assign(cfg.n_paths, 0.0);
    tb.assign(cfg.n_paths, 0.0);
    term_a = &ta;
    term_b = &tb;
  }

  run_blocks(cfg.n_paths, cfg.n_workers, [&](int b, int lo, int hi) {
    std::vector<double> x(dim), xp(dim), bx(dim), bxp(dim), dw(dim), e(dim);
    for (int path = lo; path < hi; ++path) {
      RngStream rng(cfg.seed, static_cast<std::uint64_t>(path));
      std::copy(x0.begin(), x0.end(), x.begin());
      std::copy(x0p.begin(), x0p.end(), xp.begin());
      bool coal = false;
      {
        double r0 = 0.0;
        for (int c = 0; c < dim; ++c) r0 += (x[c] - xp[c]) * (x[c] - xp[c]);
        if (std::sqrt(r0) < merge) {
          coal = true;
          run.tau[path] = 0.0;
          for (int c = 0; c < dim; ++c) xp[c] = x[c];
        }
      }
      bool bad = false;
      std::size_t rec_i = 0;
      for (int step = 0; step <= K; ++step) {
        if (rec_i < recs.size() && recs[rec_i] == step) {
          double r = 0.0;
          if (!bad && !coal) {
            for (int c = 0; c < dim; ++c) r += (x[c] - xp[c]) * (x[c] - xp[c]);
            r = std::sqrt(r);
            if (!std::isfinite(r)) {  // squared separation can overflow first
              bad = true;
              ++blocks[b].flagged;
            }
          }
          if (!bad) {
            blocks[b].dist[rec_i].add(r);
            blocks[b].f[rec_i].add(bundle ? bundle->f_eval(r) : 0.0);
            if (coal) ++blocks[b].coalesced[rec_i];
          }
          ++rec_i;
        }
        if (step == K) break;
        const double t = step * cfg.dt;
        for (int c = 0; c < dim; ++c) dw[c] = rng.next_normal() * root_dt;
        if (bad) continue;
        drift(t, x, bx);
        if (!coal) {
          double r = 0.0;
          for (int c = 0; c < dim; ++c) {
            e[c] = x[c] - xp[c];
            r += e[c] * e[c];
          }
          r = std::sqrt(r);
          for (int c = 0; c < dim; ++c) e[c] /= r;
          double edw = 0.0;
          for (int c = 0; c < dim; ++c) edw += e[c] * dw[c];
          drift(t, xp, bxp);
          for (int c = 0; c < dim; ++c) {
            x[c] += bx[c] * cfg.dt + sigma * dw[c];
            xp[c] += bxp[c] * cfg.dt + sigma * (dw[c] - 2.0 * e[c] * edw);
          }
          double rn = 0.0;
          for (int c = 0; c < dim; ++c) rn += (x[c] - xp[c]) * (x[c] - xp[c]);
          if (std::sqrt(rn) < merge) {
            coal = true;
            run.tau[path] = (step + 1) * cfg.dt;
            for (int c = 0; c < dim; ++c) xp[c] = x[c];
          }
        } else {
          for (int c = 0; c < dim; ++c) {
            x[c] += bx[c] * cfg.dt + sigma * dw[c];
            xp[c] = x[c];
          }
        }
        for (int c = 0; c < dim; ++c)
          if (!std::isfinite(x[c]) || !std::isfinite(xp[c])) bad = true;
        if (bad) ++blocks[b].flagged;
      }
      if (term_a) {
        (*term_a)[path] = bad ? std::numeric_limits<double>::quiet_NaN() : x[0];
        (*term_b)[path] = bad ? std::numeric_limits<double>::quiet_NaN() : xp[0];
      }
    }
  });

  CouplingRun out = finalize_run(blocks, recs, cfg.dt, cfg.n_paths, merge);
  out.tau = std::move(run.tau);
  if (term_a) {
    out.terminal_first = std::move(ta);
    out.terminal_second = std::move(tb);
  }
  return out;
}

ControlledCouplingRun controlled_reflection_coupling(const ControlModel& model,
                                                     const ValueFunction& vf,
                                                     double x0, double x0p,
                                                     const SimConfig& cfg,
                                                     const RateBundle* bundle) {
  cfg.validate();
  if (model.state_dim() != 1 || model.control_dim() != 1)
    throw Error("controlled_reflection_coupling: scalar state and control only");
  const double T = vf.times.back();
  if (cfg.horizon > T + 1e-12)
    throw Error("controlled_reflection_coupling: horizon exceeds the value function");
  const int K = static_cast<int>(std::llround(cfg.horizon / cfg.dt));
  const std::vector<int> recs = record_steps(std::max(1, K), cfg.output_stride);
  const int n_blocks = (cfg.n_paths + kBlock - 1) / kBlock;
  const double root_dt = std::sqrt(cfg.dt);
  const double sigma = model.sigma();
  const double merge =
      cfg.merge_threshold > 0.0 ? cfg.merge_threshold : 10.0 * sigma * root_dt;

  std::vector<PairStats> blocks(n_blocks, PairStats(static_cast<int>(recs.size())));
  std::vector<double> taus(cfg.n_paths, std::numeric_limits<double>::infinity());
  std::vector<double> gaps(cfg.n_paths, 0.0);

  run_blocks(cfg.n_paths, cfg.n_workers, [&](int b, int lo, int hi) {
    for (int path = lo; path < hi; ++path) {
      RngStream rng(cfg.seed, static_cast<std::uint64_t>(path));
      double x = x0, xp = x0p;
      double warm = 0.0;
      bool coal = std::abs(x - xp) < merge;
      if (coal) {
        xp = x;
        taus[path] = 0.0;
      }
      double gap = 0.0;
      std::size_t rec_i = 0;
      for (int step = 0; step <= K; ++step) {
        if (rec_i < recs.size() && recs[rec_i] == step) {
          const double r = coal ? 0.0 : std::abs(x - xp);
          blocks[b].dist[rec_i].add(r);
          blocks[b].f[rec_i].add(bundle ? bundle->f_eval(r) : 0.0);
          if (coal) ++blocks[b].coalesced[rec_i];
          ++rec_i;
        }
        if (step == K) break;
        const double t = step * cfg.dt;
        const double dw = rng.next_normal() * root_dt;
        // the control is the optimal one for the first path and is reused,
        // as a realized process, by the second
        const double p = vf.gradient(t, x);
        const double u = minimizer_w1(model, x, p, warm);
        warm = u;
        if (!coal) {
          gap += (model.cost1(xp, u) - model.cost1(x, u)) * cfg.dt;
          const double bx = model.drift1(x, u);
          const double bxp = model.drift1(xp, u);
          x += bx * cfg.dt + sigma * dw;
          xp += bxp * cfg.dt - sigma * dw;  // scalar reflection flips the noise
          if (std::abs(x - xp) < merge) {
            coal = true;
            taus[path] = (step + 1) * cfg.dt;
            xp = x;
          }
        } else {
          x += model.drift1(x, u) * cfg.dt + sigma * dw;
          xp = x;
        }
      }
      gap += model.terminal1(xp) - model.terminal1(x);
      gaps[path] = gap;
    }
  });

  ControlledCouplingRun out;
  out.run = finalize_run(blocks, recs, cfg.dt, cfg.n_paths, merge);
  out.run.tau = std::move(taus);
  Welford wg;
  for (double g : gaps) wg.add(g);
  out.mean_cost_gap = wg.mean();
  out.stderr_cost_gap = wg.stderr_mean();
  return out;
}

StickyRun sticky_dominating(const KappaProfile& kappa0,
                            const std::function<double(double)>& M_schedule,
                            double sigma, double r0, const SimConfig& cfg,
                            const RateBundle* bundle, double noise_band,
                            double cap_lo, double cap_hi) {
  cfg.validate();
  if (r0 < 0.0) throw Error("sticky_dominating: r0 must be nonnegative");
  const int K = static_cast<int>(std::llround(cfg.horizon / cfg.dt));
  const std::vector<int> recs = record_steps(std::max(1, K), cfg.output_stride);
  const int n_out = static_cast<int>(recs.size());
  const int n_blocks = (cfg.n_paths + kBlock - 1) / kBlock;
  const double root_dt = std::sqrt(cfg.dt);
  const double band =
      noise_band > 0.0 ? noise_band : 4.0 * 2.0 * sigma * root_dt;

  std::vector<std::vector<Welford>> blk_r(n_blocks, std::vector<Welford>(n_out));
  std::vector<std::vector<Welford>> blk_f(n_blocks, std::vector<Welford>(n_out));

  auto kappa_eff = [&](double r) {
    return kappa0(std::clamp(r, cap_lo, cap_hi));
  };

  run_blocks(cfg.n_paths, cfg.n_workers, [&](int b, int lo, int hi) {
    for (int path = lo; path < hi; ++path) {
      RngStream rng(cfg.seed, static_cast<std::uint64_t>(path));
      double r = r0;
      std::size_t rec_i = 0;
      for (int step = 0; step <= K; ++step) {
        if (rec_i < recs.size() && recs[rec_i] == step) {
          blk_r[b][rec_i].add(r);
          blk_f[b][rec_i].add(bundle ? bundle->f_eval(r) : 0.0);
          ++rec_i;
        }
        if (step == K) break;
        const double t = step * cfg.dt;
        const double xi = rng.next_normal();
        const double drift = M_schedule(t) - 0.5 * sigma * sigma * kappa_eff(r) * r;
        const double ramp = std::min(1.0, r / band);
        r = std::max(0.0, r + drift * cfg.dt + 2.0 * sigma * root_dt * ramp * xi);
      }
    }
  });

  StickyRun out;
  out.t.resize(n_out);
  out.mean_r.resize(n_out);
  out.stderr_r.resize(n_out);
  out.mean_f.resize(n_out);
  out.stderr_f.resize(n_out);
  for (int k = 0; k < n_out; ++k) {
    Welford wr, wf;
    for (int b = 0; b < n_blocks; ++b) {
      wr.merge(blk_r[b][k]);
      wf.merge(blk_f[b][k]);
    }
    out.t[k] = recs[k] * cfg.dt;
    out.mean_r[k] = wr.mean();
    out.stderr_r[k] = wr.stderr_mean();
    out.mean_f[k] = wf.mean();
    out.stderr_f[k] = wf.stderr_mean();
  }
  return out;
}

CouplingRun two_drift_coupling(const DriftField& drift1, const DriftField& drift2,
                               double sigma, std::span<const double> x0,
                               std::span<const double> x0p, double delta_switch,
                               const SimConfig& cfg) {
  cfg.validate();
  if (x0.size() != x0p.size()) throw Error("two_drift_coupling: dim mismatch");
  if (!(delta_switch > 0.0))
    throw Error("two_drift_coupling: delta_switch must be positive");
  const int dim = static_cast<int>(x0.size());
  const int K = static_cast<int>(std::llround(cfg.horizon / cfg.dt));
  const std::vector<int> recs = record_steps(std::max(1, K), cfg.output_stride);
  const int n_blocks = (cfg.n_paths + kBlock - 1) / kBlock;
  const double root_dt = std::sqrt(cfg.dt);

  std::vector<PairStats> blocks(n_blocks, PairStats(static_cast<int>(recs.size())));

  run_blocks(cfg.n_paths, cfg.n_workers, [&](int b, int lo, int hi) {
    std::vector<double> x(dim), xp(dim), bx(dim), bxp(dim), dw(dim), e(dim);
    for (int path = lo; path < hi; ++path) {
      RngStream rng(cfg.seed, static_cast<std::uint64_t>(path));
      std::copy(x0.begin(), x0.end(), x.begin());
      std::copy(x0p.begin(), x0p.end(), xp.begin());
      bool bad = false;
      std::size_t rec_i = 0;
      for (int step = 0; step <= K; ++step) {
        double r = 0.0;
        for (int c = 0; c < dim; ++c) r += (x[c] - xp[c]) * (x[c] - xp[c]);
        r = std::sqrt(r);
        if (!std::isfinite(r) && !bad) {
          bad = true;
          ++blocks[b].flagged;
        }
        if (rec_i < recs.size() && recs[rec_i] == step) {
          if (!bad) {
            blocks[b].dist[rec_i].add(r);
            blocks[b].f[rec_i].add(0.0);
          }
          ++rec_i;
        }
        if (step == K) break;
        const double t = step * cfg.dt;
        for (int c = 0; c < dim; ++c) dw[c] = rng.next_normal() * root_dt;
        if (bad) continue;
        drift1(t, x, bx);
        drift2(t, xp, bxp);
        if (r > delta_switch) {
          for (int c = 0; c < dim; ++c) e[c] = (x[c] - xp[c]) / r;
          double edw = 0.0;
          for (int c = 0; c < dim; ++c) edw += e[c] * dw[c];
          for (int c = 0; c < dim; ++c) {
            x[c] += bx[c] * cfg.dt + sigma * dw[c];
            xp[c] += bxp[c] * cfg.dt + sigma * (dw[c] - 2.0 * e[c] * edw);
          }
        } else {
          for (int c = 0; c < dim; ++c) {
            x[c] += bx[c] * cfg.dt + sigma * dw[c];
            xp[c] += bxp[c] * cfg.dt + sigma * dw[c];
          }
        }
      }
    }
  });

  return finalize_run(blocks, recs, cfg.dt, cfg.n_paths, delta_switch);
}

std::vector<double> invariant_sampler(const DriftField& drift, double sigma,
                                      double burn_in, double thin_spacing,
                                      int samples_per_chain, const SimConfig& cfg) {
  cfg.validate();
  if (samples_per_chain < 1)
    throw Error("invariant_sampler: samples_per_chain must be >= 1");
  if (!(thin_spacing >= cfg.dt))
    throw Error("invariant_sampler: thinning must be at least dt");
  const int burn_steps = static_cast<int>(std::llround(burn_in / cfg.dt));
  const int thin_steps = std::max(1, static_cast<int>(std::llround(thin_spacing / cfg.dt)));

  std::vector<double> samples(
      static_cast<std::size_t>(cfg.n_paths) * samples_per_chain, 0.0);

  run_blocks(cfg.n_paths, cfg.n_workers, [&](int, int lo, int hi) {
    double x = 0.0, bx = 0.0;
    const double root_dt = std::sqrt(cfg.dt);
    for (int chain = lo; chain < hi; ++chain) {
      RngStream rng(cfg.seed, static_cast<std::uint64_t>(chain) + 0x10000000ULL);
      x = 0.0;
      auto step_once = [&](double t) {
        drift(t, std::span<const double>(&x, 1), std::span<double>(&bx, 1));
        x += bx * cfg.dt + sigma * root_dt * rng.next_normal();
      };
      for (int s = 0; s < burn_steps; ++s) step_once(s * cfg.dt);
      for (int j = 0; j < samples_per_chain; ++j) {
        for (int s = 0; s < thin_steps; ++s) step_once(0.0);
        samples[static_cast<std::size_t>(chain) * samples_per_chain + j] = x;
      }
    }
  });
  return samples;
}

double DensityTable::quantile(double q) const {
  if (q <= 0.0) return x.front();
  if (q >= 1.0) return x.back();
  auto it = std::lower_bound(cdf.begin(), cdf.end(), q);
  std::size_t i = static_cast<std::size_t>(it - cdf.begin());
  if (i == 0) return x.front();
  const double c0 = cdf[i - 1], c1 = cdf[i];
  const double w = c1 > c0 ? (q - c0) / (c1 - c0) : 0.0;
  return x[i - 1] + w * (x[i] - x[i - 1]);
}

double DensityTable::mean_abs_dev(double x0) const {
  double acc = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double f0 = std::abs(x0 - x[i - 1]) * pdf[i - 1];
    const double f1 = std::abs(x0 - x[i]) * pdf[i];
    acc += 0.5 * (f0 + f1) * (x[i] - x[i - 1]);
  }
  return acc;
}

std::vector<double> DensityTable::quantile_sample(int n) const {
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = quantile((i + 0.5) / n);
  return out;
}

DensityTable stationary_density_1d(const std::function<double(double)>& drift,
                                   double sigma, const Grid1D& grid) {
  grid.validate();
  const int n = grid.n_x;
  const double dx = grid.dx();
  const double pref = 2.0 / (sigma * sigma);

  DensityTable tab;
  tab.x = grid.nodes();
  std::vector<double> logw(n, 0.0);
  for (int i = 1; i < n; ++i)
    logw[i] = logw[i - 1] + pref * 0.5 * (drift(tab.x[i - 1]) + drift(tab.x[i])) * dx;
  const double shift = *std::max_element(logw.begin(), logw.end());

  tab.pdf.resize(n);
  for (int i = 0; i < n; ++i) tab.pdf[i] = std::exp(logw[i] - shift);
  double mass = 0.0;
  for (int i = 1; i < n; ++i) mass += 0.5 * (tab.pdf[i] + tab.pdf[i - 1]) * dx;
  if (!(mass > 0.0) || !std::isfinite(mass))
    throw Error("stationary_density_1d: density does not normalize");

  const double peak = *std::max_element(tab.pdf.begin(), tab.pdf.end());
  if (tab.pdf.front() > 1e-6 * peak || tab.pdf.back() > 1e-6 * peak)
    throw Error("stationary_density_1d: density mass reaches the grid boundary "
                "(non-normalizable or grid too small)");

  for (int i = 0; i < n; ++i) tab.pdf[i] /= mass;
  tab.cdf.resize(n);
  tab.cdf[0] = 0.0;
  for (int i = 1; i < n; ++i)
    tab.cdf[i] = tab.cdf[i - 1] + 0.5 * (tab.pdf[i] + tab.pdf[i - 1]) * dx;
  for (int i = 0; i < n; ++i) tab.cdf[i] = std::min(1.0, tab.cdf[i] / tab.cdf[n - 1]);
  return tab;
}

}  // namespace cdl
