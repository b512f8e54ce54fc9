#include "solar/bench.hpp"

#include <malloc.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>

#include "solar/rng.hpp"

namespace solar {

namespace {

using Clock = std::chrono::steady_clock;

double now_ms() {
  return std::chrono::duration<double, std::milli>(Clock::now().time_since_epoch())
      .count();
}

// Smallest observable nonzero step of the wall clock, in ms.
double timer_tick_ms() {
  double tick = 1e9;
  for (int probe = 0; probe < 5; ++probe) {
    const double start = now_ms();
    double next = start;
    while (next == start) next = now_ms();
    tick = std::min(tick, next - start);
  }
  return tick;
}

void check_single_thread_env() {
  for (const char *var : {"OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                          "MKL_NUM_THREADS", "BLIS_NUM_THREADS"}) {
    const char *val = std::getenv(var);
    if (val && std::atoi(val) > 1)
      throw std::runtime_error(std::string("run_bench: ") + var + "=" + val +
                               " requests a parallel pool; single-thread "
                               "measurement refused");
  }
}

double percentile(std::vector<double> sorted, double q) {
  const std::size_t n = sorted.size();
  const double pos = q * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, n - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

std::vector<BenchRow> run_bench(const BenchSpec &spec) {
  if (spec.repetitions < 3)
    throw std::invalid_argument("run_bench: need at least 3 repetitions");
  for (std::size_t i = 1; i < spec.n_grid.size(); ++i)
    if (spec.n_grid[i] <= spec.n_grid[i - 1])
      throw std::invalid_argument("run_bench: grid must be strictly increasing");
  check_single_thread_env();

#ifdef M_MMAP_THRESHOLD
  // Keep the large attention buffers on the reusable heap arena; fresh mmap
  // regions would be page-faulted anew on every repetition and the fault
  // cost, not the kernel, would dominate the large-N cells.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif

  const double tick = timer_tick_ms();
  std::vector<BenchRow> rows;
  double sink = 0.0;

  for (std::size_t n_l : spec.n_grid) {
    const std::size_t n_c = spec.tied ? n_l : spec.m;
    // One input set per cell, shared across variants.
    Rng rng(derive_seed(spec.seed, n_l * 31 + (spec.tied ? 1 : 0)));
    const Matrix h = rng.gaussian_matrix(n_l, spec.d);
    const Matrix c = rng.gaussian_matrix(n_c, spec.d);
    const Matrix w_q = rng.gaussian_matrix(spec.d, spec.d);
    const Matrix w_k = rng.gaussian_matrix(spec.d, spec.d);
    const Matrix w_v = rng.gaussian_matrix(spec.d, spec.d);

    for (AttnVariant variant : spec.variants) {
      AttnConfig cfg;
      cfg.variant = variant;
      cfg.rank = spec.rank;
      cfg.n_iter = spec.n_iter;
      cfg.seed = derive_seed(spec.seed, n_l * 131 + 7);
      cfg.keep_cache = false;  // forward-only cost

      const auto run_once = [&] {
        const AttnOutput out = attn_forward(h, c, w_q, w_k, w_v, cfg);
        sink += out.out(0, 0);
      };

      for (int w = 0; w < spec.warmups; ++w) run_once();

      // Calibrate an inner loop so each sample spans >= 20 timer ticks.
      int inner = 1;
      {
        const double t0 = now_ms();
        run_once();
        const double elapsed = now_ms() - t0;
        if (elapsed < 20.0 * tick)
          inner = static_cast<int>(std::ceil(20.0 * tick /
                                             std::max(elapsed, tick * 1e-3)));
      }

      std::vector<double> samples(spec.repetitions);
      for (int rep = 0; rep < spec.repetitions; ++rep) {
        const double t0 = now_ms();
        for (int k = 0; k < inner; ++k) run_once();
        samples[rep] = (now_ms() - t0) / static_cast<double>(inner);
      }
      std::sort(samples.begin(), samples.end());

      BenchRow row;
      row.variant = variant;
      row.tied = spec.tied;
      row.n_l = n_l;
      row.n_c = n_c;
      row.d = spec.d;
      row.r = spec.rank;
      row.median_ms = percentile(samples, 0.5);
      row.p10_ms = percentile(samples, 0.1);
      row.p90_ms = percentile(samples, 0.9);
      rows.push_back(row);
    }
  }
  volatile double guard = sink;  // keep the kernel's results observable
  (void)guard;
  return rows;
}

ScalingFit fit_scaling_xy(const std::vector<double> &n,
                          const std::vector<double> &t) {
  if (n.size() != t.size() || n.size() < 4)
    throw std::invalid_argument("fit_scaling: need >= 4 grid points");
  const std::size_t k = n.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::vector<double> xs(k), ys(k);
  for (std::size_t i = 0; i < k; ++i) {
    xs[i] = std::log(n[i]);
    ys[i] = std::log(t[i]);
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double kf = static_cast<double>(k);
  ScalingFit fit;
  fit.slope = (kf * sxy - sx * sy) / (kf * sxx - sx * sx);
  fit.intercept = (sy - fit.slope * sx) / kf;
  double ss_res = 0, ss_tot = 0;
  const double mean_y = sy / kf;
  for (std::size_t i = 0; i < k; ++i) {
    const double fit_y = fit.slope * xs[i] + fit.intercept;
    ss_res += (ys[i] - fit_y) * (ys[i] - fit_y);
    ss_tot += (ys[i] - mean_y) * (ys[i] - mean_y);
  }
  fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

ScalingFit fit_scaling(const std::vector<BenchRow> &rows) {
  std::vector<double> n, t;
  for (const auto &row : rows) {
    n.push_back(static_cast<double>(row.n_l));
    t.push_back(row.median_ms);
  }
  return fit_scaling_xy(n, t);
}

std::string bench_csv_header() {
  return "variant,regime,n_l,n_c,d,r,median_ms,p10_ms,p90_ms";
}

std::string bench_csv_row(const BenchRow &row) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%s,%zu,%zu,%zu,%zu,%.17g,%.17g,%.17g",
                attn_variant_name(row.variant), row.tied ? "tied" : "fixed-m",
                row.n_l, row.n_c, row.d, row.r, row.median_ms, row.p10_ms,
                row.p90_ms);
  return buf;
}

}  // namespace solar
