#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "solar/attention.hpp"

namespace solar {

// Forward-latency benchmark over a history-length grid, single-threaded.
// Two regimes: tied (N_C = N_L, where the quadratic softmax cost is visible)
// and fixed-m (candidate count held constant, every variant linear in N_L).
struct BenchSpec {
  std::vector<AttnVariant> variants{AttnVariant::kSoftmax, AttnVariant::kLinear,
                                    AttnVariant::kSvd};
  std::vector<std::size_t> n_grid{256, 512, 1024, 2048, 4096, 8192};
  bool tied = true;
  std::size_t m = 128;  // fixed-m regime candidate count
  std::size_t d = 64;
  std::size_t rank = 8;
  int n_iter = 4;
  int repetitions = 7;
  int warmups = 2;
  std::uint64_t seed = 1;
};

struct BenchRow {
  AttnVariant variant;
  bool tied = true;
  std::size_t n_l = 0, n_c = 0, d = 0, r = 0;
  double median_ms = 0.0, p10_ms = 0.0, p90_ms = 0.0;
};

// Runs the grid. Inputs are generated fresh per cell from the seeded RNG and
// shared by every variant within the cell; warmup runs are discarded and the
// median/p10/p90 of the repetitions reported. Cells too fast for the timer
// resolution (< 20 ticks) auto-scale an inner loop and normalize. Throws if
// the environment requests a multi-threaded BLAS-style pool, which would
// invalidate single-thread measurements.
std::vector<BenchRow> run_bench(const BenchSpec &spec);

struct ScalingFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

// Least-squares fit of log(median) against log(N_L) for rows of one variant.
ScalingFit fit_scaling(const std::vector<BenchRow> &rows);
ScalingFit fit_scaling_xy(const std::vector<double> &n,
                          const std::vector<double> &t);

std::string bench_csv_header();
std::string bench_csv_row(const BenchRow &row);

}  // namespace solar
