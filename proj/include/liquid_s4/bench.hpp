#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "liquid_s4/kernel_gen.hpp"
#include "liquid_s4/liquid_kernel.hpp"

namespace liquid_s4 {

struct BenchRecord {
  std::string path;
  std::size_t length = 0;
  std::size_t state_size = 0;
  double millis = 0.0;
};

struct BenchOptions {
  std::size_t liquid_window = 64;
  int liquid_order = 3;
  int trials = 7;
  double min_trial_millis = 30.0;
  bool include_naive = true;
};

struct BenchReport {
  std::vector<BenchRecord> records;
  double max_path_disagreement = 0.0;  // relative L-inf between genfn and naive

  std::vector<double> millis_for(const std::string& path) const {
    std::vector<double> out;
    for (const auto& r : records)
      if (r.path == path) out.push_back(r.millis);
    return out;
  }
  std::vector<double> lengths_for(const std::string& path) const {
    std::vector<double> out;
    for (const auto& r : records)
      if (r.path == path) out.push_back(static_cast<double>(r.length));
    return out;
  }
};

/// Best-of-trials time per call in milliseconds; each trial repeats `fn`
/// until it has run for at least `min_trial_millis`.
template <class Fn>
double time_call(Fn&& fn, int trials, double min_trial_millis) {
  using clock = std::chrono::steady_clock;
  double best = INFINITY;
  for (int t = 0; t < trials; ++t) {
    int reps = 0;
    const auto begin = clock::now();
    double elapsed = 0.0;
    do {
      fn();
      ++reps;
      elapsed = std::chrono::duration<double, std::milli>(clock::now() - begin).count();
    } while (elapsed < min_trial_millis);
    best = std::min(best, elapsed / reps);
  }
  return best;
}

/// Least-squares slope of log(time) against log(L).
inline double growth_exponent(const std::vector<double>& lengths, const std::vector<double>& millis) {
  const std::size_t n = std::min(lengths.size(), millis.size());
  if (n < 2) return 0.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = std::log(lengths[i]), y = std::log(millis[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = n * sxx - sx * sx;
  return denom == 0.0 ? 0.0 : (n * sxy - sx * sy) / denom;
}

/// Times the naive and generating-function kernel paths plus both liquid
/// kernels at a fixed window, for every requested length. Lengths are
/// interleaved over `trials` rounds and the best time per (path, L) is kept,
/// so a slow phase of a shared host lands on every length rather than one.
inline BenchReport bench_kernel(const DplrSystem& sys, double dt, const std::vector<std::size_t>& lengths,
                                const BenchOptions& opt = {}) {
  if (lengths.empty()) throw Error(ErrorKind::Config, "bench needs at least one length");
  BenchReport report;
  const auto n = static_cast<std::size_t>(sys.state_size());
  // discretization is shared by every path and independent of L
  const DiscreteSystem d = discretize_bilinear(sys, dt);

  std::vector<std::string> paths = {"genfn"};
  if (opt.include_naive) paths.push_back("naive");
  paths.push_back("liquid_kb");
  paths.push_back("liquid_pb");
  for (const auto& path : paths)
    for (std::size_t l : lengths) report.records.push_back({path, l, n, INFINITY});

  for (int round = 0; round < std::max(opt.trials, 1); ++round) {
    std::size_t slot = 0;
    for (const auto& path : paths) {
      for (std::size_t l : lengths) {
        const std::size_t window = std::min(opt.liquid_window, l);
        double ms = 0.0;
        if (path == "genfn") {
          ms = time_call([&] { (void)kernel_genfn(sys, dt, l); }, 1, opt.min_trial_millis);
        } else if (path == "naive") {
          ms = time_call([&] { (void)kernel_naive(d, l); }, 1, opt.min_trial_millis);
        } else {
          const LiquidMode mode = path == "liquid_kb" ? LiquidMode::KB : LiquidMode::PB;
          ms = time_call([&] { (void)build_liquid_kernels(d, mode, opt.liquid_order, window); }, 1,
                         opt.min_trial_millis);
        }
        auto& rec = report.records[slot++];
        rec.millis = std::min(rec.millis, ms);
      }
    }
  }

  if (opt.include_naive) {
    for (std::size_t l : lengths)
      report.max_path_disagreement =
          std::max(report.max_path_disagreement, relative_linf(kernel_genfn(sys, dt, l).taps, kernel_naive(d, l).taps));
  }
  return report;
}

}  // namespace liquid_s4
