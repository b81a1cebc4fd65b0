// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Tolerances are fixed here and must not be loosened to make a run pass.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"

using namespace liquid_s4;

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

struct Outcome {
  bool passed = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const std::function<Outcome()>& body) {
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
  }
  if (!o.passed) ++failures;
  std::printf("criterion %d %s: %s | %s\n", id, o.passed ? "PASS" : "FAIL", title.c_str(), o.detail.c_str());
  std::fflush(stdout);
}

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------

Outcome hippo_dplr() {
  const auto t0 = clock_type::now();
  double worst_recon = 0.0, worst_re = -INFINITY;
  for (Eigen::Index n : {2, 4, 16, 64}) {
    const NplrDecomposition dec = nplr_decompose(n);
    worst_recon = std::max(worst_recon, dec.reconstruction_residual);
    Eigen::ComplexEigenSolver<ComplexMatrix> es(dec.system.dense_a());
    worst_re = std::max(worst_re, es.eigenvalues().real().maxCoeff());
  }
  const double secs = seconds_since(t0);
  return {worst_recon < 1e-8 && worst_re <= 1e-8 && secs < 5.0,
          "max reconstruction residual " + fmt(worst_recon) + " (< 1e-08), max Re eig " + fmt(worst_re) +
              " (<= 1e-08), " + fmt(secs) + " s (< 5 s)"};
}

// One sweep feeds both kernel-path and recurrent-oracle criteria.
struct Sweep {
  int systems = 0;
  double genfn_vs_naive = 0.0;
  double forward_vs_recurrent = 0.0;
  double impulse_vs_taps = 0.0;
  double genfn_seconds = 0.0;
};

Sweep run_sweep() {
  Sweep s;
  std::mt19937_64 rng(20240611);
  std::uniform_int_distribution<int> size_dist(1, 64);
  std::uniform_real_distribution<double> log_dt(std::log(1e-3), std::log(0.2));
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::vector<std::size_t> lengths = {16, 64, 256, 1024};

  for (int trial = 0; trial < 200; ++trial) {
    const int n = trial < 4 ? std::vector<int>{2, 4, 16, 64}[trial] : size_dist(rng);
    const DplrSystem sys = trial % 5 == 0 ? legs_system(n, rng()) : random_stable_system(n, rng);
    const double dt = std::exp(log_dt(rng));
    const DiscreteSystem d = discretize_bilinear(sys, dt);
    for (std::size_t l : lengths) {
      const auto t0 = clock_type::now();
      const Kernel genfn = kernel_genfn(sys, dt, l);
      s.genfn_seconds += seconds_since(t0);
      const Kernel naive = kernel_naive(d, l);
      s.genfn_vs_naive = std::max(s.genfn_vs_naive, relative_linf(genfn.taps, naive.taps));

      std::vector<double> u(l);
      for (double& v : u) v = normal(rng);
      s.forward_vs_recurrent = std::max(
          s.forward_vs_recurrent,
          relative_linf(forward_liquid_s4(sys, dt, u, LiquidMode::None, 2, 1), recurrent_s4(d, u)));

      std::vector<double> impulse(l, 0.0);
      impulse[0] = 1.0;
      s.impulse_vs_taps = std::max(s.impulse_vs_taps, relative_linf(recurrent_s4(d, impulse), genfn.taps));
      s.impulse_vs_taps = std::max(s.impulse_vs_taps, relative_linf(recurrent_s4(d, impulse), naive.taps));
    }
    ++s.systems;
  }
  return s;
}

Outcome kernel_paths(const Sweep& s, double secs) {
  return {s.systems >= 200 && s.genfn_vs_naive < 1e-8 && secs < 60.0,
          std::to_string(s.systems) + " systems x L in {16,64,256,1024}, max rel Linf " + fmt(s.genfn_vs_naive) +
              " (< 1e-08), sweep " + fmt(secs) + " s (< 60 s)"};
}

Outcome recurrent_oracle(const Sweep& s) {
  return {s.forward_vs_recurrent < 1e-8 && s.impulse_vs_taps < 1e-12,
          "forward(none) vs recurrent max rel " + fmt(s.forward_vs_recurrent) +
              " (< 1e-08), impulse response vs taps " + fmt(s.impulse_vs_taps) + " (< 1e-12)"};
}

Outcome expansion_fidelity() {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  std::size_t terms = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + trial % 3;
    const DplrSystem sys = random_stable_system(n, rng);
    const DiscreteSystem d = discretize_bilinear(sys, 0.05 + 0.3 * (trial % 4));
    std::vector<double> u(5);
    for (double& v : u) v = normal(rng);
    const std::vector<double> rec = recurrent_liquid(d, u);
    for (std::size_t k = 0; k < u.size(); ++k) {
      const auto expansion = expand_liquid_output(d, u, k);
      terms += expansion.size();
      worst = std::max(worst, std::abs(rec[k] - sum_terms(expansion)) / std::max(1.0, std::abs(rec[k])));
    }
  }
  return {worst < 1e-10, "L=5, N in {1,2,3}, 30 systems, " + std::to_string(terms) +
                             " enumerated terms, max residual " + fmt(worst) + " (< 1e-10)"};
}

Outcome liquid_semantics() {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(0.0, 1.0);
  double oracle_err = 0.0, flip_err = 0.0, kb_pb_err = 0.0;
  for (int trial = 0; trial < 24; ++trial) {
    const int n = 1 + trial % 6;
    const DplrSystem sys = trial % 3 == 0 ? legs_system(n, rng()) : random_stable_system(n, rng);
    const double dt = 0.02 + 0.06 * (trial % 4);
    const DiscreteSystem d = discretize_bilinear(sys, dt);
    for (std::size_t l : {std::size_t{1}, std::size_t{5}, std::size_t{17}, std::size_t{64}}) {
      std::vector<double> u(l);
      for (double& v : u) v = normal(rng);
      for (int p = 2; p <= 4; ++p) {
        for (std::size_t window : {std::size_t{1}, std::size_t{4}, l}) {
          for (LiquidMode mode : {LiquidMode::KB, LiquidMode::PB}) {
            const auto path = forward_liquid_s4(sys, dt, u, mode, p, window);
            const auto oracle = liquid_oracle(d, u, p, window, mode);
            oracle_err = std::max(oracle_err, cli::scaled_error(path, oracle));
          }
        }
      }
    }
    DiscreteSystem ident = d;
    ident.a_bar = ComplexMatrix::Identity(n, n);
    ident.structured.reset();
    for (int p = 2; p <= kMaxLiquidOrder; ++p) {
      for (std::size_t window : {std::size_t{1}, std::size_t{9}, std::size_t{64}}) {
        const auto lag = liquid_kernel_kb(d, p, window).taps;
        const auto flipped = flip(liquid_kernel_kb_descending(d, p, window).taps);
        for (std::size_t i = 0; i < lag.size(); ++i) flip_err = std::max(flip_err, std::abs(lag[i] - flipped[i]));
        kb_pb_err = std::max(kb_pb_err, cli::scaled_error(liquid_kernel_kb(ident, p, window).taps,
                                                          liquid_kernel_pb(d, p, window).taps));
      }
    }
  }
  return {oracle_err < 1e-10 && flip_err == 0.0 && kb_pb_err < 1e-12,
          "kernel path vs oracle " + fmt(oracle_err) + " (< 1e-10), flip identity " + fmt(flip_err) +
              " (exact), KB(A=I) vs PB " + fmt(kb_pb_err) + " (< 1e-12)"};
}

Outcome complexity_shape() {
  const auto t0 = clock_type::now();
  const DplrSystem sys = legs_system(64, 0);
  const cli::BenchSummary s = cli::run_bench(sys, 0.01, {1024, 2048, 4096, 8192, 16384}, BenchOptions{});
  const double secs = seconds_since(t0);
  const bool ok = s.genfn_exponent <= 1.4 && s.liquid_kb_ratio <= 1.5 && s.liquid_pb_ratio <= 1.5 &&
                  s.report.max_path_disagreement < 1e-8 && secs < 300.0;
  return {ok, "genfn growth exponent " + fmt(s.genfn_exponent) + " (<= 1.4), naive exponent " +
                  fmt(s.naive_exponent) + ", liquid max/min KB " + fmt(s.liquid_kb_ratio) + " PB " +
                  fmt(s.liquid_pb_ratio) + " (<= 1.5), " + fmt(secs) + " s (< 300 s)"};
}

Outcome mechanism_demo() {
  const auto t0 = clock_type::now();
  std::vector<double> pb_acc, none_acc;
  std::size_t params = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    for (const char* mode : {"pb", "none"}) {
      cli::RunConfig cfg;
      cfg.seed = seed;
      cfg.mode = mode;
      cli::merge_config_file(cfg, std::string(LIQUID_S4_CONFIG_DIR) + "/train_demo.json");
      const cli::DemoSetup setup = cli::resolve_demo(cfg);
      if (setup.task.length != 32 || setup.model.layer.max_order != 2 || setup.task.kind != TaskKind::AdjacentProductSign)
        return {false, "train_demo.json no longer describes the L=32, P=2 adjacent-product-sign run"};
      const cli::DemoResult r = cli::run_demo(setup);
      params = std::max(params, r.parameter_count);
      (std::string(mode) == "pb" ? pb_acc : none_acc).push_back(r.report.final_accuracy);
      std::printf("  seed %llu mode %-4s train acc %.4f held-out %.4f\n", static_cast<unsigned long long>(seed), mode,
                  r.report.final_accuracy, r.eval_accuracy);
      std::fflush(stdout);
    }
  }
  const double secs = seconds_since(t0);
  const double pb_median = median3(pb_acc), none_median = median3(none_acc);
  const double pb_min = *std::min_element(pb_acc.begin(), pb_acc.end());
  const bool ok = pb_min >= 0.85 && pb_median - none_median >= 0.10 && params <= kMaxTrainableParams && secs < 900.0;
  return {ok, "PB median " + fmt(pb_median) + " min " + fmt(pb_min) + " (>= 0.85), none median " + fmt(none_median) +
                  ", gap " + fmt(pb_median - none_median) + " (>= 0.10), " + std::to_string(params) +
                  " params (<= 2000), " + fmt(secs) + " s (< 900 s)"};
}

Outcome harness_integrity() {
  cli::RunConfig shipped;
  cli::merge_config_file(shipped, std::string(LIQUID_S4_CONFIG_DIR) + "/verify.json");
  std::ostringstream clean_out, poison_out;
  const int clean = cli::cmd_verify(shipped, clean_out);
  cli::RunConfig poisoned = shipped;
  poisoned.poison = true;
  const int poison = cli::cmd_verify(poisoned, poison_out);
  const std::string text = clean_out.str();
  const auto listed = std::count(text.begin(), text.end(), '\n') - 1;
  return {clean == 0 && poison == 1 && listed >= 10, "shipped config exit " + std::to_string(clean) +
                                                         " with " + std::to_string(listed) +
                                                         " invariants, --poison exit " + std::to_string(poison)};
}

}  // namespace

int main() {
  report(1, "HiPPO/DPLR correctness", hippo_dplr);

  const auto t0 = clock_type::now();
  const Sweep sweep = run_sweep();
  const double sweep_secs = seconds_since(t0);
  report(2, "kernel-path equivalence", [&] { return kernel_paths(sweep, sweep_secs); });
  report(3, "recurrent oracle equivalence", [&] { return recurrent_oracle(sweep); });

  report(4, "unrolled expansion fidelity", expansion_fidelity);
  report(5, "liquid kernel semantics", liquid_semantics);
  report(6, "complexity shape", complexity_shape);
  report(7, "mechanism demonstration", mechanism_demo);
  report(8, "harness integrity", harness_integrity);

  std::printf("%s: %d of 8 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
