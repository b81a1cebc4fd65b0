#pragma once

#include <chrono>
#include <cstdint>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "liquid_s4/bench.hpp"
#include "liquid_s4/conv_engine.hpp"
#include "liquid_s4/expansion.hpp"
#include "liquid_s4/io.hpp"
#include "liquid_s4/model.hpp"

namespace liquid_s4::cli {

using json = nlohmann::ordered_json;

enum ExitCode : int { kOk = 0, kVerifyFailed = 1, kUsage = 2, kIo = 3 };

/// Flat run configuration. Unset fields fall back to per-command defaults.
struct RunConfig {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> state, features, length, window, depth, classes, epochs, train_size, eval_size;
  std::optional<int> order;
  std::optional<std::string> mode, task, norm;
  std::optional<double> dt_min, dt_max, lr, momentum, noise, dropout;
  std::optional<bool> prenorm;
  std::vector<std::size_t> bench_lengths;
  std::string out, input, against;
  bool verify = false;
  bool poison = false;

  std::uint64_t seed_or(std::uint64_t d) const { return seed.value_or(d); }
};

template <class T>
void read_key(const json& doc, const char* key, std::optional<T>& field) {
  if (doc.contains(key)) field = doc.at(key).get<T>();
}

/// Loads a flat JSON document; keys already set (command-line overrides) win.
inline void merge_config_file(RunConfig& cfg, const std::string& path) {
  json doc;
  try {
    doc = json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, "config '" + path + "': " + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorKind::Config, "config must be a flat key-value object");
  static const std::vector<std::string> known = {
      "seed",   "state",      "features",  "length",  "window", "depth", "classes",  "epochs",  "train_size",
      "eval_size", "order",  "mode",      "task",    "norm",   "dt_min", "dt_max", "lr",      "momentum",
      "noise",  "dropout",    "prenorm",   "bench_lengths"};
  for (const auto& item : doc.items()) {
    if (std::find(known.begin(), known.end(), item.key()) == known.end())
      throw Error(ErrorKind::Config, "unknown config key '" + item.key() + "'");
  }
  RunConfig file;
  try {
    read_key(doc, "seed", file.seed);
    read_key(doc, "state", file.state);
    read_key(doc, "features", file.features);
    read_key(doc, "length", file.length);
    read_key(doc, "window", file.window);
    read_key(doc, "depth", file.depth);
    read_key(doc, "classes", file.classes);
    read_key(doc, "epochs", file.epochs);
    read_key(doc, "train_size", file.train_size);
    read_key(doc, "eval_size", file.eval_size);
    read_key(doc, "order", file.order);
    read_key(doc, "mode", file.mode);
    read_key(doc, "task", file.task);
    read_key(doc, "norm", file.norm);
    read_key(doc, "dt_min", file.dt_min);
    read_key(doc, "dt_max", file.dt_max);
    read_key(doc, "lr", file.lr);
    read_key(doc, "momentum", file.momentum);
    read_key(doc, "noise", file.noise);
    read_key(doc, "dropout", file.dropout);
    read_key(doc, "prenorm", file.prenorm);
    if (doc.contains("bench_lengths")) file.bench_lengths = doc.at("bench_lengths").get<std::vector<std::size_t>>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, std::string("config value has the wrong type: ") + e.what());
  }
  auto fill = [](auto& dst, const auto& src) {
    if (!dst && src) dst = src;
  };
  fill(cfg.seed, file.seed);
  fill(cfg.state, file.state);
  fill(cfg.features, file.features);
  fill(cfg.length, file.length);
  fill(cfg.window, file.window);
  fill(cfg.depth, file.depth);
  fill(cfg.classes, file.classes);
  fill(cfg.epochs, file.epochs);
  fill(cfg.train_size, file.train_size);
  fill(cfg.eval_size, file.eval_size);
  fill(cfg.order, file.order);
  fill(cfg.mode, file.mode);
  fill(cfg.task, file.task);
  fill(cfg.norm, file.norm);
  fill(cfg.dt_min, file.dt_min);
  fill(cfg.dt_max, file.dt_max);
  fill(cfg.lr, file.lr);
  fill(cfg.momentum, file.momentum);
  fill(cfg.noise, file.noise);
  fill(cfg.dropout, file.dropout);
  fill(cfg.prenorm, file.prenorm);
  if (cfg.bench_lengths.empty()) cfg.bench_lengths = file.bench_lengths;
}

inline void emit(const json& doc, const std::string& out_path, std::ostream& fallback) {
  const std::string text = doc.dump(2) + "\n";
  if (out_path.empty())
    fallback << text;
  else
    io::write_file(out_path, text);
}

inline json complex_parts(const ComplexVec& v) {
  json re = json::array(), im = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    re.push_back(v[i].real());
    im.push_back(v[i].imag());
  }
  return json{{"re", re}, {"im", im}};
}

// ---------------------------------------------------------------------------
// shared system construction

struct FeatureSystems {
  std::size_t state = 0;
  std::vector<DplrSystem> systems;
  StepSizeSchedule schedule;
};

/// LegS systems, one per feature, each with its own seeded output vector.
inline FeatureSystems make_feature_systems(std::size_t state, std::size_t features, std::size_t length,
                                           std::optional<double> dt_min, std::optional<double> dt_max,
                                           std::uint64_t seed) {
  if (state < 1) throw Error(ErrorKind::InvalidDimension, "state size must be >= 1");
  if (features < 1) throw Error(ErrorKind::InvalidDimension, "features must be >= 1");
  FeatureSystems fs;
  fs.state = state;
  const double lo = dt_min.value_or(default_dt_min(length));
  const double hi = dt_max.value_or(kDefaultDtMax);
  fs.schedule = init_dt_schedule(features, lo, std::max(lo, hi), seed);
  if (dt_max && *dt_max < lo) throw Error(ErrorKind::InvalidRange, "dt_max must be >= dt_min");
  const NplrDecomposition legs = nplr_decompose(static_cast<Eigen::Index>(state));
  std::mt19937_64 rng(seed ^ 0x5eed5eedULL);
  for (std::size_t h = 0; h < features; ++h) {
    DplrSystem sys = legs.system;
    sys.c_vec = random_output_vector(legs.basis, rng());
    fs.systems.push_back(std::move(sys));
  }
  return fs;
}

struct LiquidSettings {
  LiquidMode mode = LiquidMode::PB;
  int order = 3;
  std::size_t window = 8;
};

inline LiquidSettings resolve_liquid(const RunConfig& cfg, std::size_t length, const char* default_mode, int default_order) {
  LiquidSettings s;
  s.mode = parse_liquid_mode(cfg.mode.value_or(default_mode));
  s.order = cfg.order.value_or(default_order);
  if (s.mode != LiquidMode::None && (s.order < 2 || s.order > kMaxLiquidOrder))
    throw Error(ErrorKind::InvalidOrder, "--order must lie in [2, 10]");
  s.window = cfg.window.value_or(default_liquid_window(length));
  if (s.window < 1) throw Error(ErrorKind::InvalidDimension, "--window must be >= 1");
  s.window = std::min(s.window, length);
  return s;
}

// ---------------------------------------------------------------------------
// hippo

inline int cmd_hippo(const RunConfig& cfg, std::ostream& out) {
  const std::size_t n = cfg.state.value_or(4);
  if (n < 1) throw Error(ErrorKind::InvalidDimension, "state size must be >= 1");
  const RealMatrix hippo = hippo_legs(static_cast<Eigen::Index>(n));
  const NplrDecomposition dec = nplr_decompose(static_cast<Eigen::Index>(n), cfg.seed_or(0));

  json rows = json::array();
  for (Eigen::Index r = 0; r < hippo.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < hippo.cols(); ++c) row.push_back(hippo(r, c));
    rows.push_back(row);
  }
  json doc;
  doc["command"] = "hippo";
  doc["state"] = n;
  doc["hippo"] = rows;
  doc["lambda"] = complex_parts(dec.system.lambda);
  doc["p"] = complex_parts(dec.system.p_vec);
  doc["b"] = complex_parts(dec.system.b_vec);
  doc["normal_residual"] = dec.normal_residual;
  doc["reconstruction_residual"] = dec.reconstruction_residual;
  emit(doc, cfg.out, out);
  return kOk;
}

// ---------------------------------------------------------------------------
// kernel

inline int cmd_kernel(const RunConfig& cfg, std::ostream& out) {
  const std::size_t n = cfg.state.value_or(64);
  const std::size_t length = cfg.length.value_or(1024);
  const std::size_t features = cfg.features.value_or(1);
  if (length < 1) throw Error(ErrorKind::InvalidDimension, "--length must be >= 1");
  const std::uint64_t seed = cfg.seed_or(0);
  const LiquidSettings liquid = resolve_liquid(cfg, length, "none", 3);
  const FeatureSystems fs = make_feature_systems(n, features, length, cfg.dt_min, cfg.dt_max, seed);

  json doc;
  doc["command"] = "kernel";
  doc["state"] = n;
  doc["length"] = length;
  doc["features"] = features;
  doc["mode"] = to_string(liquid.mode);
  doc["order"] = liquid.order;
  doc["window"] = liquid.window;
  doc["seed"] = seed;
  doc["dt_min"] = fs.schedule.dt_min;
  doc["dt_max"] = fs.schedule.dt_max;

  double worst = 0.0;
  double genfn_ms = 0.0, liquid_ms = 0.0;
  json kernels = json::array();
  for (std::size_t h = 0; h < features; ++h) {
    const double dt = fs.schedule.per_feature_dt[h];
    const auto t0 = std::chrono::steady_clock::now();
    Kernel k = kernel_genfn(fs.systems[h], dt, length);
    const auto t1 = std::chrono::steady_clock::now();
    genfn_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();
    if (cfg.poison && !k.taps.empty()) k.taps[k.taps.size() / 2] = -k.taps[k.taps.size() / 2] + 1.0;

    json entry;
    entry["feature"] = h;
    entry["dt"] = dt;
    entry["residual_imag"] = k.residual_imag;
    entry["taps"] = k.taps;
    if (liquid.mode != LiquidMode::None) {
      const auto t2 = std::chrono::steady_clock::now();
      const LiquidKernelSet set =
          build_liquid_kernels(discretize_bilinear(fs.systems[h], dt), liquid.mode, liquid.order, liquid.window);
      liquid_ms += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t2).count();
      json orders = json::array();
      for (std::size_t i = 0; i < set.taps.size(); ++i)
        orders.push_back({{"order", set.order_of(i)}, {"residual_imag", set.residual_imag[i]}, {"taps", set.taps[i]}});
      entry["liquid"] = orders;
    }
    if (cfg.verify) {
      const Kernel naive = kernel_naive(discretize_bilinear(fs.systems[h], dt), length);
      const double err = relative_linf(k.taps, naive.taps);
      entry["naive_rel_linf"] = err;
      worst = std::max(worst, err);
    }
    kernels.push_back(entry);
  }
  doc["kernels"] = kernels;
  if (cfg.verify) doc["verify"] = {{"max_rel_linf", worst}, {"tolerance", 1e-8}, {"passed", worst < 1e-8}};
  doc["timing"] = {{"genfn_ms", genfn_ms}, {"liquid_ms", liquid_ms}};
  emit(doc, cfg.out, out);
  return cfg.verify && !(worst < 1e-8) ? kVerifyFailed : kOk;
}

// ---------------------------------------------------------------------------
// convolve

inline SequenceBatch convolve_batch(const SequenceBatch& input, const FeatureSystems& fs, const LiquidSettings& liquid) {
  SequenceBatch output(input.batch, input.length, input.features);
  for (std::size_t h = 0; h < input.features; ++h) {
    const LiquidS4Kernels k = prepare_liquid_s4(fs.systems[h], fs.schedule.per_feature_dt[h], input.length,
                                                liquid.mode, liquid.order, liquid.window);
    for (std::size_t b = 0; b < input.batch; ++b) output.set_sequence(b, h, apply_liquid_s4(k, input.sequence(b, h)));
  }
  return output;
}

inline int cmd_convolve(const RunConfig& cfg, std::ostream& out) {
  if (cfg.input.empty()) throw Error(ErrorKind::Config, "convolve needs --input");
  if (cfg.out.empty()) throw Error(ErrorKind::Config, "convolve needs --out");
  const SequenceBatch input = io::read_sequences(cfg.input);
  if (cfg.features && *cfg.features != input.features)
    throw Error(ErrorKind::Config, "--features disagrees with the input file");
  const std::size_t n = cfg.state.value_or(64);
  const LiquidSettings liquid = resolve_liquid(cfg, input.length, "none", 3);
  const FeatureSystems fs = make_feature_systems(n, input.features, input.length, cfg.dt_min, cfg.dt_max, cfg.seed_or(0));
  io::write_sequences(cfg.out, convolve_batch(input, fs, liquid));
  out << "wrote " << input.batch << "x" << input.length << "x" << input.features << " to " << cfg.out << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// verify

struct CheckResult {
  std::string name;
  double residual = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// max |a - b| / max(1, max |b|)
inline double scaled_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, scale = 1.0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max(scale, std::abs(b[i]));
  }
  return a.size() == b.size() ? diff / scale : INFINITY;
}

inline std::vector<double> random_sequence(std::size_t length, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> u(length);
  for (double& v : u) v = normal(rng);
  return u;
}

/// Runs the invariant suite; `poison` corrupts one generating-function tap.
inline std::vector<CheckResult> run_verify_suite(std::size_t state, std::size_t length, std::uint64_t seed, bool poison) {
  std::vector<CheckResult> checks;
  auto record = [&](const std::string& name, double residual, double tol, bool inclusive = false) {
    const bool ok = std::isfinite(residual) && (inclusive ? residual <= tol : residual < tol);
    checks.push_back({name, residual, tol, ok});
  };
  std::mt19937_64 rng(seed);
  const auto n = static_cast<Eigen::Index>(state);

  {
    double worst = 0.0;
    for (Eigen::Index m : {Eigen::Index{2}, Eigen::Index{4}, Eigen::Index{16}, Eigen::Index{64}})
      worst = std::max(worst, nplr_decompose(m).reconstruction_residual);
    record("hippo_dplr_reconstruction", worst, 1e-8);
  }
  {
    const RealMatrix s = hippo_legs(256) + [] {
      const auto [b, p] = legs_init_vectors(256);
      const Eigen::VectorXd pr = p.real();
      return RealMatrix(pr * pr.transpose());
    }();
    record("hippo_normal_plus_low_rank", (s + s.transpose() + RealMatrix::Identity(256, 256)).norm(), 1e-10);
  }
  {
    const DplrSystem legs = legs_system(64, seed);
    Eigen::ComplexEigenSolver<ComplexMatrix> es(legs.dense_a());
    record("dplr_left_half_plane", es.eigenvalues().real().maxCoeff(), 1e-8, true);
  }
  {
    std::uniform_real_distribution<double> dt_dist(1e-3, 1.0);
    double worst_radius = 0.0, worst_b = 0.0;
    for (int trial = 0; trial < 8; ++trial) {
      const DplrSystem sys = trial % 2 ? legs_system(n, seed + trial) : random_stable_system(n, rng);
      const double dt = dt_dist(rng);
      const DiscreteSystem d = discretize_bilinear(sys, dt);
      Eigen::ComplexEigenSolver<ComplexMatrix> es(d.a_bar);
      worst_radius = std::max(worst_radius, es.eigenvalues().cwiseAbs().maxCoeff());
      worst_b = std::max(worst_b, (discretize_b_structured(sys, dt) - d.b_bar).cwiseAbs().maxCoeff());
    }
    record("bilinear_unit_disk", worst_radius - 1.0, 1e-8, true);
    record("woodbury_vs_dense_b_bar", worst_b, 1e-10);
  }

  const DplrSystem legs = legs_system(n, seed);
  const double dt = 0.05;
  const DiscreteSystem d = discretize_bilinear(legs, dt);
  {
    double worst = 0.0, imag = 0.0;
    std::uniform_real_distribution<double> log_dt(std::log(1e-3), std::log(0.2));
    for (int trial = 0; trial < 6; ++trial) {
      const DplrSystem sys = trial == 0 ? legs : random_stable_system(n, rng);
      const double step = trial == 0 ? dt : std::exp(log_dt(rng));
      for (std::size_t l : {std::size_t{16}, std::size_t{64}, length}) {
        Kernel k = kernel_genfn(sys, step, l);
        if (poison && trial == 0) k.taps[std::min<std::size_t>(1, l - 1)] *= -1.0;
        const Kernel naive = kernel_naive(discretize_bilinear(sys, step), l);
        worst = std::max(worst, relative_linf(k.taps, naive.taps));
        imag = std::max(imag, k.residual_imag);
      }
    }
    record("genfn_vs_naive_kernel", worst, 1e-8);
    record("kernel_residual_imag", imag, 1e-6);
  }
  {
    std::vector<double> impulse(length, 0.0);
    impulse[0] = 1.0;
    record("impulse_response_equals_taps", scaled_error(recurrent_s4(d, impulse), kernel_naive(d, length).taps), 1e-12);
  }
  const std::vector<double> u = random_sequence(length, rng);
  record("forward_none_vs_recurrent",
         scaled_error(forward_liquid_s4(legs, dt, u, LiquidMode::None, 1, 1), recurrent_s4(d, u)), 1e-8);
  {
    const std::vector<double> taps = random_sequence(length, rng);
    record("fft_conv_vs_direct", scaled_error(causal_conv_fft(taps, u), causal_conv_direct(taps, u)), 1e-10);
    std::vector<double> perturbed = u;
    const std::size_t cut = length / 2;
    for (std::size_t i = cut + 1; i < length; ++i) perturbed[i] += 10.0;
    const auto y0 = causal_conv_fft(taps, u), y1 = causal_conv_fft(taps, perturbed);
    record("causality", scaled_error(std::span(y1).first(cut + 1), std::span(y0).first(cut + 1)), 1e-12);
  }
  {
    double flip_err = 0.0, kb_pb = 0.0;
    for (int p = 2; p <= 4; ++p) {
      const auto lag = liquid_kernel_kb(d, p, 16).taps;
      const auto desc = liquid_kernel_kb_descending(d, p, 16).taps;
      const auto flipped = flip(desc);
      for (std::size_t i = 0; i < lag.size(); ++i) flip_err = std::max(flip_err, std::abs(flipped[i] - lag[i]));
      DiscreteSystem ident = d;
      ident.a_bar = ComplexMatrix::Identity(n, n);
      ident.structured.reset();
      kb_pb = std::max(kb_pb, scaled_error(liquid_kernel_kb(ident, p, 16).taps, liquid_kernel_pb(d, p, 16).taps));
    }
    record("kb_descending_is_flip", flip_err, 0.0, true);
    record("kb_identity_equals_pb", kb_pb, 1e-12);
  }
  {
    const std::size_t l_small = std::min<std::size_t>(length, 32);
    const std::vector<double> us = random_sequence(l_small, rng);
    for (LiquidMode mode : {LiquidMode::KB, LiquidMode::PB}) {
      const auto path = forward_liquid_s4(legs, dt, us, mode, 4, 8);
      const auto oracle = liquid_oracle(d, us, 4, 8, mode);
      record(std::string("liquid_oracle_") + to_string(mode), scaled_error(path, oracle), 1e-10);
    }
  }
  {
    const DplrSystem small = random_stable_system(3, rng);
    const DiscreteSystem ds = discretize_bilinear(small, 0.1);
    const std::vector<double> us = random_sequence(5, rng);
    const auto rec = recurrent_liquid(ds, us);
    std::vector<double> expanded(us.size());
    for (std::size_t k = 0; k < us.size(); ++k) expanded[k] = sum_terms(expand_liquid_output(ds, us, k));
    record("recurrent_liquid_vs_term_expansion", scaled_error(rec, expanded), 1e-10);

    // kernel path at L=3, P=2, window 3 misses exactly the non-consecutive and order-3 terms
    const std::vector<double> u3(us.begin(), us.begin() + 3);
    const auto kernel_path = forward_liquid_s4(small, 0.1, u3, LiquidMode::KB, 2, 3);
    const auto exact = recurrent_liquid(ds, u3);
    double worst = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      double excluded = 0.0;
      for (const auto& t : expand_liquid_output(ds, u3, k))
        if (t.order() > 2 || (t.order() == 2 && !t.consecutive())) excluded += t.value;
      worst = std::max(worst, std::abs(exact[k] - kernel_path[k] - excluded));
    }
    record("kernel_path_gap_is_excluded_terms", worst, 1e-10);
  }
  return checks;
}

inline int cmd_verify(const RunConfig& cfg, std::ostream& out) {
  const std::size_t state = cfg.state.value_or(8);
  const std::size_t length = cfg.length.value_or(256);
  if (state < 1 || length < 16) throw Error(ErrorKind::Config, "verify needs --state >= 1 and --length >= 16");
  std::vector<CheckResult> checks = run_verify_suite(state, length, cfg.seed_or(0), cfg.poison);

  if (!cfg.input.empty() || !cfg.against.empty()) {
    if (cfg.input.empty() || cfg.against.empty()) throw Error(ErrorKind::Config, "--input and --against go together");
    const SequenceBatch input = io::read_sequences(cfg.input);
    const SequenceBatch produced = io::read_sequences(cfg.against);
    if (produced.values.size() != input.values.size()) throw Error(ErrorKind::Config, "--against shape differs from --input");
    const FeatureSystems fs = make_feature_systems(cfg.state.value_or(64), input.features, input.length, cfg.dt_min,
                                                   cfg.dt_max, cfg.seed_or(0));
    double worst = 0.0;
    for (std::size_t h = 0; h < input.features; ++h) {
      const DiscreteSystem dh = discretize_bilinear(fs.systems[h], fs.schedule.per_feature_dt[h]);
      for (std::size_t b = 0; b < input.batch; ++b) {
        const auto ref = recurrent_s4(dh, input.sequence(b, h));
        std::vector<double> got(input.length);
        for (std::size_t t = 0; t < input.length; ++t) got[t] = produced.values[(b * input.length + t) * input.features + h];
        worst = std::max(worst, scaled_error(got, ref));
      }
    }
    checks.push_back({"convolve_round_trip_vs_recurrent", worst, 1e-8, worst < 1e-8});
  }

  json report = json::array();
  bool all = true;
  std::vector<std::string> failed;
  for (const auto& c : checks) {
    report.push_back({{"name", c.name}, {"residual", c.residual}, {"tolerance", c.tolerance}, {"passed", c.passed}});
    if (!c.passed) failed.push_back(c.name);
    all = all && c.passed;
  }
  json doc;
  doc["command"] = "verify";
  doc["state"] = state;
  doc["length"] = length;
  doc["seed"] = cfg.seed_or(0);
  doc["poison"] = cfg.poison;
  doc["checks"] = report;
  doc["failed"] = failed;
  doc["passed"] = all;
  if (!cfg.out.empty()) io::write_file(cfg.out, doc.dump(2) + "\n");
  for (const auto& c : checks)
    out << (c.passed ? "PASS " : "FAIL ") << c.name << " residual=" << c.residual << " tol=" << c.tolerance << "\n";
  out << (all ? "all invariants hold" : "verification failed") << " (" << checks.size() << " checks)\n";
  return all ? kOk : kVerifyFailed;
}

// ---------------------------------------------------------------------------
// bench

struct BenchSummary {
  BenchReport report;
  double genfn_exponent = 0.0;
  double naive_exponent = 0.0;
  double liquid_kb_ratio = 0.0;
  double liquid_pb_ratio = 0.0;
};

inline double spread_ratio(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi / *lo;
}

inline BenchSummary run_bench(const DplrSystem& sys, double dt, const std::vector<std::size_t>& lengths,
                              const BenchOptions& opt) {
  BenchSummary s;
  s.report = bench_kernel(sys, dt, lengths, opt);
  s.genfn_exponent = growth_exponent(s.report.lengths_for("genfn"), s.report.millis_for("genfn"));
  s.naive_exponent = growth_exponent(s.report.lengths_for("naive"), s.report.millis_for("naive"));
  s.liquid_kb_ratio = spread_ratio(s.report.millis_for("liquid_kb"));
  s.liquid_pb_ratio = spread_ratio(s.report.millis_for("liquid_pb"));
  return s;
}

inline int cmd_bench(const RunConfig& cfg, std::ostream& out) {
  const std::size_t n = cfg.state.value_or(64);
  std::vector<std::size_t> lengths = cfg.bench_lengths;
  if (lengths.empty()) lengths = {1024, 2048, 4096, 8192, 16384};
  if (cfg.length && cfg.bench_lengths.empty()) lengths = {*cfg.length};
  const std::uint64_t seed = cfg.seed_or(0);
  const FeatureSystems fs = make_feature_systems(n, 1, lengths.front(), cfg.dt_min, cfg.dt_max, seed);
  BenchOptions opt;
  opt.liquid_order = cfg.order.value_or(3);
  opt.liquid_window = cfg.window.value_or(64);
  const BenchSummary s = run_bench(fs.systems[0], fs.schedule.per_feature_dt[0], lengths, opt);

  out << "path,L,N,millis\n";
  json records = json::array();
  for (const auto& r : s.report.records) {
    out << r.path << "," << r.length << "," << r.state_size << "," << r.millis << "\n";
    records.push_back({{"path", r.path}, {"L", r.length}, {"N", r.state_size}, {"millis", r.millis}});
  }
  json doc;
  doc["command"] = "bench";
  doc["state"] = n;
  doc["lengths"] = lengths;
  doc["window"] = opt.liquid_window;
  doc["order"] = opt.liquid_order;
  doc["seed"] = seed;
  doc["max_path_disagreement"] = s.report.max_path_disagreement;
  doc["timing"] = {{"records", records},
                   {"genfn_growth_exponent", s.genfn_exponent},
                   {"naive_growth_exponent", s.naive_exponent},
                   {"liquid_kb_ratio", s.liquid_kb_ratio},
                   {"liquid_pb_ratio", s.liquid_pb_ratio}};
  if (!cfg.out.empty()) io::write_file(cfg.out, doc.dump(2) + "\n");
  return kOk;
}

// ---------------------------------------------------------------------------
// train-demo

// Demo defaults match configs/train_demo.json. With dt_min = 1/L the order-2
// taps start near dt^2 and the first ~150 epochs are spent growing them.
inline constexpr double kDemoDtMin = 0.1;

struct DemoSetup {
  ModelConfig model;
  SyntheticTask task;
  TrainOptions train;
  std::size_t train_size = 256;
  std::size_t eval_size = 256;
};

inline DemoSetup resolve_demo(const RunConfig& cfg) {
  DemoSetup s;
  const std::uint64_t seed = cfg.seed_or(0);
  s.task.kind = parse_task(cfg.task.value_or("adjacent-product-sign"));
  s.task.length = cfg.length.value_or(32);
  s.task.noise = cfg.noise.value_or(0.0);
  s.task.classes = cfg.classes.value_or(s.task.kind == TaskKind::AdjacentProductSign ? 2 : 4);

  LayerConfig& layer = s.model.layer;
  layer.features = cfg.features.value_or(4);
  layer.state_size = cfg.state.value_or(4);
  layer.mode = parse_liquid_mode(cfg.mode.value_or("pb"));
  layer.max_order = cfg.order.value_or(2);
  layer.window = std::min(cfg.window.value_or(default_liquid_window(s.task.length)), s.task.length);
  layer.norm = parse_norm(cfg.norm.value_or("none"));
  layer.prenorm = cfg.prenorm.value_or(false);
  layer.dropout = cfg.dropout.value_or(0.0);
  const double lo = cfg.dt_min.value_or(kDemoDtMin);
  layer.dt = init_dt_schedule(layer.features, lo, std::max(lo, cfg.dt_max.value_or(kDefaultDtMax)), seed);
  s.model.depth = cfg.depth.value_or(1);
  s.model.input_features = 1;
  s.model.classes = s.task.kind == TaskKind::AdjacentProductSign ? 2 : s.task.classes;
  s.model.seed = seed;

  s.train.epochs = cfg.epochs.value_or(200);
  s.train.learning_rate = cfg.lr.value_or(0.1);
  s.train.momentum = cfg.momentum.value_or(0.9);
  s.train.seed = seed;
  s.train_size = cfg.train_size.value_or(128);
  s.eval_size = cfg.eval_size.value_or(256);
  return s;
}

struct DemoResult {
  TrainingReport report;
  double eval_accuracy = 0.0;
  std::size_t parameter_count = 0;
};

inline DemoResult run_demo(const DemoSetup& s) {
  ModelStack model(s.model);
  check_budget(model);
  const Dataset train = generate_task(s.task, s.train_size, s.model.seed * 2 + 1);
  const Dataset eval = generate_task(s.task, s.eval_size, s.model.seed * 2 + 2);
  DemoResult r;
  r.parameter_count = model.parameter_count();
  r.report = train_demo(model, train, s.train);
  r.eval_accuracy = loss_of(model, eval).accuracy;
  return r;
}

inline int cmd_train_demo(const RunConfig& cfg, std::ostream& out) {
  const DemoSetup s = resolve_demo(cfg);
  const DemoResult r = run_demo(s);
  const LayerConfig& layer = s.model.layer;
  json doc;
  doc["command"] = "train-demo";
  doc["seed"] = s.model.seed;
  doc["config"] = {{"task", to_string(s.task.kind)},
                   {"length", s.task.length},
                   {"noise", s.task.noise},
                   {"classes", s.model.classes},
                   {"depth", s.model.depth},
                   {"features", layer.features},
                   {"state", layer.state_size},
                   {"mode", to_string(layer.mode)},
                   {"order", layer.max_order},
                   {"window", layer.window},
                   {"norm", to_string(layer.norm)},
                   {"prenorm", layer.prenorm},
                   {"dropout", layer.dropout},
                   {"dt", layer.dt.per_feature_dt},
                   {"epochs", s.train.epochs},
                   {"lr", s.train.learning_rate},
                   {"momentum", s.train.momentum},
                   {"train_size", s.train_size},
                   {"eval_size", s.eval_size}};
  doc["parameter_count"] = r.parameter_count;
  doc["loss"] = r.report.loss;
  doc["accuracy"] = r.report.accuracy;
  doc["final_loss"] = r.report.final_loss;
  doc["final_accuracy"] = r.report.final_accuracy;
  doc["eval_accuracy"] = r.eval_accuracy;
  emit(doc, cfg.out, out);
  return kOk;
}

}  // namespace liquid_s4::cli
