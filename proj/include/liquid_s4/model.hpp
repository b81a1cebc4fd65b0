#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "liquid_s4/conv_engine.hpp"
#include "liquid_s4/ssm_core.hpp"

namespace liquid_s4 {

enum class Norm { None, Layer, Batch };
enum class Activation { Gelu, Identity };

inline std::string to_string(Norm norm) {
  switch (norm) {
    case Norm::None: return "none";
    case Norm::Layer: return "layer";
    case Norm::Batch: return "batch";
  }
  return "none";
}

inline Norm parse_norm(const std::string& text) {
  if (text == "none") return Norm::None;
  if (text == "layer" || text == "ln") return Norm::Layer;
  if (text == "batch" || text == "bn") return Norm::Batch;
  throw Error(ErrorKind::Config, "unknown norm '" + text + "'");
}

struct LayerConfig {
  std::size_t features = 4;
  std::size_t state_size = 4;
  LiquidMode mode = LiquidMode::PB;
  int max_order = 2;
  std::size_t window = 8;
  Norm norm = Norm::None;
  bool prenorm = false;
  double dropout = 0.0;
  StepSizeSchedule dt;
  Activation activation = Activation::Gelu;
  bool residual = true;

  void validate() const {
    if (features < 1 || state_size < 1) throw Error(ErrorKind::Config, "layer needs H >= 1 and N >= 1");
    if (max_order > kMaxLiquidOrder) throw Error(ErrorKind::Config, "liquid order must be <= 10");
    if (mode != LiquidMode::None && max_order < 2) throw Error(ErrorKind::Config, "liquid modes need P >= 2");
    if (window < 1) throw Error(ErrorKind::Config, "liquid window must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorKind::Config, "dropout must lie in [0, 1)");
    if (dt.per_feature_dt.size() != features) throw Error(ErrorKind::Config, "dt schedule must cover every feature");
  }
};

struct ModelConfig {
  std::size_t depth = 1;
  std::size_t input_features = 1;
  std::size_t classes = 2;
  LayerConfig layer;
  std::uint64_t seed = 0;
};

/// Flat parameter vector with a fixed layout:
///   lift W (H x input) and bias (H);
///   per layer, per feature: log(-Re lambda), Im lambda, Re/Im p, Re/Im b, Re/Im c (N each), log dt;
///   readout R (classes x H) and bias (classes).
/// Re(lambda) = -exp(.) keeps A = Lambda - P P^H in the closed left half-plane.
class ModelStack {
 public:
  ModelStack() = default;

  explicit ModelStack(const ModelConfig& cfg) : cfg_(cfg) {
    if (cfg_.depth < 1) throw Error(ErrorKind::Config, "model depth must be >= 1");
    if (cfg_.classes < 1 || cfg_.input_features < 1) throw Error(ErrorKind::Config, "need classes, inputs >= 1");
    cfg_.layer.validate();
    layers_.assign(cfg_.depth, cfg_.layer);
    params_.assign(parameter_count(), 0.0);
    initialize();
  }

  const ModelConfig& config() const { return cfg_; }
  const std::vector<LayerConfig>& layers() const { return layers_; }
  std::size_t features() const { return cfg_.layer.features; }
  std::size_t state_size() const { return cfg_.layer.state_size; }

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  std::size_t per_feature_params() const { return 8 * state_size() + 1; }
  std::size_t lift_offset() const { return 0; }
  std::size_t lift_bias_offset() const { return features() * cfg_.input_features; }
  std::size_t layer_offset(std::size_t layer) const {
    return lift_bias_offset() + features() + layer * features() * per_feature_params();
  }
  std::size_t ssm_offset(std::size_t layer, std::size_t feature) const {
    return layer_offset(layer) + feature * per_feature_params();
  }
  std::size_t readout_offset() const { return layer_offset(cfg_.depth); }
  std::size_t readout_bias_offset() const { return readout_offset() + cfg_.classes * features(); }
  std::size_t parameter_count() const { return readout_bias_offset() + cfg_.classes; }

  DplrSystem system(std::size_t layer, std::size_t feature) const {
    const auto n = static_cast<Eigen::Index>(state_size());
    const double* w = params_.data() + ssm_offset(layer, feature);
    DplrSystem sys{ComplexVec(n), ComplexVec(n), ComplexVec(n), ComplexVec(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
      sys.lambda[i] = Complex(-std::exp(w[i]), w[n + i]);
      sys.p_vec[i] = Complex(w[2 * n + i], w[3 * n + i]);
      sys.b_vec[i] = Complex(w[4 * n + i], w[5 * n + i]);
      sys.c_vec[i] = Complex(w[6 * n + i], w[7 * n + i]);
    }
    return sys;
  }

  void set_system(std::size_t layer, std::size_t feature, const DplrSystem& sys, double dt) {
    const auto n = static_cast<Eigen::Index>(state_size());
    if (sys.state_size() != n) throw Error(ErrorKind::Config, "system state size mismatch");
    double* w = params_.data() + ssm_offset(layer, feature);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(sys.lambda[i].real() < 0.0)) throw Error(ErrorKind::Config, "Re(lambda) must be negative");
      w[i] = std::log(-sys.lambda[i].real());
      w[n + i] = sys.lambda[i].imag();
      w[2 * n + i] = sys.p_vec[i].real();
      w[3 * n + i] = sys.p_vec[i].imag();
      w[4 * n + i] = sys.b_vec[i].real();
      w[5 * n + i] = sys.b_vec[i].imag();
      w[6 * n + i] = sys.c_vec[i].real();
      w[7 * n + i] = sys.c_vec[i].imag();
    }
    w[8 * n] = std::log(dt);
  }

  // log dt is clamped so a large descent step cannot drive dt to 0 or inf
  double dt(std::size_t layer, std::size_t feature) const {
    return std::exp(std::clamp(params_[ssm_offset(layer, feature) + 8 * state_size()], -14.0, 2.0));
  }

 private:
  void initialize() {
    std::mt19937_64 rng(cfg_.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t h_count = features();
    for (std::size_t i = 0; i < h_count * cfg_.input_features; ++i) params_[lift_offset() + i] = normal(rng);

    const NplrDecomposition legs = nplr_decompose(static_cast<Eigen::Index>(state_size()));
    for (std::size_t layer = 0; layer < cfg_.depth; ++layer) {
      for (std::size_t h = 0; h < h_count; ++h) {
        DplrSystem sys = legs.system;
        sys.c_vec = random_output_vector(legs.basis, rng());
        set_system(layer, h, sys, layers_[layer].dt.per_feature_dt[h]);
      }
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(h_count));
    for (std::size_t i = 0; i < cfg_.classes * h_count; ++i) params_[readout_offset() + i] = scale * normal(rng);
  }

  ModelConfig cfg_;
  std::vector<LayerConfig> layers_;
  std::vector<double> params_;
};

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

namespace detail {

inline void normalize(SequenceBatch& z, Norm norm) {
  constexpr double eps = 1e-5;
  if (norm == Norm::Layer) {
    for (std::size_t b = 0; b < z.batch; ++b) {
      for (std::size_t t = 0; t < z.length; ++t) {
        double mean = 0.0, var = 0.0;
        for (std::size_t f = 0; f < z.features; ++f) mean += z.at(b, t, f);
        mean /= static_cast<double>(z.features);
        for (std::size_t f = 0; f < z.features; ++f) var += (z.at(b, t, f) - mean) * (z.at(b, t, f) - mean);
        var /= static_cast<double>(z.features);
        const double inv = 1.0 / std::sqrt(var + eps);
        for (std::size_t f = 0; f < z.features; ++f) z.at(b, t, f) = (z.at(b, t, f) - mean) * inv;
      }
    }
  } else if (norm == Norm::Batch) {
    const double count = static_cast<double>(z.batch * z.length);
    for (std::size_t f = 0; f < z.features; ++f) {
      double mean = 0.0, var = 0.0;
      for (std::size_t b = 0; b < z.batch; ++b)
        for (std::size_t t = 0; t < z.length; ++t) mean += z.at(b, t, f);
      mean /= count;
      for (std::size_t b = 0; b < z.batch; ++b)
        for (std::size_t t = 0; t < z.length; ++t) var += (z.at(b, t, f) - mean) * (z.at(b, t, f) - mean);
      var /= count;
      const double inv = 1.0 / std::sqrt(var + eps);
      for (std::size_t b = 0; b < z.batch; ++b)
        for (std::size_t t = 0; t < z.length; ++t) z.at(b, t, f) = (z.at(b, t, f) - mean) * inv;
    }
  }
}

}  // namespace detail

/// Logits laid out (batch x classes).
struct Logits {
  std::size_t batch = 0;
  std::size_t classes = 0;
  std::vector<double> values;

  double at(std::size_t b, std::size_t c) const { return values[b * classes + c]; }
};

struct ForwardOptions {
  bool training = false;              // enables dropout
  std::uint64_t dropout_seed = 0;
  std::vector<SequenceBatch>* trace = nullptr;  // optional per-layer pre-activation outputs
};

/// Lift -> per layer [prenorm] -> per-feature liquid S4 -> activation -> [dropout]
/// -> residual -> [postnorm] -> mean over time -> readout.
inline Logits forward(const ModelStack& model, const SequenceBatch& batch, const ForwardOptions& opt = {}) {
  const ModelConfig& cfg = model.config();
  if (batch.features != cfg.input_features) {
    std::ostringstream os;
    os << "batch has " << batch.features << " features, model expects " << cfg.input_features;
    throw Error(ErrorKind::Config, os.str());
  }
  const std::size_t h_count = model.features();
  const std::vector<double>& w = model.params();

  SequenceBatch z(batch.batch, batch.length, h_count);
  for (std::size_t b = 0; b < batch.batch; ++b) {
    for (std::size_t t = 0; t < batch.length; ++t) {
      for (std::size_t h = 0; h < h_count; ++h) {
        double acc = w[model.lift_bias_offset() + h];
        for (std::size_t f = 0; f < cfg.input_features; ++f)
          acc += w[model.lift_offset() + h * cfg.input_features + f] * batch.at(b, t, f);
        z.at(b, t, h) = acc;
      }
    }
  }

  std::mt19937_64 drop_rng(opt.dropout_seed);
  for (std::size_t layer = 0; layer < cfg.depth; ++layer) {
    const LayerConfig& lc = model.layers()[layer];
    SequenceBatch input = z;
    if (lc.prenorm) detail::normalize(input, lc.norm);

    SequenceBatch pre(batch.batch, batch.length, h_count);
    std::vector<double> seq(batch.length);
    for (std::size_t h = 0; h < h_count; ++h) {
      const LiquidS4Kernels kernels = prepare_liquid_s4(model.system(layer, h), model.dt(layer, h), batch.length,
                                                        lc.mode, lc.max_order, lc.window);
      for (std::size_t b = 0; b < batch.batch; ++b) {
        for (std::size_t t = 0; t < batch.length; ++t) seq[t] = input.at(b, t, h);
        const std::vector<double> y = apply_liquid_s4(kernels, seq);
        pre.set_sequence(b, h, y);
      }
    }
    if (opt.trace) opt.trace->push_back(pre);

    std::bernoulli_distribution keep(1.0 - lc.dropout);
    const double keep_scale = 1.0 / (1.0 - lc.dropout);
    for (std::size_t i = 0; i < pre.values.size(); ++i) {
      double a = lc.activation == Activation::Gelu ? gelu(pre.values[i]) : pre.values[i];
      if (opt.training && lc.dropout > 0.0) a = keep(drop_rng) ? a * keep_scale : 0.0;
      z.values[i] = lc.residual ? z.values[i] + a : a;
    }
    if (!lc.prenorm) detail::normalize(z, lc.norm);
  }

  Logits out{batch.batch, cfg.classes, std::vector<double>(batch.batch * cfg.classes, 0.0)};
  std::vector<double> pooled(h_count);
  for (std::size_t b = 0; b < batch.batch; ++b) {
    std::fill(pooled.begin(), pooled.end(), 0.0);
    for (std::size_t t = 0; t < batch.length; ++t)
      for (std::size_t h = 0; h < h_count; ++h) pooled[h] += z.at(b, t, h);
    for (double& v : pooled) v /= static_cast<double>(std::max<std::size_t>(batch.length, 1));
    for (std::size_t c = 0; c < cfg.classes; ++c) {
      double acc = w[model.readout_bias_offset() + c];
      for (std::size_t h = 0; h < h_count; ++h) acc += w[model.readout_offset() + c * h_count + h] * pooled[h];
      out.values[b * cfg.classes + c] = acc;
    }
  }
  return out;
}

struct LossAccuracy {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Mean softmax cross-entropy and argmax accuracy.
inline LossAccuracy evaluate_logits(const Logits& logits, const std::vector<int>& labels) {
  LossAccuracy out;
  if (logits.batch == 0) return out;
  for (std::size_t b = 0; b < logits.batch; ++b) {
    double mx = -INFINITY;
    std::size_t arg = 0;
    for (std::size_t c = 0; c < logits.classes; ++c) {
      if (logits.at(b, c) > mx) {
        mx = logits.at(b, c);
        arg = c;
      }
    }
    double denom = 0.0;
    for (std::size_t c = 0; c < logits.classes; ++c) denom += std::exp(logits.at(b, c) - mx);
    const auto label = static_cast<std::size_t>(labels[b]);
    out.loss += std::log(denom) - (logits.at(b, label) - mx);
    if (arg == label) out.accuracy += 1.0;
  }
  out.loss /= static_cast<double>(logits.batch);
  out.accuracy /= static_cast<double>(logits.batch);
  return out;
}

// ---------------------------------------------------------------------------
// synthetic tasks

enum class TaskKind { AdjacentProductSign, ImpulseMemory };

inline std::string to_string(TaskKind kind) {
  return kind == TaskKind::AdjacentProductSign ? "adjacent-product-sign" : "impulse-memory";
}

inline TaskKind parse_task(const std::string& text) {
  if (text == "adjacent-product-sign") return TaskKind::AdjacentProductSign;
  if (text == "impulse-memory") return TaskKind::ImpulseMemory;
  throw Error(ErrorKind::Config, "unknown task '" + text + "'");
}

struct SyntheticTask {
  TaskKind kind = TaskKind::AdjacentProductSign;
  std::size_t length = 32;
  double noise = 0.0;
  std::size_t classes = 2;
};

struct Dataset {
  SequenceBatch inputs;
  std::vector<int> labels;
};

/// 1 when sum_k u_k u_{k+1} > 0.
inline int adjacent_product_label(std::span<const double> u) {
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < u.size(); ++k) acc += u[k] * u[k + 1];
  return acc > 0.0 ? 1 : 0;
}

/// Draws sequences until every class holds its quota, so labels are balanced
/// to within one example regardless of n.
inline Dataset generate_task(const SyntheticTask& task, std::size_t n, std::uint64_t seed) {
  if (n < 2) throw Error(ErrorKind::Config, "generate_task needs n >= 2");
  if (task.length < 2) throw Error(ErrorKind::Config, "task length must be >= 2");
  const std::size_t classes = task.kind == TaskKind::AdjacentProductSign ? 2 : task.classes;
  if (classes < 2 || classes > task.length) throw Error(ErrorKind::Config, "impulse-memory needs 2 <= classes <= L");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::size_t> quota(classes, n / classes);
  for (std::size_t c = 0; c < n % classes; ++c) ++quota[c];

  Dataset ds{SequenceBatch(n, task.length, 1), std::vector<int>(n)};
  std::vector<double> u(task.length);
  std::size_t filled = 0;
  while (filled < n) {
    int label = 0;
    if (task.kind == TaskKind::AdjacentProductSign) {
      for (double& v : u) v = normal(rng);
      label = adjacent_product_label(u);
      for (double& v : u) v += task.noise * normal(rng);
    } else {
      std::uniform_int_distribution<std::size_t> pos(0, task.length - 1);
      const std::size_t at = pos(rng);
      for (double& v : u) v = task.noise * normal(rng);
      u[at] += 1.0;
      label = static_cast<int>(at * classes / task.length);
    }
    if (quota[static_cast<std::size_t>(label)] == 0) continue;
    --quota[static_cast<std::size_t>(label)];
    ds.inputs.set_sequence(filled, 0, u);
    ds.labels[filled] = label;
    ++filled;
  }
  return ds;
}

// ---------------------------------------------------------------------------
// finite-difference training

inline constexpr std::size_t kMaxTrainableParams = 2000;

struct TrainOptions {
  std::size_t epochs = 200;
  double learning_rate = 0.1;
  double momentum = 0.9;
  double fd_step = 1e-4;  // relative: h = fd_step * max(1, |theta|)
  std::uint64_t seed = 0;
};

struct TrainingReport {
  std::vector<double> loss;      // per epoch, before the update
  std::vector<double> accuracy;  // per epoch, before the update
  double final_loss = 0.0;
  double final_accuracy = 0.0;
  std::size_t parameter_count = 0;
  std::uint64_t seed = 0;
};

inline LossAccuracy loss_of(const ModelStack& model, const Dataset& data, std::uint64_t dropout_seed = 0,
                            bool training = false) {
  ForwardOptions opt;
  opt.training = training;
  opt.dropout_seed = dropout_seed;
  return evaluate_logits(forward(model, data.inputs, opt), data.labels);
}

/// Central finite difference of the loss for one parameter.
inline double fd_partial(ModelStack& model, const Dataset& data, std::size_t index, double step,
                         std::uint64_t dropout_seed = 0, bool training = false) {
  double& theta = model.params()[index];
  const double saved = theta;
  theta = saved + step;
  const double up = loss_of(model, data, dropout_seed, training).loss;
  theta = saved - step;
  const double down = loss_of(model, data, dropout_seed, training).loss;
  theta = saved;
  return (up - down) / (2.0 * step);
}

inline void check_budget(const ModelStack& model) {
  if (model.parameter_count() > kMaxTrainableParams) {
    std::ostringstream os;
    os << model.parameter_count() << " parameters, limit " << kMaxTrainableParams;
    throw Error(ErrorKind::Budget, os.str());
  }
}

/// Full-batch momentum descent on central finite-difference gradients.
inline TrainingReport train_demo(ModelStack& model, const Dataset& data, const TrainOptions& opt) {
  check_budget(model);
  const std::size_t count = model.parameter_count();
  TrainingReport report;
  report.parameter_count = count;
  report.seed = opt.seed;

  const bool uses_dropout = model.config().layer.dropout > 0.0;
  std::mt19937_64 rng(opt.seed);
  std::vector<double> velocity(count, 0.0), grad(count, 0.0);
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    const std::uint64_t drop_seed = rng();
    const LossAccuracy now = loss_of(model, data);
    report.loss.push_back(now.loss);
    report.accuracy.push_back(now.accuracy);
    for (std::size_t i = 0; i < count; ++i) {
      const double step = opt.fd_step * std::max(1.0, std::abs(model.params()[i]));
      grad[i] = fd_partial(model, data, i, step, drop_seed, uses_dropout);
    }
    for (std::size_t i = 0; i < count; ++i) {
      velocity[i] = opt.momentum * velocity[i] - opt.learning_rate * grad[i];
      model.params()[i] += velocity[i];
    }
  }
  const LossAccuracy last = loss_of(model, data);
  report.final_loss = last.loss;
  report.final_accuracy = last.accuracy;
  return report;
}

}  // namespace liquid_s4
