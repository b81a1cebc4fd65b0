#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

using namespace liquid_s4;

namespace {

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io:
    case ErrorKind::Parse:
      return cli::kIo;
    case ErrorKind::Diverged:
    case ErrorKind::Pole:
    case ErrorKind::WoodburySingular:
    case ErrorKind::Decomposition:
    case ErrorKind::Discretization:
      return cli::kVerifyFailed;
    default:
      return cli::kUsage;
  }
}

void add_model_flags(CLI::App* app, cli::RunConfig& cfg) {
  app->add_option("--seed", cfg.seed, "RNG seed");
  app->add_option("--state", cfg.state, "state size N");
  app->add_option("--features", cfg.features, "feature count H");
  app->add_option("--length", cfg.length, "sequence length L");
  app->add_option("--mode", cfg.mode, "liquid mode: kb, pb or none");
  app->add_option("--order", cfg.order, "max liquid order P");
  app->add_option("--window", cfg.window, "liquid kernel length");
  app->add_option("--dt-min", cfg.dt_min, "smallest step size");
  app->add_option("--dt-max", cfg.dt_max, "largest step size");
  app->add_option("--out", cfg.out, "output path");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"liquid S4 kernels: generation, convolution, verification, benchmarks"};
  app.require_subcommand(1);
  cli::RunConfig cfg;
  std::string config_path;
  app.add_option("--config", config_path, "flat JSON config; flags override its keys");

  auto* hippo = app.add_subcommand("hippo", "write the HiPPO-LegS matrix and its DPLR decomposition");
  hippo->add_option("-n,--state", cfg.state, "state size N");
  hippo->add_option("--seed", cfg.seed, "seed for the output vector");
  hippo->add_option("--out", cfg.out, "output path (stdout when omitted)");

  auto* kernel = app.add_subcommand("kernel", "generate S4 and liquid kernel taps");
  add_model_flags(kernel, cfg);
  kernel->add_flag("--verify", cfg.verify, "check against the recurrent powers oracle");
  kernel->add_flag("--poison", cfg.poison, "corrupt one tap (harness self-test)");

  auto* convolve = app.add_subcommand("convolve", "run the liquid S4 layer over a sequence file");
  add_model_flags(convolve, cfg);
  convolve->add_option("--input", cfg.input, "LSQ4 binary or CSV input")->required();

  auto* verify = app.add_subcommand("verify", "run the invariant suite");
  add_model_flags(verify, cfg);
  verify->add_flag("--poison", cfg.poison, "corrupt one generated tap; the suite must fail");
  verify->add_option("--input", cfg.input, "convolve input to re-check");
  verify->add_option("--against", cfg.against, "convolve output to re-check");

  auto* bench = app.add_subcommand("bench", "time kernel paths over a length sweep");
  add_model_flags(bench, cfg);
  bench->add_option("--lengths", cfg.bench_lengths, "lengths to sweep");

  auto* train = app.add_subcommand("train-demo", "finite-difference training on a synthetic task");
  add_model_flags(train, cfg);
  train->add_option("--task", cfg.task, "adjacent-product-sign or impulse-memory");
  train->add_option("--epochs", cfg.epochs, "training epochs");
  train->add_option("--lr", cfg.lr, "learning rate");
  train->add_option("--momentum", cfg.momentum, "momentum");
  train->add_option("--train-size", cfg.train_size, "training examples");
  train->add_option("--eval-size", cfg.eval_size, "held-out examples");
  train->add_option("--noise", cfg.noise, "input noise level");
  train->add_option("--depth", cfg.depth, "layer count");
  train->add_option("--classes", cfg.classes, "class count (impulse-memory)");
  train->add_option("--norm", cfg.norm, "none, layer or batch");
  train->add_flag("--prenorm", cfg.prenorm, "normalize before the SSM");
  train->add_option("--dropout", cfg.dropout, "dropout probability");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kUsage;
  }

  try {
    if (!config_path.empty()) cli::merge_config_file(cfg, config_path);
    if (*hippo) return cli::cmd_hippo(cfg, std::cout);
    if (*kernel) return cli::cmd_kernel(cfg, std::cout);
    if (*convolve) return cli::cmd_convolve(cfg, std::cout);
    if (*verify) return cli::cmd_verify(cfg, std::cout);
    if (*bench) return cli::cmd_bench(cfg, std::cout);
    if (*train) return cli::cmd_train_demo(cfg, std::cout);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kUsage;
  }
  return cli::kUsage;
}
