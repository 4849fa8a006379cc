#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "qvest/errors.hpp"
#include "qvest/harness.hpp"

namespace h = qvest::harness;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

void print_metrics(const h::ExperimentResult& r) {
  for (const auto& [k, v] : r.metrics) std::printf("%s = %.12g\n", k.c_str(), v);
  for (const auto& f : r.files) std::printf("wrote %s\n", f.string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quadratic-variation estimation for Gaussian random fields"};
  app.set_version_flag("--version", std::string(h::version()));
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string scale;

  auto* sim = app.add_subcommand("simulate", "Draw one field and write it to a field file");
  sim->add_option("--config", config, "Simulation config (JSON)")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", out, "Field file; .csv selects the CSV format")->required();
  auto* sim_seed = sim->add_option("--seed", seed, "Master seed");

  auto* est = app.add_subcommand("estimate", "Estimate parameters from a field file");
  est->add_option("--config", config, "Estimation config (JSON)")->required()->check(CLI::ExistingFile);
  est->add_option("--out", out, "Report file (JSON)");
  est->add_option("--workers", workers, "Threads for the quadratic variations")->check(CLI::PositiveNumber);

  auto* cst = app.add_subcommand("constants", "Tabulate A, B, C, D and the (p, q) selection");
  cst->add_option("--config", config, "Constants config (JSON); built-in list if absent")->check(CLI::ExistingFile);
  cst->add_option("--out", out, "Output directory");

  auto* exp = app.add_subcommand("experiment", "Run a Monte Carlo or deterministic study");
  exp->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  exp->add_option("--out", out, "Output directory");
  auto* exp_seed = exp->add_option("--seed", seed, "Master seed");
  auto* exp_workers = exp->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  exp->add_option("--scale", scale, "Preset scale")->check(CLI::IsMember({"desk", "full"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (sim->parsed()) {
      std::optional<std::uint64_t> s;
      if (*sim_seed) s = seed;
      const auto o = h::run_simulate(config, out, s);
      std::cout << o.diagnostics_json << "\n";
    } else if (est->parsed()) {
      std::cout << h::run_estimate(config, out, workers) << "\n";
    } else if (cst->parsed()) {
      h::Overrides ov;
      if (!out.empty()) ov.output_dir = out;
      h::ExperimentConfig cfg;
      if (config.empty()) {
        cfg = h::preset(h::ExperimentKind::kConstants, h::Scale::kDesk);
        if (ov.output_dir) cfg.output_dir = *ov.output_dir;
      } else {
        cfg = h::load_experiment_config(config, ov);
        if (cfg.kind != h::ExperimentKind::kConstants) throw qvest::ConfigError("config is not a constants config");
      }
      const auto r = h::print_constants(cfg);
      for (const auto& f : r.files) {
        if (f.extension() != ".csv") continue;
        std::ifstream in(f);
        std::cout << in.rdbuf();
      }
    } else if (exp->parsed()) {
      h::Overrides ov;
      if (*exp_seed) ov.seed = seed;
      if (*exp_workers) ov.workers = workers;
      if (!scale.empty()) ov.scale = scale == "full" ? h::Scale::kFull : h::Scale::kDesk;
      if (!out.empty()) ov.output_dir = out;
      const auto cfg = h::load_experiment_config(config, ov);
      print_metrics(h::run_experiment(cfg));
    }
  } catch (const qvest::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const qvest::DomainError& e) {
    std::cerr << "invalid parameters: " << e.what() << "\n";
    return kExitConfig;
  } catch (const qvest::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
