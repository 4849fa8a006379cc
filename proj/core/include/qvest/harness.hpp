#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qvest/increments.hpp"

namespace qvest::harness {

const char* version();

enum class ExperimentKind { kTable1, kFig3, kVarianceDecay, kHighdAlpha, kPowexp, kConstants };
enum class Scale { kDesk, kFull };

const char* to_string(ExperimentKind kind);
const char* to_string(Scale scale);

struct Table1Params {
  double sigma = 1.5;
  double alpha = 0.8;
  double nu = 1.75;
  Eigen::MatrixXd M;
  std::int64_t n = 55;
  // Sites per axis on which every increment is observed.
  std::int64_t points = 56;
  std::vector<int> orders{2, 3, 4};
  // Replace sampled fields by exact expected quadratic variations.
  bool exact = false;
};

struct Fig3Params {
  double c1 = 100.0;
  double c2 = 36.0;
  double delta1 = 0.2;
  double delta2 = 0.4;
  // Constant and quadratic coefficients of the two unit fields.
  std::vector<double> poly1{0.9, 0.1};
  std::vector<double> poly2{0.8, 0.2};
  int p = 2;
  int q = 3;
  std::int64_t points = 256;
  LatticeVector direction{1, 0};
  double padding_factor = 2.0;
  double max_clipped_fraction = 1e-4;
  int bins = 40;
};

struct VarianceDecayParams {
  double nu = 0.5;
  double sigma = 1.0;
  double alpha = 1.0;
  std::vector<int> orders{1, 2, 3};
  std::vector<std::int64_t> n_values{128, 256, 512, 1024, 2048, 4096};
};

struct HighdParams {
  int d = 5;
  double nu = 0.5;
  double sigma = 1.0;
  double alpha = 1.0;
  std::vector<std::int64_t> n_values{6, 8, 10, 12};
  std::optional<IndexPair> pq;
  // First-stage increment order; p when absent.
  std::optional<int> m;
};

struct PowexpParams {
  double sigma = 2.0;
  double alpha = 1.5;
  double delta = 0.5;
  int d = 1;
  int p = 1;
  std::vector<std::int64_t> n_values{256, 1024};
  bool separate = false;
  std::optional<int> q;
  // Monte Carlo study on sampled fields in addition to the exact ladder.
  bool simulate = false;
  int sim_d = 2;
  std::int64_t sim_n = 64;
  std::int64_t sim_points = 64;
};

struct ConstantsParams {
  struct AB {
    double nu;
    int m;
  };
  struct CD {
    int p;
    double delta;
    double h_norm = 1.0;
  };
  struct PQ {
    double nu;
    int d;
  };
  std::vector<AB> ab;
  std::vector<CD> cd;
  std::vector<PQ> pq;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kConstants;
  Scale scale = Scale::kDesk;
  std::uint64_t seed = 20240601;
  int replicates = 0;
  int workers = 1;
  std::filesystem::path output_dir = ".";
  double max_failure_fraction = 0.01;

  Table1Params table1;
  Fig3Params fig3;
  VarianceDecayParams variance_decay;
  HighdParams highd;
  PowexpParams powexp;
  ConstantsParams constants;

  // Throws ConfigError unless every referenced parameter is usable.
  void validate() const;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<Scale> scale;
  std::optional<std::filesystem::path> output_dir;
};

// Scale presets fill every field the file leaves unset; overrides win over
// both. Unknown keys are rejected.
ExperimentConfig parse_experiment_config(const std::string& json_text, const Overrides& overrides = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path, const Overrides& overrides = {});
ExperimentConfig preset(ExperimentKind kind, Scale scale);

// The resolved config as JSON. Execution-only settings (workers, output
// directory) are left out so outputs do not depend on them.
std::string resolved_config_json(const ExperimentConfig& cfg);

struct ExperimentResult {
  // Flat metric map, e.g. "m3.sigma2_alpha2nu.rmse".
  std::map<std::string, double> metrics;
  std::vector<std::filesystem::path> files;
  std::size_t failures = 0;
};

// Runs the experiment and writes its CSV tables and summary JSON into
// cfg.output_dir.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

ExperimentResult run_table1(const ExperimentConfig& cfg);
ExperimentResult run_fig3(const ExperimentConfig& cfg);
ExperimentResult run_variance_decay(const ExperimentConfig& cfg);
ExperimentResult run_highd_alpha(const ExperimentConfig& cfg);
ExperimentResult run_powexp(const ExperimentConfig& cfg);
ExperimentResult print_constants(const ExperimentConfig& cfg);

// simulate / estimate subcommands. Both read one JSON config; see
// docs/config_schema.md.
struct SimulateOutcome {
  std::filesystem::path field_path;
  std::string diagnostics_json;
};
SimulateOutcome run_simulate(const std::filesystem::path& config, const std::filesystem::path& out,
                             std::optional<std::uint64_t> seed);
// Returns the report JSON; also written to out when it is nonempty.
std::string run_estimate(const std::filesystem::path& config, const std::filesystem::path& out, int workers);

}  // namespace qvest::harness
