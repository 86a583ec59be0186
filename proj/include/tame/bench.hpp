#pragma once

// Benchmark orchestration: configuration, CSV emission, threshold sweeps
// against the classical baseline, and the invariant suites. All outputs are
// deterministic for a fixed config + seed and every row carries the config
// hash.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tame/galerkin_iteration.hpp"
#include "tame/param_solver.hpp"
#include "tame/problems.hpp"

namespace tame {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct P1Config {
  double g = 1.0;
  double mu = 1.0;
  double ell = 1.0;
  double s0 = 1.0;
  int max_mode = 16;
};

struct P2Config {
  int d = 2;
  int p = 2;
  double kappa = 1.5;
  double time_horizon = 1.0;
  int nodes = 8;
  int max_mode = 16;
  int species = 2;
  double amplitude = 1.0;
  double profile_width = 2.0;
  double s = 4.5; // norm index for the residual scan (s1 - 1)
  std::string node_kind = "uniform";
};

struct TargetProfileConfig {
  double amplitude = 1.0; // the c of the amplitude rule c * eps^gamma_v
  double gamma = 0.0;     // gamma_v; 0 = use g'
  int max_mode = 3;
  double decay = 0.65;
};

struct RunConfig {
  Real tol_final = 1e-8L;
  int n_max = 8;
  double K = 0; // 0 = adapt
  Real r = 0;   // 0 = calibrate
  Real inner_tol = 1e-10L;
  int inner_budget = 3000;
  ParamVariant variant = ParamVariant::full;
  double eta = 0;          // 0 = canonical
  double sigma_margin = 0; // extra sigma beyond the solver's minimum
};

struct ThresholdConfig {
  int bisection_steps = 12;
  int newton_budget = 500;
};

struct ExperimentConfig {
  std::string problem = "p1";
  P1Config p1;
  P2Config p2;
  UserTargets targets{2.0, 3.5, 1.25};
  std::vector<double> eps_grid{0.5, 0.25, 0.125};
  TargetProfileConfig v;
  RunConfig run;
  ThresholdConfig threshold;
  std::uint64_t seed = 1;
  std::string out = "out/run";

  void validate() const;
  std::uint64_t hash() const;
  static ExperimentConfig from_json_text(const std::string& text);
  std::string to_json_text() const;
};

ExperimentConfig load_config(const std::string& path);

// RFC-4180 quoting: fields holding separators, quotes or newlines are quoted
// and inner quotes doubled.
std::string csv_escape(const std::string& field);
void csv_row(std::ostream& os, const std::vector<std::string>& fields);
std::string format_real(Real x);

/// Sidecar with config hash, seed and toolchain versions; deterministic.
void write_meta(std::ostream& os, const ExperimentConfig& cfg);

/// Band-limited conjugate-symmetric target with exactly the requested
/// data-norm amplitude.
ScaleFunction target_profile(const FrequencyGrid& grid, double delta,
                             const TargetProfileConfig& cfg, Real amplitude);

/// Signature/targets/exponents resolved from a config, plus the derived
/// iteration parameters (without K/r adaptation).
struct ResolvedSetup {
  SmallDivisorProblem problem;
  TameSignature sig;
  UserTargets tgt;
  FeasibleParams params;
  IterationParams ip;
};
ResolvedSetup resolve_p1_setup(const ExperimentConfig& cfg);

struct ThresholdPoint {
  double eps = 0;
  Real critical = 0; // largest converging amplitude
  bool usable = false;
  bool bracket_verified = false;
};

struct ThresholdResult {
  std::string scheme; // "galerkin" or "newton"
  std::vector<ThresholdPoint> points;
  double exponent = 0; // slope of log critical vs log eps
  double ci95 = 0;
};

/// Bisect the largest converging amplitude per eps for one scheme. Grid
/// points are dispatched to a worker pool (TAMEBENCH_WORKERS overrides the
/// size); results are aggregated in eps order, so the output is
/// scheduling-independent.
ThresholdResult threshold_sweep(const ExperimentConfig& cfg, const std::string& scheme);

/// Newton/Picard baseline run at one amplitude: the frozen approximate
/// inverse marches u <- u - L(u)(F(u) - v) on the full grid.
bool newton_converges(const ResolvedSetup& setup, double eps, Real amplitude,
                      const ExperimentConfig& cfg);

struct SuiteResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct InvariantOverrides {
  Real a1 = 0; // 0 = declared value
  Real a2 = 0;
  Real a3 = 0;
};

/// Module invariant suites; the overrides support fault injection.
std::vector<SuiteResult> run_invariant_suites(const ExperimentConfig& cfg,
                                              const std::string& filter,
                                              const InvariantOverrides& ov = {});

// Subcommand drivers; write CSV to `os` and diagnostics to `err`, return the
// process exit code (0 success or reported failure, 1 invariant failure,
// 2 usage/config error).
int cmd_params(const ExperimentConfig& cfg, std::ostream& os, std::ostream& err);
int cmd_run(const ExperimentConfig& cfg, std::ostream& os, std::ostream& err,
            const std::string& save_prefix = "");
int cmd_threshold(const ExperimentConfig& cfg, std::ostream& os, std::ostream& err);
int cmd_invariants(const ExperimentConfig& cfg, const std::string& filter,
                   const InvariantOverrides& ov, std::ostream& os, std::ostream& err);
int cmd_nls_residual(const ExperimentConfig& cfg, std::ostream& os, std::ostream& err);

} // namespace tame
