// Command-line front end: parameter solving, single runs, threshold sweeps
// against the classical baseline, invariant suites, and the concentrated-data
// residual scan. Outputs are CSV files plus a .meta sidecar carrying the
// config hash and seed; identical config + seed reproduce byte-identical CSV.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "tame/bench.hpp"

namespace {

using tame::ExperimentConfig;

struct CommonOpts {
  std::string config_path;
  std::string out_override;
  std::uint64_t seed = 0;
  bool have_seed = false;
};

ExperimentConfig make_config(const CommonOpts& opts) {
  ExperimentConfig cfg;
  if (!opts.config_path.empty()) cfg = tame::load_config(opts.config_path);
  if (opts.have_seed) cfg.seed = opts.seed;
  if (!opts.out_override.empty()) cfg.out = opts.out_override;
  cfg.validate();
  return cfg;
}

int emit(const ExperimentConfig& cfg, const std::string& suffix,
         const std::function<int(std::ostream&)>& writer) {
  std::ostringstream body;
  const int code = writer(body);
  if (cfg.out.empty() || cfg.out == "-") {
    std::cout << body.str();
  } else {
    const std::string csv_path = cfg.out + "." + suffix + ".csv";
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) {
      std::cerr << "cannot write " << csv_path << "\n";
      return 2;
    }
    csv << body.str();
    std::ofstream meta(cfg.out + "." + suffix + ".meta", std::ios::binary);
    tame::write_meta(meta, cfg);
    std::cout << csv_path << "\n";
  }
  return code;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Galerkin surjection benchmark harness"};
  app.require_subcommand(1);
  app.fallthrough(); // parent options may follow the subcommand

  CommonOpts opts;
  app.add_option("-c,--config", opts.config_path, "JSON config file");
  app.add_option("-o,--out", opts.out_override, "output path prefix ('-' for stdout)");
  auto* seed_opt = app.add_option("--seed", opts.seed, "override the config seed");

  // params
  auto* params = app.add_subcommand("params", "solve the exponent tuple and print the margin table");
  std::string variant;
  double flag_s1 = 0, flag_delta = 0, flag_gprime = 0, flag_eta = 0;
  params->add_option("--variant", variant, "full or galerkin");
  params->add_option("--s1", flag_s1, "target solution regularity");
  params->add_option("--delta", flag_delta, "target data regularity");
  params->add_option("--g-prime", flag_gprime, "target threshold exponent");
  params->add_option("--eta", flag_eta, "cutoff growth exponent");

  // run
  auto* run = app.add_subcommand("run", "Galerkin runs across the eps grid");
  std::string save_prefix;
  run->add_option("--save-solutions", save_prefix, "checkpoint final iterates to <prefix>-<i>.txt");

  // threshold
  app.add_subcommand("threshold", "bisect solvable thresholds for both schemes and fit exponents");

  // invariants
  auto* inv = app.add_subcommand("invariants", "run the module invariant suites");
  std::string filter;
  double a1_override = 0, a2_override = 0, a3_override = 0;
  inv->add_option("--filter", filter, "only suites whose name contains this substring");
  inv->add_option("--a1", a1_override, "declared growth constant (fault injection)");
  inv->add_option("--a2", a2_override, "declared approximation constant (fault injection)");
  inv->add_option("--a3", a3_override, "declared interpolation constant (fault injection)");

  // nls residual scan
  app.add_subcommand("nls-residual", "concentrated-data residual scaling scan");

  CLI11_PARSE(app, argc, argv);
  opts.have_seed = seed_opt->count() > 0;

  try {
    ExperimentConfig cfg = make_config(opts);

    if (params->parsed()) {
      if (!variant.empty()) {
        if (variant == "full")
          cfg.run.variant = tame::ParamVariant::full;
        else if (variant == "galerkin")
          cfg.run.variant = tame::ParamVariant::galerkin;
        else {
          std::cerr << "unknown variant: " << variant << "\n";
          return 2;
        }
      }
      if (flag_s1 > 0) cfg.targets.s1 = flag_s1;
      if (flag_delta > 0) cfg.targets.delta = flag_delta;
      if (flag_gprime > 0) cfg.targets.g_prime = flag_gprime;
      if (flag_eta > 0) cfg.run.eta = flag_eta;
      return emit(cfg, "params",
                  [&](std::ostream& os) { return tame::cmd_params(cfg, os, std::cerr); });
    }
    if (run->parsed()) {
      return emit(cfg, "run", [&](std::ostream& os) { return tame::cmd_run(cfg, os, std::cerr, save_prefix); });
    }
    if (app.got_subcommand("threshold")) {
      return emit(cfg, "threshold",
                  [&](std::ostream& os) { return tame::cmd_threshold(cfg, os, std::cerr); });
    }
    if (inv->parsed()) {
      tame::InvariantOverrides ov;
      ov.a1 = static_cast<tame::Real>(a1_override);
      ov.a2 = static_cast<tame::Real>(a2_override);
      ov.a3 = static_cast<tame::Real>(a3_override);
      return emit(cfg, "invariants", [&](std::ostream& os) {
        return tame::cmd_invariants(cfg, filter, ov, os, std::cerr);
      });
    }
    if (app.got_subcommand("nls-residual")) {
      return emit(cfg, "nls-residual",
                  [&](std::ostream& os) { return tame::cmd_nls_residual(cfg, os, std::cerr); });
    }
  } catch (const tame::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const tame::InfeasibleTargets& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
