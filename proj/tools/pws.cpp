// pws: build operators, compute spectra, splines and reconstructions, scan
// sampling densities and run the inequality suites from JSON configs.
//
// Exit codes: 0 success, 1 verdict or check failure, 2 usage or config error.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "pwsampling/pwsampling.hpp"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Options {
  std::string config;
  std::string out;
  std::string operator_file;
  int jobs = 1;
  std::optional<std::uint64_t> seed_override;
  bool expect_converged = false;
  std::string mode;
  long long r = 0;
};

pws::ExperimentConfig load(const Options& o, bool config_required = true) {
  pws::ExperimentConfig c;
  if (!o.config.empty()) {
    c = pws::load_config(o.config);
  } else if (config_required) {
    throw pws::ParseError("--config is required for this command");
  }
  if (o.seed_override) c.seed = *o.seed_override;
  if (!o.out.empty()) c.output = o.out;
  return c;
}

int run(const std::string& verb, const Options& o) {
  pws::RunOutput out;
  pws::ExperimentConfig c;
  if (verb == "spectrum") {
    c = load(o, o.operator_file.empty());
    if (!o.mode.empty()) {
      if (o.mode == "full") c.spectrum_mode = pws::DecomposeMode::full;
      else if (o.mode == "lowest") c.spectrum_mode = pws::DecomposeMode::lowest;
      else throw pws::ParseError("--mode must be 'full' or 'lowest'");
    }
    if (o.r > 0) c.spectrum_r = o.r;
    if (!o.operator_file.empty()) {
      c.op.file = o.operator_file;
      c.op.backend = pws::Backend::generic;
    }
    const auto b = pws::build_operator(c);
    out = pws::cmd_spectrum(c, b.op);
  } else {
    c = load(o);
    if (verb == "build") out = pws::cmd_build(c);
    else if (verb == "project") out = pws::cmd_project(c);
    else if (verb == "spline") out = pws::cmd_spline(c);
    else if (verb == "reconstruct") out = pws::cmd_reconstruct(c, o.expect_converged);
    else if (verb == "scan") out = pws::cmd_scan(c, o.jobs);
    else if (verb == "verify") out = pws::cmd_verify(c);
    else throw pws::ParseError("unknown command '" + verb + "'");
  }
  const auto files = pws::commit_outputs(c.output, verb, pws::resolved_config(c), out);
  for (const auto& m : out.messages) std::cout << m << "\n";
  for (const auto& f : files) std::cout << "wrote " << c.output << "/" << f << "\n";
  return out.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Paley-Wiener sampling and variational splines on graphs and Heisenberg grids"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the verb
  Options o;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed-override", seed, "Replace the configuration seed");
  app.add_option("--config", o.config, "Experiment configuration (JSON)");
  app.add_option("--out", o.out, "Output directory (overrides the config)");
  app.add_option("--jobs", o.jobs, "Worker threads for scans")->check(CLI::PositiveNumber);
  app.add_flag("--expect-converged", o.expect_converged, "Exit 1 unless reconstruction converges");
  app.set_version_flag("--version", pws::kToolVersion);

  app.add_subcommand("build", "Assemble the operator and write operator.mtx and grid.json");
  auto* spectrum = app.add_subcommand("spectrum", "Eigenvalues and residuals as spectrum.csv");
  spectrum->add_option("--operator", o.operator_file, "Matrix Market operator file");
  spectrum->add_option("--mode", o.mode, "full or lowest");
  spectrum->add_option("--r", o.r, "Number of eigenpairs in lowest mode");
  app.add_subcommand("project", "Project a seeded random vector onto PW_omega");
  app.add_subcommand("spline", "Variational spline through the sampled target");
  app.add_subcommand("reconstruct", "Spline reconstruction along the order schedule");
  app.add_subcommand("scan", "Sampling-density scan over the configured levels");
  app.add_subcommand("verify", "Inequality and consistency suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  if (seed_opt->count()) o.seed_override = seed;
  const std::string verb = app.get_subcommands().front()->get_name();

  try {
    return run(verb, o);
  } catch (const pws::SymmetryError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const pws::NonUniquenessError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const pws::SolverError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const pws::PreconditionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const pws::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
