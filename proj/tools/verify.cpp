#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "qpcert/bounds.hpp"
#include "qpcert/conic.hpp"
#include "qpcert/fixtures.hpp"
#include "qpcert/runner.hpp"

using namespace qpcert;

int main(int argc, char** argv) {
  CLI::App app{"worst-case fixed-point residual bounds for first-order QP methods"};
  app.require_subcommand(1);

  // run
  auto* run_cmd = app.add_subcommand("run", "run an experiment config across its K range");
  std::string run_config;
  std::string run_out;
  std::string run_solver;
  bool no_rlt = false, no_triangle = false;
  std::uint64_t run_seed = 0;
  bool seed_set = false;
  run_cmd->add_option("config", run_config, "experiment config (JSON)")->required();
  run_cmd->add_option("--out", run_out, "output directory override");
  run_cmd->add_option("--solver", run_solver, "solver backend name");
  run_cmd->add_flag("--no-rlt", no_rlt, "disable RLT tightening");
  run_cmd->add_flag("--no-triangle", no_triangle, "disable the triangle relaxation");
  run_cmd->add_option("--seed", run_seed, "sampler seed override")->each([&](const std::string&) {
    seed_set = true;
  });

  // fixture
  auto* fix_cmd = app.add_subcommand("fixture", "print a committed desk-scale config");
  std::string fix_name;
  std::string fix_out;
  fix_cmd->add_option("name", fix_name, "fixture name")->required();
  fix_cmd->add_option("--out", fix_out, "write the config to a file instead of stdout");

  // export-sdp
  auto* exp_cmd = app.add_subcommand("export-sdp", "emit the canonical conic program text");
  std::string exp_config;
  std::string exp_out;
  int exp_k = 1;
  exp_cmd->add_option("config", exp_config, "experiment config (JSON)")->required();
  exp_cmd->add_option("--k", exp_k, "iteration count")->required();
  exp_cmd->add_option("--out", exp_out, "write to a file instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      ExperimentConfig cfg = load_config(run_config);
      if (!run_out.empty()) cfg.out_dir = run_out;
      if (!run_solver.empty()) cfg.solver_backend = run_solver;
      if (no_rlt) cfg.relax.rlt = false;
      if (no_triangle) cfg.relax.triangle = false;
      if (seed_set) cfg.seed = run_seed;
      RunOutcome out = run(cfg);
      std::cout << results_csv(out.rows);
      if (out.exit_code != 0) std::cerr << "error: " << out.message << "\n";
      return out.exit_code;
    }
    if (*fix_cmd) {
      const ExperimentConfig cfg = fixture(fix_name);
      const std::string text = config_to_json(cfg).dump(2) + "\n";
      if (fix_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream f(fix_out);
        f << text;
      }
      return 0;
    }
    if (*exp_cmd) {
      ExperimentConfig cfg = load_config(exp_config);
      if (exp_k < cfg.k_min || exp_k > cfg.k_max) {
        // exporting outside the configured range is still useful; just build it
      }
      LiftedProgram lp;
      if (family_is_unconstrained(cfg)) {
        lp = build_unconstrained_lp(cfg, exp_k);
      } else {
        const VerificationProblem vp = build_vp(cfg, exp_k);
        const BoundsTable table = propagate_all(vp);
        lp = assemble(vp, table, cfg.relax);
      }
      const ConicProgram cp = canonicalize(lp);
      if (exp_out.empty()) {
        export_text(cp, std::cout);
      } else {
        std::ofstream f(exp_out);
        export_text(cp, f);
      }
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const UnknownFixture& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
