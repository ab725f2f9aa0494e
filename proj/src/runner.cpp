#include "qpcert/runner.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qpcert/bounds.hpp"
#include "qpcert/sample.hpp"

namespace qpcert {

KRow run_single(const ExperimentConfig& cfg, int K) {
  KRow row;
  row.K = K;

  const VerificationProblem vp = build_vp(cfg, K);
  ValidationReport vr = validate(vp);
  if (!vr.ok()) {
    throw ConfigError("built problem fails validation: " + vr.violations.front().message);
  }

  LiftedProgram lp;
  if (family_is_unconstrained(cfg)) {
    lp = build_unconstrained_lp(cfg, K);
  } else {
    const BoundsTable table = propagate_all(vp);
    lp = assemble(vp, table, cfg.relax);
  }
  const ConicProgram cp = canonicalize(lp);

  SolveOptions opts;
  opts.tol = cfg.solver_tol;
  opts.max_iter = cfg.solver_max_iter;
  opts.time_limit_s = cfg.solver_time_limit_s;
  opts.backend = cfg.solver_backend;
  const SolveReport rep = solve(cp, opts);
  row.status = rep.status;
  row.solve_time_s = rep.wall_time_s;
  row.vpsdp = rep.has_objective() ? rep.objective : 0.0;

  const SampleReport sm = sample_max(vp, cfg.sample_n, cfg.seed);
  row.sm = vp.K >= 1 ? sm.max_residual.back() : 0.0;
  return row;
}

std::string results_csv(const std::vector<KRow>& rows) {
  std::ostringstream os;
  os << "K,vpsdp,sm,vpsdp_solve_time_s,status\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.3f,%s\n", r.K, r.vpsdp, r.sm,
                  r.solve_time_s, status_name(r.status));
    os << buf;
  }
  return os.str();
}

RunOutcome run(const ExperimentConfig& cfg) {
  RunOutcome out;
  std::filesystem::create_directories(cfg.out_dir);

  std::ostringstream bounds_csv;
  bounds_csv << "K,var,coord,lower,upper\n";

  for (int K = cfg.k_min; K <= cfg.k_max; ++K) {
    try {
      out.rows.push_back(run_single(cfg, K));
    } catch (const SolverError& e) {
      out.exit_code = 3;
      out.message = e.what();
      break;
    }
    if (out.rows.back().status == SolveReport::Status::Error) {
      out.exit_code = 3;
      out.message = "solver did not reach the requested accuracy at K=" + std::to_string(K);
    }

    // audit bounds for this K
    if (!family_is_unconstrained(cfg)) {
      const VerificationProblem vp = build_vp(cfg, K);
      const BoundsTable table = propagate_all(vp);
      std::ostringstream one;
      write_bounds_csv(one, vp.graph, table);
      std::istringstream lines(one.str());
      std::string line;
      std::getline(lines, line);  // skip the header
      while (std::getline(lines, line)) bounds_csv << K << "," << line << "\n";
    }
  }

  {
    std::ofstream f(cfg.out_dir + "/results.csv");
    f << results_csv(out.rows);
  }
  {
    std::ofstream f(cfg.out_dir + "/bounds.csv");
    f << bounds_csv.str();
  }
  return out;
}

}  // namespace qpcert
