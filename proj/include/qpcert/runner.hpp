#pragma once

#include <string>
#include <vector>

#include "qpcert/config.hpp"
#include "qpcert/conic.hpp"

namespace qpcert {

struct KRow {
  int K = 0;
  double vpsdp = 0.0;
  double sm = 0.0;
  double solve_time_s = 0.0;
  SolveReport::Status status = SolveReport::Status::Error;
};

struct RunOutcome {
  int exit_code = 0;  // 0 ok, 2 config error, 3 solver error
  std::vector<KRow> rows;
  std::string message;
};

// Runs the full pipeline for every K in the configured range and writes
// results.csv and bounds.csv under cfg.out_dir.
RunOutcome run(const ExperimentConfig& cfg);

// Solves a single K without touching the filesystem.
KRow run_single(const ExperimentConfig& cfg, int K);

std::string results_csv(const std::vector<KRow>& rows);

}  // namespace qpcert
