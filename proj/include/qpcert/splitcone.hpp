#pragma once

#include <vector>

#include "qpcert/conic.hpp"

namespace qpcert {

// Built-in conic backend: operator splitting on the homogeneous self-dual
// embedding (ADMM over {free} x {zero, nonnegative, PSD} cones), with Ruiz
// equilibration and over-relaxation. Registered under the name "splitcone".
SolveReport splitcone_solve(const ConicProgram& cp, const SolveOptions& opts);

// exactness-preserving reduction: pinned columns and two-term equality ties
// are eliminated; x_original = scale * x_reduced[col] + offset
struct SplitconeColMap {
  int col = -1;
  double scale = 0.0;
  double offset = 0.0;
};
struct SplitconePresolved {
  bool infeasible = false;
  int n_reduced = 0;
  std::vector<SplitconeColMap> map;
  std::vector<ConicProgram::Row> eq, ineq;
  double obj_shift = 0.0;
  Vec c_reduced;
};
SplitconePresolved splitcone_presolve(const ConicProgram& cp);

}  // namespace qpcert
