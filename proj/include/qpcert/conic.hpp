#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "qpcert/types.hpp"

namespace qpcert {

class LiftedProgram;  // relax.hpp

// ---------------------------------------------------------------------------
// Canonical conic program: free scalars plus PSD matrix variables, linear
// rows over all scalars, and a linear objective to MAXIMIZE. Matrix entries
// are addressed once by (cone, i, j) with i <= j. A ConicProgram is immutable
// after canonicalize; concurrent solves of distinct programs are safe.
// ---------------------------------------------------------------------------

struct ConicProgram {
  enum class Sense { Eq, Le, Ge };

  struct Row {
    std::vector<std::pair<int, double>> terms;  // (column, coefficient)
    double rhs = 0.0;
    Sense sense = Sense::Eq;
  };

  int n_free = 0;
  std::vector<int> cone_orders;
  std::vector<Row> rows;
  std::vector<std::pair<int, double>> objective;  // maximize
  double objective_constant = 0.0;

  // column layout: free scalars first, then each cone's packed upper triangle
  // (column-wise: (0,0), (0,1), (1,1), (0,2), ...)
  int cone_col_begin(int cone) const;
  int col_of_entry(int cone, int i, int j) const;  // requires i <= j
  int cols() const;
  bool valid_column(int c) const { return c >= 0 && c < cols(); }
};

// Mapping from LiftedProgram scalar columns to ConicProgram columns.
struct CanonMap {
  std::vector<int> col;
};

ConicProgram canonicalize(const LiftedProgram& lp, CanonMap* map = nullptr);

// ---------------------------------------------------------------------------
// Solving
// ---------------------------------------------------------------------------

struct SolveOptions {
  double tol = 1e-7;
  int max_iter = 200000;
  double time_limit_s = 55.0;
  std::string backend;  // empty: $QPCERT_SOLVER, then built-in default
  bool verbose = false;
};

struct SolveReport {
  enum class Status { Optimal, NearOptimal, Infeasible, Unbounded, Error };
  Status status = Status::Error;
  double objective = 0.0;  // valid for Optimal / NearOptimal only
  Vec primal;              // full column vector (free scalars + cone entries)
  double max_residual = 0.0;
  double wall_time_s = 0.0;
  long iterations = 0;
  std::string message;

  bool has_objective() const {
    return status == Status::Optimal || status == Status::NearOptimal;
  }
};

const char* status_name(SolveReport::Status s);

SolveReport solve(const ConicProgram& cp, const SolveOptions& opts = {});

// Residuals of a candidate solution, computed independently of any solver.
struct ResidualReport {
  double max_eq = 0.0;       // max |a'x - b| over equalities
  double max_ineq = 0.0;     // max positive part of violated inequalities
  double min_eigenvalue = 0.0;  // min over PSD cones, >= 0 when feasible
  double max_violation() const;
};

ResidualReport check_solution(const ConicProgram& cp, const Vec& x);

// ---------------------------------------------------------------------------
// Text format (documented in docs/sdp_text_format.md); import(export(cp))
// reproduces cp bit-exactly.
// ---------------------------------------------------------------------------

void export_text(const ConicProgram& cp, std::ostream& os);
std::string export_text(const ConicProgram& cp);
ConicProgram import_text(std::istream& is);
ConicProgram import_text(const std::string& text);

bool programs_equal(const ConicProgram& a, const ConicProgram& b);

}  // namespace qpcert
