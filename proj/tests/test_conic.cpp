#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <qpcert/conic.hpp>
#include <qpcert/relax.hpp>
#include <qpcert/rng.hpp>
#include <sstream>

using namespace qpcert;

namespace {

ConicProgram toy_lp() {
  // maximize x s.t. x <= 1
  ConicProgram cp;
  cp.n_free = 1;
  ConicProgram::Row row;
  row.sense = ConicProgram::Sense::Le;
  row.rhs = 1.0;
  row.terms = {{0, 1.0}};
  cp.rows.push_back(row);
  cp.objective = {{0, 1.0}};
  return cp;
}

ConicProgram random_program(Rng& rng) {
  ConicProgram cp;
  cp.n_free = 1 + static_cast<int>(rng.raw() % 4);
  const int ncones = static_cast<int>(rng.raw() % 3);
  for (int c = 0; c < ncones; ++c) cp.cone_orders.push_back(1 + static_cast<int>(rng.raw() % 3));
  const int total = cp.cols();
  const int nrows = static_cast<int>(rng.raw() % 6);
  for (int r = 0; r < nrows; ++r) {
    ConicProgram::Row row;
    const int sense = static_cast<int>(rng.raw() % 3);
    row.sense = sense == 0   ? ConicProgram::Sense::Eq
                : sense == 1 ? ConicProgram::Sense::Le
                             : ConicProgram::Sense::Ge;
    row.rhs = rng.normal();
    const int nnz = 1 + static_cast<int>(rng.raw() % 4);
    for (int t = 0; t < nnz; ++t) {
      row.terms.emplace_back(static_cast<int>(rng.raw() % total), rng.normal());
    }
    cp.rows.push_back(std::move(row));
  }
  const int onz = static_cast<int>(rng.raw() % 4);
  for (int t = 0; t < onz; ++t) {
    cp.objective.emplace_back(static_cast<int>(rng.raw() % total), rng.normal());
  }
  cp.objective_constant = rng.normal();
  return cp;
}

}  // namespace

TEST_CASE("toy LP solves to its bound") {
  SolveReport rep = solve(toy_lp());
  REQUIRE(rep.status == SolveReport::Status::Optimal);
  CHECK(rep.objective == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(rep.max_residual <= 1e-6);
}

TEST_CASE("infeasible toy is detected") {
  // x <= 0 and x >= 1
  ConicProgram cp;
  cp.n_free = 1;
  ConicProgram::Row r1, r2;
  r1.sense = ConicProgram::Sense::Le;
  r1.rhs = 0.0;
  r1.terms = {{0, 1.0}};
  r2.sense = ConicProgram::Sense::Ge;
  r2.rhs = 1.0;
  r2.terms = {{0, 1.0}};
  cp.rows = {r1, r2};
  cp.objective = {{0, 1.0}};
  SolveReport rep = solve(cp);
  CHECK(rep.status == SolveReport::Status::Infeasible);
}

TEST_CASE("unbounded toy is detected") {
  ConicProgram cp;
  cp.n_free = 1;
  ConicProgram::Row r;
  r.sense = ConicProgram::Sense::Ge;
  r.rhs = 0.0;
  r.terms = {{0, 1.0}};
  cp.rows = {r};
  cp.objective = {{0, 1.0}};  // maximize x with x >= 0
  SolveReport rep = solve(cp);
  CHECK(rep.status == SolveReport::Status::Unbounded);
}

TEST_CASE("empty program solves to zero") {
  ConicProgram cp;
  SolveReport rep = solve(cp);
  REQUIRE(rep.status == SolveReport::Status::Optimal);
  CHECK(rep.objective == 0.0);
}

TEST_CASE("psd cone forces nonnegative scalar") {
  // maximize -m over cone [[m]] >= 0: optimum 0
  ConicProgram cp;
  cp.cone_orders = {1};
  cp.objective = {{0, -1.0}};
  SolveReport rep = solve(cp);
  REQUIRE(rep.has_objective());
  CHECK(rep.objective == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("small sdp with rank-one pressure") {
  // cone [[a, b],[b, c]] PSD, a + c <= 2, maximize 2b: optimum 2 at a=c=b=1
  ConicProgram cp;
  cp.cone_orders = {2};
  const int a = cp.col_of_entry(0, 0, 0);
  const int b = cp.col_of_entry(0, 0, 1);
  const int c = cp.col_of_entry(0, 1, 1);
  ConicProgram::Row row;
  row.sense = ConicProgram::Sense::Le;
  row.rhs = 2.0;
  row.terms = {{a, 1.0}, {c, 1.0}};
  cp.rows.push_back(row);
  cp.objective = {{b, 2.0}};
  SolveReport rep = solve(cp);
  REQUIRE(rep.has_objective());
  CHECK(rep.objective == doctest::Approx(2.0).epsilon(1e-5));
}

TEST_CASE("check_solution reports violations as data") {
  ConicProgram cp;
  cp.n_free = 1;
  ConicProgram::Row r;
  r.sense = ConicProgram::Sense::Ge;
  r.rhs = 1.0;
  r.terms = {{0, 1.0}};
  cp.rows = {r};
  Vec x = Vec::Zero(1);
  ResidualReport rep = check_solution(cp, x);
  CHECK(rep.max_ineq == doctest::Approx(1.0));

  ConicProgram cone_only;
  cone_only.cone_orders = {2};
  Vec y(3);
  y << -1.0, 0.0, -1.0;  // the matrix -I
  ResidualReport rep2 = check_solution(cone_only, y);
  CHECK(rep2.min_eigenvalue == doctest::Approx(-1.0));
}

TEST_CASE("export/import round-trips bit-exactly on random programs") {
  Rng rng(12345);
  for (int trial = 0; trial < 100; ++trial) {
    ConicProgram cp = random_program(rng);
    const std::string text = export_text(cp);
    ConicProgram back = import_text(text);
    REQUIRE(programs_equal(cp, back));
    CHECK(export_text(back) == text);
  }
}

TEST_CASE("empty program round-trips") {
  ConicProgram cp;
  ConicProgram back = import_text(export_text(cp));
  CHECK(programs_equal(cp, back));
}

TEST_CASE("parse errors carry line numbers") {
  CHECK_THROWS_AS(import_text(std::string("not-a-header 9\n")), ParseError);
  const std::string bad =
      "qpcert-conic 1\nfree 1\ncones 0\nobjective 0 0\nrows 1\nrow X 0 0\nend\n";
  try {
    import_text(bad);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line == 6);
  }
}

TEST_CASE("golden file re-exports byte-identically") {
  std::ifstream is("data/golden_cone.sdp");
  REQUIRE(is.good());
  std::stringstream buf;
  buf << is.rdbuf();
  const std::string text = buf.str();
  ConicProgram cp = import_text(text);
  CHECK(export_text(cp) == text);
  SolveReport rep = solve(cp);
  REQUIRE(rep.has_objective());
  CHECK(rep.objective == doctest::Approx(2.0).epsilon(1e-5));
}

TEST_CASE("objective read-back matches reported objective") {
  ConicProgram cp = toy_lp();
  SolveReport rep = solve(cp);
  REQUIRE(rep.has_objective());
  double recomputed = cp.objective_constant;
  for (auto [col, coef] : cp.objective) recomputed += coef * rep.primal[col];
  CHECK(rep.objective == doctest::Approx(recomputed).epsilon(1e-9));
}

TEST_CASE("unknown backend raises a solver error") {
  CHECK_THROWS_AS(
      [] {
        SolveOptions opts;
        opts.backend = "no-such-backend";
        return solve(toy_lp(), opts);
      }(),
      SolverError);
}
