#include "qpcert/conic.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include "qpcert/splitcone.hpp"

namespace qpcert {

// ---------------------------------------------------------------------------
// layout
// ---------------------------------------------------------------------------

namespace {
inline int svec_size(int n) { return n * (n + 1) / 2; }
// column-wise upper triangle: (0,0), (0,1), (1,1), (0,2), ...
inline int svec_index(int i, int j) { return j * (j + 1) / 2 + i; }
}  // namespace

int ConicProgram::cone_col_begin(int cone) const {
  int at = n_free;
  for (int c = 0; c < cone; ++c) at += svec_size(cone_orders[static_cast<std::size_t>(c)]);
  return at;
}

int ConicProgram::col_of_entry(int cone, int i, int j) const {
  return cone_col_begin(cone) + svec_index(i, j);
}

int ConicProgram::cols() const {
  int at = n_free;
  for (int order : cone_orders) at += svec_size(order);
  return at;
}

// ---------------------------------------------------------------------------
// solution checking
// ---------------------------------------------------------------------------

double ResidualReport::max_violation() const {
  return std::max({max_eq, max_ineq, std::max(0.0, -min_eigenvalue)});
}

ResidualReport check_solution(const ConicProgram& cp, const Vec& x) {
  if (x.size() != cp.cols()) throw DimensionMismatch("check_solution: solution size");
  ResidualReport rep;
  for (const auto& row : cp.rows) {
    double v = -row.rhs;
    for (const auto& [col, coef] : row.terms) v += coef * x[col];
    switch (row.sense) {
      case ConicProgram::Sense::Eq: rep.max_eq = std::max(rep.max_eq, std::abs(v)); break;
      case ConicProgram::Sense::Le: rep.max_ineq = std::max(rep.max_ineq, v); break;
      case ConicProgram::Sense::Ge: rep.max_ineq = std::max(rep.max_ineq, -v); break;
    }
  }
  rep.min_eigenvalue = cp.cone_orders.empty() ? 0.0 : kInf;
  for (std::size_t c = 0; c < cp.cone_orders.size(); ++c) {
    const int n = cp.cone_orders[c];
    Mat M(n, n);
    const int base = cp.cone_col_begin(static_cast<int>(c));
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i <= j; ++i) {
        const double v = x[base + svec_index(i, j)];
        M(i, j) = v;
        M(j, i) = v;
      }
    }
    if (n > 0) {
      Eigen::SelfAdjointEigenSolver<Mat> eig(M, Eigen::EigenvaluesOnly);
      rep.min_eigenvalue = std::min(rep.min_eigenvalue, eig.eigenvalues().minCoeff());
    }
  }
  if (!std::isfinite(rep.min_eigenvalue)) rep.min_eigenvalue = 0.0;
  return rep;
}

// ---------------------------------------------------------------------------
// solve dispatch
// ---------------------------------------------------------------------------

const char* status_name(SolveReport::Status s) {
  switch (s) {
    case SolveReport::Status::Optimal: return "optimal";
    case SolveReport::Status::NearOptimal: return "near-optimal";
    case SolveReport::Status::Infeasible: return "infeasible";
    case SolveReport::Status::Unbounded: return "unbounded";
    case SolveReport::Status::Error: return "solver-error";
  }
  return "?";
}

SolveReport solve(const ConicProgram& cp, const SolveOptions& opts) {
  std::string backend = opts.backend;
  if (backend.empty()) {
    if (const char* env = std::getenv("QPCERT_SOLVER")) backend = env;
  }
  if (backend.empty()) backend = "splitcone";
  if (backend == "splitcone") return splitcone_solve(cp, opts);
  throw SolverError("unknown solver backend '" + backend + "'");
}

// ---------------------------------------------------------------------------
// text format
// ---------------------------------------------------------------------------

namespace {

void put_double(std::ostream& os, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  os << buf;
}

char sense_char(ConicProgram::Sense s) {
  switch (s) {
    case ConicProgram::Sense::Eq: return 'E';
    case ConicProgram::Sense::Le: return 'L';
    case ConicProgram::Sense::Ge: return 'G';
  }
  return '?';
}

}  // namespace

void export_text(const ConicProgram& cp, std::ostream& os) {
  os << "qpcert-conic 1\n";
  os << "free " << cp.n_free << "\n";
  os << "cones " << cp.cone_orders.size() << "\n";
  for (int order : cp.cone_orders) os << "cone " << order << "\n";
  os << "objective " << cp.objective.size() << " ";
  put_double(os, cp.objective_constant);
  os << "\n";
  for (const auto& [col, coef] : cp.objective) {
    os << "t " << col << " ";
    put_double(os, coef);
    os << "\n";
  }
  os << "rows " << cp.rows.size() << "\n";
  for (const auto& row : cp.rows) {
    os << "row " << sense_char(row.sense) << " ";
    put_double(os, row.rhs);
    os << " " << row.terms.size();
    for (const auto& [col, coef] : row.terms) {
      os << " " << col << " ";
      put_double(os, coef);
    }
    os << "\n";
  }
  os << "end\n";
}

std::string export_text(const ConicProgram& cp) {
  std::ostringstream os;
  export_text(cp, os);
  return os.str();
}

namespace {

struct LineReader {
  std::istream& is;
  long lineno = 0;
  std::string line;
  bool next() {
    while (std::getline(is, line)) {
      ++lineno;
      if (!line.empty()) return true;
    }
    return false;
  }
};

}  // namespace

ConicProgram import_text(std::istream& is) {
  LineReader rd{is};
  auto need = [&](const char* what) {
    if (!rd.next()) throw ParseError(std::string("unexpected end of input, wanted ") + what,
                                     rd.lineno);
  };
  auto fail = [&](const std::string& msg) -> void { throw ParseError(msg, rd.lineno); };

  ConicProgram cp;
  need("header");
  {
    std::istringstream ss(rd.line);
    std::string magic;
    int ver = 0;
    ss >> magic >> ver;
    if (magic != "qpcert-conic" || ver != 1) fail("bad header");
  }
  need("free");
  {
    std::istringstream ss(rd.line);
    std::string kw;
    ss >> kw >> cp.n_free;
    if (kw != "free" || ss.fail() || cp.n_free < 0) fail("bad free count");
  }
  need("cones");
  long ncones = 0;
  {
    std::istringstream ss(rd.line);
    std::string kw;
    ss >> kw >> ncones;
    if (kw != "cones" || ss.fail() || ncones < 0) fail("bad cone count");
  }
  for (long c = 0; c < ncones; ++c) {
    need("cone");
    std::istringstream ss(rd.line);
    std::string kw;
    int order = 0;
    ss >> kw >> order;
    if (kw != "cone" || ss.fail() || order < 0) fail("bad cone order");
    cp.cone_orders.push_back(order);
  }
  const int total_cols = cp.cols();
  need("objective");
  long obj_nnz = 0;
  {
    std::istringstream ss(rd.line);
    std::string kw;
    ss >> kw >> obj_nnz >> cp.objective_constant;
    if (kw != "objective" || ss.fail() || obj_nnz < 0) fail("bad objective line");
  }
  for (long t = 0; t < obj_nnz; ++t) {
    need("objective term");
    std::istringstream ss(rd.line);
    std::string kw;
    int col = 0;
    double coef = 0;
    ss >> kw >> col >> coef;
    if (kw != "t" || ss.fail()) fail("bad objective term");
    if (col < 0 || col >= total_cols) fail("objective term references unknown column");
    cp.objective.emplace_back(col, coef);
  }
  need("rows");
  long nrows = 0;
  {
    std::istringstream ss(rd.line);
    std::string kw;
    ss >> kw >> nrows;
    if (kw != "rows" || ss.fail() || nrows < 0) fail("bad row count");
  }
  for (long r = 0; r < nrows; ++r) {
    need("row");
    std::istringstream ss(rd.line);
    std::string kw;
    char sc = 0;
    double rhs = 0;
    long nnz = 0;
    ss >> kw >> sc >> rhs >> nnz;
    if (kw != "row" || ss.fail() || nnz < 0) fail("bad row line");
    ConicProgram::Row row;
    row.rhs = rhs;
    switch (sc) {
      case 'E': row.sense = ConicProgram::Sense::Eq; break;
      case 'L': row.sense = ConicProgram::Sense::Le; break;
      case 'G': row.sense = ConicProgram::Sense::Ge; break;
      default: fail("bad row sense");
    }
    for (long t = 0; t < nnz; ++t) {
      int col = 0;
      double coef = 0;
      ss >> col >> coef;
      if (ss.fail()) fail("bad row term");
      if (col < 0 || col >= total_cols) fail("row term references unknown column");
      row.terms.emplace_back(col, coef);
    }
    cp.rows.push_back(std::move(row));
  }
  need("end");
  if (rd.line != "end") fail("missing end marker");
  return cp;
}

ConicProgram import_text(const std::string& text) {
  std::istringstream is(text);
  return import_text(is);
}

bool programs_equal(const ConicProgram& a, const ConicProgram& b) {
  if (a.n_free != b.n_free || a.cone_orders != b.cone_orders) return false;
  if (a.objective != b.objective || a.objective_constant != b.objective_constant) return false;
  if (a.rows.size() != b.rows.size()) return false;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const auto& ra = a.rows[i];
    const auto& rb = b.rows[i];
    if (ra.sense != rb.sense || ra.rhs != rb.rhs || ra.terms != rb.terms) return false;
  }
  return true;
}

}  // namespace qpcert
