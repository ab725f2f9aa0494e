#include "qpcert/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "qpcert/conic.hpp"

namespace qpcert {

namespace {

// exact per-coordinate LPs over {Av <= b} through the conic solver
VarBounds polyhedron_bounds(const Polyhedron& poly, std::vector<std::string>* notes) {
  const int d = static_cast<int>(poly.A.cols());
  const int rows = static_cast<int>(poly.A.rows());
  VarBounds vb{Vec::Constant(d, -kInf), Vec::Constant(d, kInf)};

  if (d > 20) {
    // box hull from single-coordinate rows only; everything else stays infinite
    for (int r = 0; r < rows; ++r) {
      int nz = -1;
      bool single = true;
      for (int j = 0; j < d; ++j) {
        if (poly.A(r, j) != 0.0) {
          if (nz >= 0) { single = false; break; }
          nz = j;
        }
      }
      if (!single || nz < 0) continue;
      const double a = poly.A(r, nz);
      const double q = poly.b[r] / a;
      if (a > 0) vb.upper[nz] = std::min(vb.upper[nz], q);
      else vb.lower[nz] = std::max(vb.lower[nz], q);
    }
    if (notes) notes->push_back("polyhedron dim > 20: row-derived box hull only");
    return vb;
  }

  ConicProgram cp;
  cp.n_free = d;
  for (int r = 0; r < rows; ++r) {
    ConicProgram::Row row;
    row.sense = ConicProgram::Sense::Le;
    row.rhs = poly.b[r];
    for (int j = 0; j < d; ++j) {
      if (poly.A(r, j) != 0.0) row.terms.emplace_back(j, poly.A(r, j));
    }
    cp.rows.push_back(std::move(row));
  }
  SolveOptions opts;
  opts.tol = 1e-9;
  opts.time_limit_s = 10.0;
  for (int j = 0; j < d; ++j) {
    for (int dir = 0; dir < 2; ++dir) {
      cp.objective = {{j, dir == 0 ? 1.0 : -1.0}};
      SolveReport rep = solve(cp, opts);
      if (rep.status == SolveReport::Status::Unbounded) {
        if (notes) {
          notes->push_back("polyhedron coordinate " + std::to_string(j) +
                           (dir == 0 ? " unbounded above" : " unbounded below"));
        }
        continue;
      }
      if (!rep.has_objective()) {
        throw UnboundedSet("polyhedron bound LP failed: " + rep.message);
      }
      if (dir == 0) vb.upper[j] = rep.objective;
      else vb.lower[j] = -rep.objective;
    }
  }
  return vb;
}

}  // namespace

VarBounds initial_bounds(const SetSpec& set) {
  return std::visit(
      [](const auto& s) -> VarBounds {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Hypercube>) {
          return {s.l, s.u};
        } else if constexpr (std::is_same_v<T, Singleton>) {
          return {s.v, s.v};
        } else if constexpr (std::is_same_v<T, Polyhedron>) {
          return polyhedron_bounds(s, nullptr);
        } else {
          return {s.c.array() - s.r, s.c.array() + s.r};
        }
      },
      set);
}

VarBounds interval_matvec(const Mat& A, const VarBounds& x) {
  const int rows = static_cast<int>(A.rows());
  VarBounds y{Vec::Zero(rows), Vec::Zero(rows)};
  for (int i = 0; i < rows; ++i) {
    double lo = 0.0, hi = 0.0;
    for (int j = 0; j < A.cols(); ++j) {
      const double a = A(i, j);
      if (a == 0.0) continue;
      if (a > 0) {
        lo += a * x.lower[j];
        hi += a * x.upper[j];
      } else {
        lo += a * x.upper[j];
        hi += a * x.lower[j];
      }
    }
    y.lower[i] = lo;
    y.upper[i] = hi;
  }
  return y;
}

VarBounds propagate_affine_interval(const Mat& Atil, const Mat& Btil, const VarBounds& x,
                                    const VarBounds& q) {
  VarBounds ya = interval_matvec(Atil, x);
  VarBounds yb = interval_matvec(Btil, q);
  return {ya.lower + yb.lower, ya.upper + yb.upper};
}

VarBounds propagate_affine_lpball(const Mat& Atil, const Vec& c, double r, NormP p) {
  const int rows = static_cast<int>(Atil.rows());
  VarBounds y{Vec::Zero(rows), Vec::Zero(rows)};
  for (int i = 0; i < rows; ++i) {
    double dual = 0.0;
    switch (p) {
      case NormP::One: dual = Atil.row(i).cwiseAbs().maxCoeff(); break;       // q = inf
      case NormP::Two: dual = Atil.row(i).norm(); break;                      // q = 2
      case NormP::Inf: dual = Atil.row(i).cwiseAbs().sum(); break;            // q = 1
    }
    const double mid = Atil.row(i).dot(c);
    y.lower[i] = mid - r * dual;
    y.upper[i] = mid + r * dual;
  }
  return y;
}

VarBounds propagate_max(const VarBounds& x, const VarBounds& l,
                        const std::vector<int>& active) {
  VarBounds y = x;
  for (int i : active) {
    y.lower[i] = std::max(x.lower[i], l.lower[i]);
    y.upper[i] = std::max(x.upper[i], l.upper[i]);
  }
  return y;
}

BoundsTable propagate_all(const VerificationProblem& vp) {
  const auto& g = vp.graph;
  BoundsTable table;
  table.by_var.resize(static_cast<std::size_t>(g.num_vars()));

  // ball descriptors for the lp-aware first hop
  struct BallInfo {
    bool is_ball = false;
    Vec c;
    double r = 0.0;
    NormP p = NormP::Two;
  };
  std::vector<BallInfo> ball(static_cast<std::size_t>(g.num_vars()));

  auto set_input = [&](VarId var, const SetSpec& s) {
    VarBounds vb = std::visit(
        [&](const auto& sp) -> VarBounds {
          using T = std::decay_t<decltype(sp)>;
          if constexpr (std::is_same_v<T, Polyhedron>) {
            return polyhedron_bounds(sp, &table.notes);
          } else {
            return initial_bounds(s);
          }
        },
        s);
    table.by_var[static_cast<std::size_t>(var.idx)] = std::move(vb);
    auto& bi = ball[static_cast<std::size_t>(var.idx)];
    if (const auto* b1 = std::get_if<L1Ball>(&s)) bi = {true, b1->c, b1->r, NormP::One};
    if (const auto* b2 = std::get_if<L2Ball>(&s)) bi = {true, b2->c, b2->r, NormP::Two};
  };

  for (int i = 0; i < g.num_vars(); ++i) {
    const auto& inf = g.info(VarId{i});
    if (inf.kind == VarKind::Constant) {
      table.by_var[static_cast<std::size_t>(i)] = {inf.value, inf.value};
    }
  }
  set_input(vp.init_var, vp.init_set);
  set_input(vp.param_var, vp.param_set);

  for (const Step& s : g.steps()) {
    if (const auto* a = std::get_if<AffineStep>(&s)) {
      const int d = g.dim(a->out);
      VarBounds acc{Vec::Zero(d), Vec::Zero(d)};
      for (const auto& [A, x] : a->terms) {
        const Mat Atil = a->factor.solve(A);
        const auto& bi = ball[static_cast<std::size_t>(x.idx)];
        VarBounds term =
            bi.is_ball ? propagate_affine_lpball(Atil, bi.c, bi.r, bi.p)
                       : interval_matvec(Atil, table.by_var[static_cast<std::size_t>(x.idx)]);
        acc.lower += term.lower;
        acc.upper += term.upper;
      }
      table.by_var[static_cast<std::size_t>(a->out.idx)] = std::move(acc);
    } else {
      const auto& m = std::get<MaxStep>(s);
      table.by_var[static_cast<std::size_t>(m.out.idx)] =
          propagate_max(table.by_var[static_cast<std::size_t>(m.lhs.idx)],
                        table.by_var[static_cast<std::size_t>(m.rhs.idx)], m.active);
    }
  }
  return table;
}

void write_bounds_csv(std::ostream& os, const IterationGraph& g, const BoundsTable& table) {
  os << "var,coord,lower,upper\n";
  char buf[128];
  for (int i = 0; i < g.num_vars(); ++i) {
    const auto& vb = table.by_var[static_cast<std::size_t>(i)];
    if (vb.lower.size() == 0) continue;
    for (int k = 0; k < vb.dim(); ++k) {
      std::snprintf(buf, sizeof(buf), "%s,%d,%.17g,%.17g\n", g.name(VarId{i}).c_str(), k,
                    vb.lower[k], vb.upper[k]);
      os << buf;
    }
  }
}

}  // namespace qpcert
