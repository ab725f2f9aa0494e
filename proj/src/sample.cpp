#include "qpcert/sample.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <ostream>

#include "qpcert/bounds.hpp"
#include "qpcert/conic.hpp"
#include "qpcert/rng.hpp"

namespace qpcert {

namespace {

Vec unit_sphere(Rng& rng, int d) {
  Vec v(d);
  double norm2 = 0.0;
  do {
    for (int i = 0; i < d; ++i) v[i] = rng.normal();
    norm2 = v.squaredNorm();
  } while (norm2 == 0.0);
  return v / std::sqrt(norm2);
}

std::vector<Vec> sample_hypercube(const Vec& l, const Vec& u, int n, Rng& rng) {
  const int d = static_cast<int>(l.size());
  for (int i = 0; i < d; ++i) {
    if (!std::isfinite(l[i]) || !std::isfinite(u[i])) {
      throw UnboundedSet("hypercube has infinite entries");
    }
  }
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int s = 0; s < n; ++s) {
    Vec v(d);
    for (int i = 0; i < d; ++i) v[i] = rng.uniform(l[i], u[i]);
    out.push_back(std::move(v));
  }
  return out;
}

// LP helper on {Av <= b}: maximize obj'x, returns optimal value
double polytope_lp(const Mat& A, const Vec& b, const Vec& obj, Vec* argmax = nullptr) {
  ConicProgram cp;
  cp.n_free = static_cast<int>(A.cols());
  for (int r = 0; r < A.rows(); ++r) {
    ConicProgram::Row row;
    row.sense = ConicProgram::Sense::Le;
    row.rhs = b[r];
    for (int j = 0; j < A.cols(); ++j) {
      if (A(r, j) != 0.0) row.terms.emplace_back(j, A(r, j));
    }
    cp.rows.push_back(std::move(row));
  }
  for (int j = 0; j < obj.size(); ++j) {
    if (obj[j] != 0.0) cp.objective.emplace_back(j, obj[j]);
  }
  SolveOptions opts;
  opts.tol = 1e-9;
  opts.time_limit_s = 10.0;
  SolveReport rep = solve(cp, opts);
  if (!rep.has_objective()) throw UnboundedSet("polytope LP: " + rep.message);
  if (argmax) *argmax = rep.primal.head(A.cols());
  return rep.objective;
}

std::vector<Vec> sample_polytope(const Polyhedron& poly, int n, Rng& rng) {
  const int d = static_cast<int>(poly.A.cols());
  const int rows = static_cast<int>(poly.A.rows());
  const double scale = std::max(1.0, poly.b.cwiseAbs().maxCoeff());

  {
    VarBounds vb = initial_bounds(SetSpec{poly});
    for (int i = 0; i < d; ++i) {
      if (!std::isfinite(vb.lower[i]) || !std::isfinite(vb.upper[i])) {
        throw UnboundedSet("polyhedron is unbounded");
      }
    }
  }

  // a feasible point maximizing the minimum slack (phase 1)
  Vec x0(d);
  {
    Mat A1(rows, d + 1);
    A1.leftCols(d) = poly.A;
    A1.col(d).setOnes();
    Vec obj = Vec::Zero(d + 1);
    obj[d] = 1.0;
    Vec arg;
    polytope_lp(A1, poly.b, obj, &arg);
    x0 = arg.head(d);
  }

  // implicit equality rows: max slack over the set is zero
  std::vector<int> eq_rows_idx;
  for (int r = 0; r < rows; ++r) {
    const double max_slack = poly.b[r] + polytope_lp(poly.A, poly.b, -poly.A.row(r).transpose());
    if (max_slack <= 1e-8 * scale) eq_rows_idx.push_back(r);
  }

  // directions restricted to the affine hull
  Mat N = Mat::Identity(d, d);
  if (!eq_rows_idx.empty()) {
    Mat E(static_cast<int>(eq_rows_idx.size()), d);
    for (std::size_t i = 0; i < eq_rows_idx.size(); ++i) E.row(static_cast<int>(i)) = poly.A.row(eq_rows_idx[i]);
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(E);
    const int rank = static_cast<int>(cod.rank());
    if (rank >= d) {
      // the set is a single point
      return std::vector<Vec>(static_cast<std::size_t>(n), x0);
    }
    Mat Q = cod.householderQ();
    N = Q.rightCols(d - rank);
  }

  // hit-and-run with 100 d burn-in
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(n));
  Vec x = x0;
  const int burnin = 100 * d;
  const int total = burnin + n;
  for (int step = 0; step < total; ++step) {
    const Vec dir = N * unit_sphere(rng, static_cast<int>(N.cols()));
    double lo = -kInf, hi = kInf;
    for (int r = 0; r < rows; ++r) {
      const double a = poly.A.row(r).dot(dir);
      const double slack = poly.b[r] - poly.A.row(r).dot(x);
      if (std::abs(a) < 1e-14 * scale) continue;
      const double lim = slack / a;
      if (a > 0) hi = std::min(hi, lim);
      else lo = std::max(lo, lim);
    }
    if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi)) continue;
    x += rng.uniform(lo, hi) * dir;
    if (step >= burnin) out.push_back(x);
  }
  while (static_cast<int>(out.size()) < n) out.push_back(x);
  return out;
}

}  // namespace

std::vector<Vec> sample_set(const SetSpec& set, int n, std::uint64_t seed) {
  if (n < 1) throw InvalidParams("sample_set: n must be >= 1");
  Rng rng(seed);
  return std::visit(
      [&](const auto& s) -> std::vector<Vec> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Singleton>) {
          return std::vector<Vec>(static_cast<std::size_t>(n), s.v);
        } else if constexpr (std::is_same_v<T, Hypercube>) {
          return sample_hypercube(s.l, s.u, n, rng);
        } else if constexpr (std::is_same_v<T, LinfBall>) {
          return sample_hypercube(s.c.array() - s.r, s.c.array() + s.r, n, rng);
        } else if constexpr (std::is_same_v<T, L2Ball>) {
          const int d = static_cast<int>(s.c.size());
          std::vector<Vec> out;
          out.reserve(static_cast<std::size_t>(n));
          for (int i = 0; i < n; ++i) {
            const double radius = s.r * std::pow(rng.uniform(), 1.0 / d);
            out.push_back(s.c + radius * unit_sphere(rng, d));
          }
          return out;
        } else if constexpr (std::is_same_v<T, L1Ball>) {
          const int d = static_cast<int>(s.c.size());
          std::vector<Vec> out;
          out.reserve(static_cast<std::size_t>(n));
          for (int i = 0; i < n; ++i) {
            Vec e(d + 1);
            for (int j = 0; j <= d; ++j) e[j] = rng.exponential();
            const double total = e.sum();
            Vec v(d);
            for (int j = 0; j < d; ++j) {
              const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
              v[j] = s.c[j] + s.r * sign * e[j] / total;
            }
            out.push_back(std::move(v));
          }
          return out;
        } else {
          return sample_polytope(s, n, rng);
        }
      },
      set);
}

SampleReport sample_max(const VerificationProblem& vp, int N, std::uint64_t seed) {
  Rng master(seed);
  const std::uint64_t seed_z = master.raw();
  const std::uint64_t seed_t = master.raw();
  const auto zs = sample_set(vp.init_set, N, seed_z);
  const auto thetas = sample_set(vp.param_set, N, seed_t);

  SampleReport rep;
  rep.n = N;
  rep.seed = seed;
  rep.max_residual.assign(static_cast<std::size_t>(vp.K), 0.0);
  rep.argmax.assign(static_cast<std::size_t>(vp.K), 0);
  for (int i = 0; i < N; ++i) {
    const Trajectory traj = forward_eval(vp, zs[static_cast<std::size_t>(i)],
                                         thetas[static_cast<std::size_t>(i)]);
    for (int k = 1; k <= vp.K; ++k) {
      const double r = (traj.at(vp.iterates[static_cast<std::size_t>(k)]) -
                        traj.at(vp.iterates[static_cast<std::size_t>(k - 1)]))
                           .squaredNorm();
      if (r > rep.max_residual[static_cast<std::size_t>(k - 1)]) {
        rep.max_residual[static_cast<std::size_t>(k - 1)] = r;
        rep.argmax[static_cast<std::size_t>(k - 1)] = i;
      }
    }
  }
  return rep;
}

Vec solve_fixpoint(const VerificationProblem& vp, const Vec& theta, double tol,
                   long maxiter) {
  const auto& g = vp.graph;
  if (vp.iterates.size() < 2 || vp.iteration_steps.empty()) {
    throw Error("solve_fixpoint: graph has no iteration block");
  }
  const VarId z_in = vp.iterates[0];
  const VarId z_out = vp.iterates[1];
  if (g.dim(z_in) != g.dim(z_out) || z_in != vp.init_var) {
    throw Error("solve_fixpoint: operator is not stationary on the iterate");
  }
  const auto [begin, end] = vp.iteration_steps[0];

  std::vector<Vec> values(static_cast<std::size_t>(g.num_vars()));
  for (int i = 0; i < g.num_vars(); ++i) {
    const auto& inf = g.info(VarId{i});
    if (inf.kind == VarKind::Constant) values[static_cast<std::size_t>(i)] = inf.value;
  }
  values[static_cast<std::size_t>(vp.param_var.idx)] = theta;

  Vec z = Vec::Zero(g.dim(z_in));
  double resid = kInf;
  for (long it = 0; it < maxiter; ++it) {
    values[static_cast<std::size_t>(z_in.idx)] = z;
    eval_steps(g, 0, end, values);
    const Vec& next = values[static_cast<std::size_t>(z_out.idx)];
    resid = (next - z).norm();
    z = next;
    if (resid <= tol) return z;
  }
  throw NoConvergence("fixed-point iteration cap reached, last residual " +
                      std::to_string(resid));
}

double analytic_gd_bound(double mu, double L, double t, int k, double dist0) {
  if (!(mu > 0.0) || !(L >= mu) || !(t > 0.0) || k < 1 || dist0 < 0.0) {
    throw InvalidParams("analytic_gd_bound: need 0 < mu <= L, t > 0, k >= 1, dist0 >= 0");
  }
  const double tau = std::max(std::abs(1.0 - t * mu), std::abs(1.0 - t * L));
  return std::pow(tau, k - 1) * (1.0 + tau) * dist0;
}

void write_sample_csv(std::ostream& os, const SampleReport& rep) {
  os << "k,sm_value,argmax_index\n";
  char buf[96];
  for (std::size_t k = 0; k < rep.max_residual.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%d\n", k + 1, rep.max_residual[k],
                  rep.argmax[k]);
    os << buf;
  }
}

}  // namespace qpcert
