#include "qpcert/splitcone.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <vector>

namespace qpcert {

// Douglas-Rachford splitting on the homogeneous self-dual embedding of
//
//   minimize    c'x
//   subject to  Ax + s = b,  s in K = {0}^ze x R+^po x PSD(o_1) x ... ,
//
// after O'Donoghue et al. (2016). With Q the skew embedding matrix, the
// governing iteration on x_dr in R^{n+m+1} is
//
//   p     = Pi_C(x_dr),                 C = R^n x K* x R+
//   x_dr+ = x_dr + alpha ((I+Q)^{-1}(2p - x_dr) - p),
//
// whose fixed points give u = p, v = p - x_dr with Qu = v. The linear solve
// reduces to one quasidefinite KKT system factorized once.
//
// Two ingredients keep the tail manageable on degenerate relaxations: an
// affine presolve that eliminates pinned columns and two-term equality ties
// (consensus duplicates), and type-II Anderson acceleration with rollback.

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Trip = Eigen::Triplet<double>;

inline int svec_size(int n) { return n * (n + 1) / 2; }
inline int svec_index(int i, int j) { return j * (j + 1) / 2 + i; }
constexpr double kSqrt2 = 1.4142135623730951;

// ---------------------------------------------------------------------------
// presolve: union-find with affine edges x_i = s * x_root + o
// ---------------------------------------------------------------------------

class AffineUnion {
public:
  explicit AffineUnion(int n)
      : parent_(static_cast<std::size_t>(n)),
        scale_(static_cast<std::size_t>(n), 1.0),
        offset_(static_cast<std::size_t>(n), 0.0),
        pinned_(static_cast<std::size_t>(n), false),
        pin_(static_cast<std::size_t>(n), 0.0) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }

  struct Rel {
    int root;
    double scale, offset;
  };

  Rel find(int i) {
    if (parent_[static_cast<std::size_t>(i)] == i) return {i, 1.0, 0.0};
    Rel up = find(parent_[static_cast<std::size_t>(i)]);
    const double s = scale_[static_cast<std::size_t>(i)] * up.scale;
    const double o = scale_[static_cast<std::size_t>(i)] * up.offset + offset_[static_cast<std::size_t>(i)];
    parent_[static_cast<std::size_t>(i)] = up.root;
    scale_[static_cast<std::size_t>(i)] = s;
    offset_[static_cast<std::size_t>(i)] = o;
    return {up.root, s, o};
  }

  bool pinned(int root) const { return pinned_[static_cast<std::size_t>(root)]; }
  double pin_value(int root) const { return pin_[static_cast<std::size_t>(root)]; }

  // returns false on an inconsistency (infeasible pin)
  bool pin(int root, double value) {
    if (pinned_[static_cast<std::size_t>(root)]) {
      return std::abs(pin_[static_cast<std::size_t>(root)] - value) <=
             1e-7 * (1.0 + std::abs(value));
    }
    pinned_[static_cast<std::size_t>(root)] = true;
    pin_[static_cast<std::size_t>(root)] = value;
    return true;
  }

  // x_r1 = s * x_r2 + o for two distinct roots
  void attach(int r1, int r2, double s, double o) {
    parent_[static_cast<std::size_t>(r1)] = r2;
    scale_[static_cast<std::size_t>(r1)] = s;
    offset_[static_cast<std::size_t>(r1)] = o;
  }

private:
  std::vector<int> parent_;
  std::vector<double> scale_, offset_;
  std::vector<bool> pinned_;
  std::vector<double> pin_;
};

using ColMap = SplitconeColMap;
using Presolved = SplitconePresolved;

Presolved presolve_impl(const ConicProgram& cp) {
  const int N0 = cp.cols();
  Presolved out;
  AffineUnion uf(N0);

  // accumulated (root -> coeff) + constant for a row under the current map
  auto resolve_row = [&](const ConicProgram::Row& row, std::vector<std::pair<int, double>>& terms,
                         double& constant, double& rowscale) {
    terms.clear();
    constant = 0.0;
    rowscale = std::abs(row.rhs);
    for (const auto& [col, coef] : row.terms) {
      rowscale = std::max(rowscale, std::abs(coef));
      const AffineUnion::Rel rel = uf.find(col);
      constant += coef * rel.offset;
      if (uf.pinned(rel.root)) {
        constant += coef * rel.scale * uf.pin_value(rel.root);
      } else {
        terms.emplace_back(rel.root, coef * rel.scale);
      }
    }
    std::sort(terms.begin(), terms.end());
    // combine duplicates
    std::vector<std::pair<int, double>> merged;
    for (const auto& [root, coef] : terms) {
      if (!merged.empty() && merged.back().first == root) merged.back().second += coef;
      else merged.emplace_back(root, coef);
    }
    terms.clear();
    for (const auto& [root, coef] : merged) {
      if (std::abs(coef) > 1e-12 * std::max(1.0, rowscale)) terms.emplace_back(root, coef);
    }
  };

  std::vector<std::pair<int, double>> terms;
  bool changed = true;
  for (int pass = 0; pass < 12 && changed && !out.infeasible; ++pass) {
    changed = false;
    for (const auto& row : cp.rows) {
      if (row.sense != ConicProgram::Sense::Eq) continue;
      double constant = 0.0, rowscale = 0.0;
      resolve_row(row, terms, constant, rowscale);
      const double rhs = row.rhs - constant;
      if (terms.empty()) {
        if (std::abs(rhs) > 1e-7 * (1.0 + rowscale)) out.infeasible = true;
        continue;
      }
      if (terms.size() == 1) {
        if (!uf.pin(terms[0].first, rhs / terms[0].second)) out.infeasible = true;
        changed = true;
      } else if (terms.size() == 2) {
        const auto [r1, a1] = terms[0];
        const auto [r2, a2] = terms[1];
        const double ratio = -a2 / a1;
        if (std::abs(ratio) > 1e8 || std::abs(ratio) < 1e-8) continue;
        uf.attach(r1, r2, ratio, rhs / a1);
        changed = true;
      }
    }
  }

  // final column mapping
  out.map.resize(static_cast<std::size_t>(N0));
  std::vector<int> reduced_of(static_cast<std::size_t>(N0), -1);
  int next = 0;
  for (int i = 0; i < N0; ++i) {
    const AffineUnion::Rel rel = uf.find(i);
    if (uf.pinned(rel.root)) {
      out.map[static_cast<std::size_t>(i)] = {-1, 0.0,
                                              rel.scale * uf.pin_value(rel.root) + rel.offset};
    } else {
      if (reduced_of[static_cast<std::size_t>(rel.root)] < 0) {
        reduced_of[static_cast<std::size_t>(rel.root)] = next++;
      }
      out.map[static_cast<std::size_t>(i)] = {reduced_of[static_cast<std::size_t>(rel.root)],
                                              rel.scale, rel.offset};
    }
  }
  out.n_reduced = next;

  // rewrite every row over reduced columns
  auto substitute = [&](const ConicProgram::Row& row) {
    ConicProgram::Row r;
    r.sense = row.sense;
    std::map<int, double> acc;
    double constant = 0.0;
    for (const auto& [col, coef] : row.terms) {
      const ColMap& cm = out.map[static_cast<std::size_t>(col)];
      constant += coef * cm.offset;
      if (cm.col >= 0) acc[cm.col] += coef * cm.scale;
    }
    r.rhs = row.rhs - constant;
    for (const auto& [col, coef] : acc) {
      if (coef != 0.0) r.terms.emplace_back(col, coef);
    }
    return r;
  };

  for (const auto& row : cp.rows) {
    ConicProgram::Row r = substitute(row);
    if (r.terms.empty()) {
      const double tol = 1e-7 * (1.0 + std::abs(row.rhs));
      switch (row.sense) {
        case ConicProgram::Sense::Eq:
          if (std::abs(r.rhs) > tol) out.infeasible = true;
          break;
        case ConicProgram::Sense::Le:
          if (r.rhs < -tol) out.infeasible = true;
          break;
        case ConicProgram::Sense::Ge:
          if (r.rhs > tol) out.infeasible = true;
          break;
      }
      continue;
    }
    (r.sense == ConicProgram::Sense::Eq ? out.eq : out.ineq).push_back(std::move(r));
  }

  // drop proportional duplicates (common after substitution: RLT rows repeat
  // hypercube rows, mirrored products coincide)
  auto dedup = [](std::vector<ConicProgram::Row>& rows) {
    std::map<std::string, bool> seen;
    std::vector<ConicProgram::Row> keep;
    keep.reserve(rows.size());
    for (auto& row : rows) {
      double scale = std::abs(row.rhs);
      for (const auto& [col, coef] : row.terms) scale = std::max(scale, std::abs(coef));
      if (scale == 0.0) continue;
      std::string key(1, row.sense == ConicProgram::Sense::Eq   ? 'E'
                         : row.sense == ConicProgram::Sense::Le ? 'L'
                                                                : 'G');
      char buf[40];
      std::snprintf(buf, sizeof(buf), "|%.14g", row.rhs / scale);
      key += buf;
      for (const auto& [col, coef] : row.terms) {
        std::snprintf(buf, sizeof(buf), "|%d:%.14g", col, coef / scale);
        key += buf;
      }
      if (!seen.emplace(std::move(key), true).second) continue;
      keep.push_back(std::move(row));
    }
    rows.swap(keep);
  };
  dedup(out.eq);
  dedup(out.ineq);

  out.c_reduced = Vec::Zero(out.n_reduced);
  for (const auto& [col, coef] : cp.objective) {
    const ColMap& cm = out.map[static_cast<std::size_t>(col)];
    out.obj_shift += coef * cm.offset;
    if (cm.col >= 0) out.c_reduced[cm.col] += coef * cm.scale;
  }
  return out;
}

// ---------------------------------------------------------------------------
// cone machinery
// ---------------------------------------------------------------------------

struct ConeLayout {
  int n = 0;      // columns of A
  int m = 0;      // rows of A
  int n_eq = 0;   // leading zero-cone rows
  int n_ineq = 0; // nonnegative rows after the equalities
  std::vector<int> psd_orders;
};

struct PsdWork {
  std::vector<Mat> mats;
  std::vector<Eigen::SelfAdjointEigenSolver<Mat>> eigs;
  explicit PsdWork(const std::vector<int>& orders) : eigs(orders.size()) {
    for (int order : orders) mats.emplace_back(Mat(order, order));
  }
};

void project_psd_blocks(int offset, const ConeLayout& lay, Vec& y, PsdWork& w) {
  int at = offset + lay.n_eq + lay.n_ineq;
  for (std::size_t k = 0; k < lay.psd_orders.size(); ++k) {
    const int n = lay.psd_orders[k];
    Mat& M = w.mats[k];
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i <= j; ++i) {
        const double v = y[at + svec_index(i, j)];
        const double f = (i == j) ? v : v / kSqrt2;
        M(i, j) = f;
        M(j, i) = f;
      }
    }
    w.eigs[k].compute(M);
    const Vec& ev = w.eigs[k].eigenvalues();
    const Mat& Q = w.eigs[k].eigenvectors();
    int n_neg = 0;
    for (int r = 0; r < n; ++r) n_neg += (ev[r] < 0.0) ? 1 : 0;
    if (n_neg <= n - n_neg) {
      // subtract the negative part, usually the thin side near convergence
      for (int r = 0; r < n; ++r) {
        if (ev[r] < 0.0) M.noalias() -= ev[r] * Q.col(r) * Q.col(r).transpose();
      }
    } else {
      M.setZero();
      for (int r = 0; r < n; ++r) {
        if (ev[r] > 0.0) M.noalias() += ev[r] * Q.col(r) * Q.col(r).transpose();
      }
    }
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i <= j; ++i) {
        y[at + svec_index(i, j)] = (i == j) ? M(i, i) : kSqrt2 * M(i, j);
      }
    }
    at += svec_size(n);
  }
}

// in-place projection of the stacked (x, y, tau) onto R^n x K* x R+
void project_embedding(const ConeLayout& lay, Vec& p, PsdWork& w) {
  for (int i = lay.n + lay.n_eq; i < lay.n + lay.n_eq + lay.n_ineq; ++i) {
    p[i] = std::max(0.0, p[i]);
  }
  project_psd_blocks(lay.n, lay, p, w);
  p[lay.n + lay.m] = std::max(0.0, p[lay.n + lay.m]);
}

void project_primal_cone(const ConeLayout& lay, Vec& s, PsdWork& w) {
  s.head(lay.n_eq).setZero();
  for (int i = lay.n_eq; i < lay.n_eq + lay.n_ineq; ++i) s[i] = std::max(0.0, s[i]);
  project_psd_blocks(0, lay, s, w);
}

struct Scaling {
  Vec d, e;
  double beta = 1.0, gamma = 1.0;
};

// Ruiz equilibration; rows inside one PSD block share a single factor so the
// scaled cone is still a PSD cone.
Scaling equilibrate(SpMat& A, Vec& b, Vec& c, const ConeLayout& lay, int sweeps) {
  const int m = lay.m;
  const int n = lay.n;
  Scaling sc;
  sc.d = Vec::Ones(m);
  sc.e = Vec::Ones(n);
  Vec rn(m), cn(n);
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    rn.setZero();
    cn.setZero();
    for (int j = 0; j < A.outerSize(); ++j) {
      for (SpMat::InnerIterator it(A, j); it; ++it) {
        const double a = std::abs(it.value());
        rn[it.row()] = std::max(rn[it.row()], a);
        cn[j] = std::max(cn[j], a);
      }
    }
    int at = lay.n_eq + lay.n_ineq;
    for (int order : lay.psd_orders) {
      const int len = svec_size(order);
      const double mx = len > 0 ? rn.segment(at, len).maxCoeff() : 1.0;
      rn.segment(at, len).setConstant(mx);
      at += len;
    }
    bool done = true;
    for (int i = 0; i < m; ++i) {
      double f = rn[i] > 0 ? 1.0 / std::sqrt(rn[i]) : 1.0;
      f = std::clamp(f, 1e-6, 1e6);
      const double dn = std::clamp(sc.d[i] * f, 1e-4, 1e4);  // cumulative cap
      f = dn / sc.d[i];
      if (std::abs(1.0 - f) > 1e-3) done = false;
      sc.d[i] = dn;
      rn[i] = f;
    }
    for (int j = 0; j < n; ++j) {
      double f = cn[j] > 0 ? 1.0 / std::sqrt(cn[j]) : 1.0;
      f = std::clamp(f, 1e-6, 1e6);
      const double en = std::clamp(sc.e[j] * f, 1e-4, 1e4);
      f = en / sc.e[j];
      if (std::abs(1.0 - f) > 1e-3) done = false;
      sc.e[j] = en;
      cn[j] = f;
    }
    for (int j = 0; j < A.outerSize(); ++j) {
      for (SpMat::InnerIterator it(A, j); it; ++it) {
        it.valueRef() *= rn[it.row()] * cn[j];
      }
    }
    if (done) break;
  }
  b = sc.d.asDiagonal() * b;
  c = sc.e.asDiagonal() * c;
  sc.beta = 1.0 / std::max(1.0, b.norm());
  sc.gamma = 1.0 / std::max(1.0, c.norm());
  b *= sc.beta;
  c *= sc.gamma;
  return sc;
}

// type-II Anderson acceleration with fixed memory; the secant Gram matrix is
// maintained incrementally so each step costs O(dim * memory)
class Anderson {
public:
  Anderson(int dim, int memory)
      : dim_(dim), mem_(memory), dx_(dim, memory), df_(dim, memory),
        gram_(memory, memory), rhs_(memory), gamma_(memory) {}

  void reset() {
    count_ = 0;
    have_prev_ = false;
  }

  void observe(const Vec& x, const Vec& f) {
    if (have_prev_) {
      const int slot = count_ % mem_;
      dx_.col(slot) = x - x_prev_;
      df_.col(slot) = f - f_prev_;
      const int h = std::min(count_ + 1, mem_);
      for (int i = 0; i < h; ++i) {
        const double g = df_.col(i).dot(df_.col(slot));
        gram_(i, slot) = g;
        gram_(slot, i) = g;
      }
      ++count_;
    }
    x_prev_ = x;
    f_prev_ = f;
    have_prev_ = true;
  }

  // x + f - (DX + DF) gamma with gamma = argmin ||f - DF gamma||
  bool extrapolate(const Vec& x, const Vec& f, Vec& out) {
    const int h = std::min(count_, mem_);
    if (h < 1) return false;
    Mat G(h, h);
    for (int i = 0; i < h; ++i) {
      const int si = (count_ - h + i) % mem_;
      rhs_[i] = df_.col(si).dot(f);
      for (int j = 0; j <= i; ++j) {
        const int sj = (count_ - h + j) % mem_;
        G(i, j) = gram_(si, sj);
        G(j, i) = G(i, j);
      }
    }
    G.diagonal().array() += 1e-12 * (1.0 + G.trace());
    gamma_.head(h) = G.ldlt().solve(rhs_.head(h));
    if (!gamma_.head(h).allFinite()) return false;
    out = x + f;
    for (int i = 0; i < h; ++i) {
      const int si = (count_ - h + i) % mem_;
      const double gi = gamma_[i];
      if (gi != 0.0) out.noalias() -= gi * (dx_.col(si) + df_.col(si));
    }
    return out.allFinite();
  }

private:
  int dim_, mem_;
  int count_ = 0;
  bool have_prev_ = false;
  Mat dx_, df_, gram_;
  Vec rhs_, gamma_;
  Vec x_prev_, f_prev_;
};

}  // namespace

SplitconePresolved splitcone_presolve(const ConicProgram& cp) { return presolve_impl(cp); }

SolveReport splitcone_solve(const ConicProgram& cp, const SolveOptions& opts) {
  const auto t_start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  };

  SolveReport rep;
  const int N0 = cp.cols();

  Presolved pre;
  bool use_presolve = true;
  if (const char* env = std::getenv("QPCERT_PRESOLVE")) use_presolve = std::atoi(env) != 0;
  if (use_presolve) {
    pre = splitcone_presolve(cp);
  } else {
    pre.n_reduced = N0;
    pre.map.resize(static_cast<std::size_t>(N0));
    for (int i = 0; i < N0; ++i) pre.map[static_cast<std::size_t>(i)] = {i, 1.0, 0.0};
    for (const auto& row : cp.rows) {
      (row.sense == ConicProgram::Sense::Eq ? pre.eq : pre.ineq).push_back(row);
    }
    pre.c_reduced = Vec::Zero(N0);
    for (const auto& [col, coef] : cp.objective) pre.c_reduced[col] += coef;
  }
  if (pre.infeasible) {
    rep.status = SolveReport::Status::Infeasible;
    rep.message = "presolve found inconsistent equalities";
    rep.primal = Vec::Zero(N0);
    rep.wall_time_s = elapsed();
    return rep;
  }
  const int n = pre.n_reduced;
  Vec c0 = -pre.c_reduced;  // internal minimization objective

  auto expand = [&](const Vec& x_red) {
    Vec full(N0);
    for (int i = 0; i < N0; ++i) {
      const ColMap& cm = pre.map[static_cast<std::size_t>(i)];
      full[i] = cm.offset + (cm.col >= 0 ? cm.scale * x_red[cm.col] : 0.0);
    }
    return full;
  };

  ConeLayout lay;
  lay.n = n;
  lay.n_eq = static_cast<int>(pre.eq.size());
  lay.n_ineq = static_cast<int>(pre.ineq.size());
  lay.psd_orders = cp.cone_orders;
  int m = lay.n_eq + lay.n_ineq;
  for (int order : lay.psd_orders) m += svec_size(order);
  lay.m = m;

  if (m == 0 || n == 0) {
    // nothing left to optimize; the presolved point must simply be feasible
    rep.primal = expand(Vec::Zero(n));
    if (n > 0 && c0.cwiseAbs().maxCoeff() > 0.0) {
      rep.status = SolveReport::Status::Unbounded;
      rep.message = "no constraints and a nonzero objective";
    } else {
      const ResidualReport res = check_solution(cp, rep.primal);
      if (res.max_violation() <= 1e-7) {
        rep.status = SolveReport::Status::Optimal;
        rep.objective = pre.obj_shift + cp.objective_constant;
        rep.max_residual = res.max_violation();
      } else {
        rep.status = SolveReport::Status::Infeasible;
        rep.message = "pinned point violates the cone constraints";
      }
    }
    rep.wall_time_s = elapsed();
    return rep;
  }

  // rows: equalities, inequalities (as <=), PSD membership
  std::vector<Trip> trips;
  Vec b0 = Vec::Zero(m);
  int r = 0;
  for (const auto& row : pre.eq) {
    for (const auto& [col, coef] : row.terms) trips.emplace_back(r, col, coef);
    b0[r] = row.rhs;
    ++r;
  }
  for (const auto& row : pre.ineq) {
    const double flip = (row.sense == ConicProgram::Sense::Ge) ? -1.0 : 1.0;
    for (const auto& [col, coef] : row.terms) trips.emplace_back(r, col, flip * coef);
    b0[r] = flip * row.rhs;
    ++r;
  }
  for (std::size_t k = 0; k < lay.psd_orders.size(); ++k) {
    const int order = lay.psd_orders[k];
    const int base = cp.cone_col_begin(static_cast<int>(k));
    for (int j = 0; j < order; ++j) {
      for (int i = 0; i <= j; ++i) {
        const double kappa = (i == j) ? 1.0 : kSqrt2;
        const ColMap& cm = pre.map[static_cast<std::size_t>(base + svec_index(i, j))];
        if (cm.col >= 0) trips.emplace_back(r, cm.col, -kappa * cm.scale);
        b0[r] = kappa * cm.offset;
        ++r;
      }
    }
  }
  SpMat A(m, n);
  A.setFromTriplets(trips.begin(), trips.end());
  A.makeCompressed();
  const SpMat A0 = A;
  Vec b = b0, c = c0;
  const Scaling sc = equilibrate(A, b, c, lay, 10);

  // diagonal splitting metric: m_x on the primal block, m_y per dual row
  // (uniform within each PSD block); equality rows get a smaller dual weight
  double m_x = 1.0;
  double w_eq = 1.0, w_in = 1.0;
  if (const char* env = std::getenv("QPCERT_MX")) m_x = std::atof(env);
  if (const char* env = std::getenv("QPCERT_WEQ")) w_eq = std::atof(env);
  if (const char* env = std::getenv("QPCERT_WIN")) w_in = std::atof(env);
  Vec m_y = Vec::Constant(m, w_in);
  m_y.head(lay.n_eq).setConstant(w_eq);
  double rho_tau = 1.0;
  if (const char* env = std::getenv("QPCERT_RHO_TAU")) rho_tau = std::atof(env);

  const int N = n + m + 1;
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower> ldlt;
  Vec rhs(n + m), sol(n + m), perm_work(n + m);
  Vec gx(n), gy(m);
  double denom = 1.0;

  auto m_solve = [&](const Vec& a, const Vec& bt, Vec& px, Vec& py) {
    rhs.head(n) = a;
    rhs.tail(m) = -bt;
    perm_work = ldlt.permutationP() * rhs;
    ldlt.matrixL().solveInPlace(perm_work);
    perm_work.array() /= ldlt.vectorD().array();
    ldlt.matrixU().solveInPlace(perm_work);
    sol = ldlt.permutationPinv() * perm_work;
    px = sol.head(n);
    py = sol.tail(m);
  };

  bool pattern_ready = false;
  auto factorize_metric = [&]() -> bool {
    SpMat kkt(n + m, n + m);
    std::vector<Trip> kt;
    kt.reserve(static_cast<std::size_t>(A.nonZeros()) + static_cast<std::size_t>(n + m));
    for (int i = 0; i < n; ++i) kt.emplace_back(i, i, m_x);
    for (int i = 0; i < m; ++i) kt.emplace_back(n + i, n + i, -m_y[i]);
    for (int j = 0; j < A.outerSize(); ++j) {
      for (SpMat::InnerIterator it(A, j); it; ++it) {
        kt.emplace_back(n + it.row(), j, it.value());
      }
    }
    kkt.setFromTriplets(kt.begin(), kt.end());
    kkt.makeCompressed();
    if (!pattern_ready) {
      ldlt.analyzePattern(kkt);
      pattern_ready = true;
    }
    ldlt.factorize(kkt);
    if (opts.verbose) {
      std::printf("  kkt dim %d nnz(A) %ld nnz(L) %ld\n", n + m,
                  static_cast<long>(A.nonZeros()),
                  static_cast<long>(ldlt.matrixL().nestedExpression().nonZeros()));
    }
    if (ldlt.info() != Eigen::Success) return false;
    // cached column g = Mtilde^{-1} h with one refinement pass
    m_solve(c, b, gx, gy);
    Vec rx = c - (m_x * gx + A.transpose() * gy);
    Vec ry = -b - (A * gx - m_y.asDiagonal() * gy);
    rhs.head(n) = rx;
    rhs.tail(m) = ry;
    sol = ldlt.solve(rhs);
    gx += sol.head(n);
    gy += sol.tail(m);
    denom = rho_tau + c.dot(gx) + b.dot(gy);
    return true;
  };

  if (!factorize_metric()) {
    rep.status = SolveReport::Status::Error;
    rep.message = "KKT factorization failed";
    rep.wall_time_s = elapsed();
    return rep;
  }

  Vec zx(n), zy(m);
  auto embedding_solve = [&](const Vec& w, Vec& out) {
    m_solve(m_x * w.head(n), (m_y.array() * w.segment(n, m).array()).matrix(), zx, zy);
    const double tau = (rho_tau * w[N - 1] + c.dot(zx) + b.dot(zy)) / denom;
    out.head(n) = zx - tau * gx;
    out.segment(n, m) = zy - tau * gy;
    out[N - 1] = tau;
  };

  PsdWork psd_work(lay.psd_orders);
  PsdWork cert_work(lay.psd_orders);

  double alpha = 1.5;
  if (const char* env = std::getenv("QPCERT_ALPHA")) alpha = std::atof(env);
  Vec x_dr = Vec::Zero(N);
  x_dr[N - 1] = 1.0;
  Vec p(N), q(N), g(N), f(N);

  double t_proj = 0, t_lin = 0, t_aa = 0;
  const bool timing = std::getenv("QPCERT_TIMING") != nullptr;
  auto dr_apply = [&](const Vec& x, Vec& proj, Vec& out) {
    const auto t0 = std::chrono::steady_clock::now();
    proj = x;
    project_embedding(lay, proj, psd_work);
    const auto t1 = std::chrono::steady_clock::now();
    q = 2.0 * proj - x;
    embedding_solve(q, out);
    out = x + alpha * (out - proj);
    const auto t2 = std::chrono::steady_clock::now();
    t_proj += std::chrono::duration<double>(t1 - t0).count();
    t_lin += std::chrono::duration<double>(t2 - t1).count();
  };

  int aa_mem = 10;
  if (const char* env = std::getenv("QPCERT_AA_MEM")) aa_mem = std::atoi(env);
  long restart_every = 0;
  if (const char* env = std::getenv("QPCERT_RESTART")) restart_every = std::atol(env);
  Vec x_avg = Vec::Zero(N);
  long avg_count = 0;
  bool adaptive = false;
  if (const char* env = std::getenv("QPCERT_ADAPTIVE")) adaptive = std::atoi(env) != 0;
  long last_rescale = 0;
  long last_tau_rescale = 0;
  long aa_pause_until = 0;
  long rescale_gap = 250;
  int rescales = 0;
  Anderson aa(N, aa_mem);
  double f_norm_prev = kInf;
  Vec x_safe;
  long rollbacks = 0;
  double best_viol = kInf;
  Vec best_x;
  double best_obj = 0.0;

  long iter = 0;
  const int check_every = 25;
  std::string stop_reason;
  SolveReport::Status cert_status = SolveReport::Status::Error;
  bool have_cert = false;

  for (iter = 1; iter <= opts.max_iter; ++iter) {
    dr_apply(x_dr, p, g);
    f = g - x_dr;
    const double f_norm = f.norm();

    if (iter % check_every == 0 || iter == opts.max_iter) {
      // u = p, v = p - x_dr at the pre-update point
      const double tau = p[N - 1];
      if (tau > 1e-12) {
        Vec x = sc.e.asDiagonal() * p.head(n) / (tau * sc.beta);
        Vec y = sc.d.asDiagonal() * p.segment(n, m) / (tau * sc.gamma);
        Vec s = (m_y.array() * (p - x_dr).segment(n, m).array()).matrix();
        s = (s.array() / sc.d.array()).matrix() / (tau * sc.beta);
        const double ctx = c0.dot(x);
        const double bty = b0.dot(y);
        const double pres = (A0 * x + s - b0).norm() / (1.0 + b0.norm());
        const double dres = (A0.transpose() * y + c0).norm() / (1.0 + c0.norm());
        const double gap = std::abs(ctx + bty) / (1.0 + std::abs(ctx) + std::abs(bty));
        const double viol = std::max({pres, dres, gap});
        if (viol < best_viol) {
          best_viol = viol;
          best_x = x;
          best_obj = -ctx;
        }
        if (opts.verbose && iter % 500 == 0) {
          std::printf("  iter %ld pres %.2e dres %.2e gap %.2e fnorm %.2e tau %.2e rb %ld rs %d\n",
                      iter, pres, dres, gap, f_norm, tau, rollbacks, rescales);
        }
        if (viol <= opts.tol) {
          stop_reason = "converged";
          break;
        }
        // the tau weight balances gap against feasibility and changes freely
        // (it never enters the factorization)
        if (iter >= 1000 && iter - last_tau_rescale >= 500 && viol > 20.0 * opts.tol) {
          const double feas = std::max(pres, dres);
          const double r = gap / std::max(feas, 1e-16);
          if (r > 5.0 || r < 0.2) {
            const double factor = std::clamp(1.0 / std::sqrt(r), 0.2, 5.0);
            const double rho_new = std::clamp(rho_tau * factor, 1e-6, 1e6);
            if (rho_new != rho_tau) {
              const double v_tau = rho_tau * (p[N - 1] - x_dr[N - 1]);
              rho_tau = rho_new;
              denom = rho_tau + c.dot(gx) + b.dot(gy);
              x_dr[N - 1] = p[N - 1] - v_tau / rho_tau;
              aa.reset();
              x_safe.resize(0);
              f_norm_prev = kInf;
              aa_pause_until = iter + 10;
              last_tau_rescale = iter;
              continue;
            }
          }
        }
        if (adaptive && iter >= 2000 && viol > 50.0 * opts.tol &&
            iter - last_rescale >= rescale_gap && rescales < 40) {
          const double ratio = pres / std::max(dres, 1e-16);
          if (ratio > 2.0 || ratio < 0.5) {
            const double factor = std::clamp(std::sqrt(ratio), 0.2, 5.0);
            // keep (u, v) across the metric change: v_y is invariant, so the
            // y-block of the governing iterate moves to p_y - v_y / m_y_new
            const Vec v_y = (m_y.array() * (p - x_dr).segment(n, m).array()).matrix();
            const double v_x_scale = m_x;
            const double v_tau = rho_tau * (p[N - 1] - x_dr[N - 1]);
            Vec v_x = v_x_scale * (p.head(n) - x_dr.head(n));
            m_y *= factor;
            // renormalize so the dual weights keep geometric mean one
            const double geo = std::exp(m_y.array().log().mean());
            m_y /= geo;
            m_x = std::clamp(m_x / geo, 1e-6, 1e6);
            rho_tau = std::clamp(rho_tau / geo, 1e-6, 1e6);
            m_y = m_y.cwiseMax(1e-6).cwiseMin(1e6);
            if (factorize_metric()) {
              x_dr.head(n) = p.head(n) - v_x / m_x;
              x_dr.segment(n, m) =
                  p.segment(n, m) - (v_y.array() / m_y.array()).matrix();
              x_dr[N - 1] = p[N - 1] - v_tau / rho_tau;
              aa.reset();
              x_safe.resize(0);
              f_norm_prev = kInf;
              aa_pause_until = iter + 10;
              last_rescale = iter;
              rescale_gap = static_cast<long>(rescale_gap * 1.15);
              ++rescales;
              continue;
            }
          }
        }
      } else {
        if (opts.verbose && iter % 500 == 0) {
          std::printf("  iter %ld tau %.2e collapsed, fnorm %.2e kappa %.2e\n", iter,
                      p[N - 1], f_norm, rho_tau * (p[N - 1] - x_dr[N - 1]));
        }
        Vec yu = sc.d.asDiagonal() * p.segment(n, m);
        const double yu_norm = yu.norm();
        if (yu_norm > 0.0) yu /= yu_norm;
        const double bty = b0.dot(yu);
        if (bty < -1e-9 * (1.0 + b0.norm())) {
          if ((A0.transpose() * yu).norm() * (1.0 + b0.norm()) <=
              std::max(opts.tol, 1e-9) * (-bty)) {
            cert_status = SolveReport::Status::Infeasible;
            have_cert = true;
            stop_reason = "primal infeasibility certificate";
            break;
          }
        }
        Vec xu = sc.e.asDiagonal() * p.head(n);
        const double xu_norm = xu.norm();
        if (xu_norm > 0.0) xu /= xu_norm;
        const double ctx = c0.dot(xu);
        if (ctx < -1e-9 * (1.0 + c0.norm())) {
          Vec sr = -(A0 * xu);
          project_primal_cone(lay, sr, cert_work);
          if ((A0 * xu + sr).norm() * (1.0 + c0.norm()) <=
              std::max(opts.tol, 1e-9) * (-ctx)) {
            cert_status = SolveReport::Status::Unbounded;
            have_cert = true;
            stop_reason = "unboundedness certificate";
            break;
          }
        }
      }
      if (elapsed() > opts.time_limit_s) {
        stop_reason = "time limit";
        break;
      }
    }

    if (f_norm > 1.2 * f_norm_prev && x_safe.size()) {
      // the accelerated candidate overshot: roll back to the plain iterate
      x_dr = x_safe;
      x_safe.resize(0);
      aa.reset();
      f_norm_prev = kInf;
      ++rollbacks;
      aa_pause_until = iter + 10;
      continue;
    }
    if (restart_every > 0) {
      x_avg += x_dr;
      ++avg_count;
      if (avg_count >= restart_every) {
        x_dr = x_avg / static_cast<double>(avg_count);
        x_avg.setZero();
        avg_count = 0;
        aa.reset();
        x_safe.resize(0);
        f_norm_prev = kInf;
        const double nrm2 = x_dr.norm();
        if (nrm2 > 0) x_dr *= std::sqrt(static_cast<double>(N)) / nrm2;
        continue;
      }
    }
    const auto taa0 = std::chrono::steady_clock::now();
    aa.observe(x_dr, f);
    Vec x_aa;
    const double x_norm = x_dr.norm();
    if (iter >= aa_pause_until && aa.extrapolate(x_dr, f, x_aa) &&
        x_aa.norm() > 1e-2 * x_norm) {
      x_safe = g;
      x_dr = std::move(x_aa);
    } else {
      x_safe.resize(0);
      x_dr = g;
    }
    t_aa += std::chrono::duration<double>(std::chrono::steady_clock::now() - taa0).count();
    f_norm_prev = f_norm;
    // the embedding is positively homogeneous: keep the iterate on a fixed
    // shell so the trivial zero fixed point is unreachable
    const double nrm = x_dr.norm();
    if (nrm < 1e-9 * std::sqrt(static_cast<double>(N))) {
      x_dr.setZero();
      x_dr[N - 1] = 1.0;
      aa.reset();
      x_safe.resize(0);
      f_norm_prev = kInf;
    } else {
      const double target = std::sqrt(static_cast<double>(N));
      const double scale_now = target / nrm;
      x_dr *= scale_now;
      if (x_safe.size()) x_safe *= scale_now;
    }
  }
  rep.iterations = std::min<long>(iter, opts.max_iter);
  rep.wall_time_s = elapsed();
  if (timing) {
    std::printf("  timing: proj %.2fs lin %.2fs aa %.2fs total %.2fs over %ld iters\n",
                t_proj, t_lin, t_aa, rep.wall_time_s, rep.iterations);
  }

  if (have_cert) {
    rep.status = cert_status;
    rep.message = stop_reason;
    rep.primal = Vec::Zero(N0);
    return rep;
  }

  if (!best_x.size()) {
    rep.status = SolveReport::Status::Error;
    rep.message = "no primal candidate (tau stayed at zero)";
    rep.primal = Vec::Zero(N0);
    return rep;
  }

  rep.primal = expand(best_x);
  rep.max_residual = check_solution(cp, rep.primal).max_violation();
  rep.objective = best_obj + pre.obj_shift + cp.objective_constant;
  if (best_viol <= opts.tol) {
    rep.status = SolveReport::Status::Optimal;
  } else if (best_viol <= 1e-5) {
    rep.status = SolveReport::Status::NearOptimal;
  } else {
    rep.status = SolveReport::Status::Error;
    rep.objective = 0.0;
  }
  rep.message = stop_reason.empty() ? "iteration limit" : stop_reason;
  if (opts.verbose) {
    std::printf("splitcone: %s after %ld iters, viol %.2e, %.2fs\n", rep.message.c_str(),
                rep.iterations, best_viol, rep.wall_time_s);
  }
  return rep;
}

}  // namespace qpcert
