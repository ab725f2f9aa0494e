#include "qpcert/algorithms.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>

namespace qpcert {

namespace {

void require_psd(const Mat& P, const char* what) {
  if (P.rows() != P.cols()) throw DimensionMismatch(std::string(what) + ": not square");
  if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + P.cwiseAbs().maxCoeff())) {
    throw InvalidParams(std::string(what) + ": not symmetric");
  }
  if (P.rows() == 0) return;
  Eigen::SelfAdjointEigenSolver<Mat> eig(P, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double scale = std::max(1.0, P.cwiseAbs().maxCoeff());
  if (lo < -1e-9 * scale) {
    throw InvalidParams(std::string(what) + ": minimum eigenvalue " + std::to_string(lo));
  }
}

std::string iter_name(const char* base, int k) { return std::string(base) + std::to_string(k); }

// appends (B*W, theta) and a constant-offset input for an affine contribution
// B * (W theta + offset)
void push_linear_term(std::vector<std::pair<Mat, VarId>>& terms, const Mat& B,
                      const LinearTerm& map, VarId theta, VarId offset_var) {
  if (map.W.size() > 0 && map.W.cwiseAbs().maxCoeff() > 0.0) {
    terms.emplace_back(B * map.W, theta);
  }
  if (offset_var.valid()) terms.emplace_back(B, offset_var);
}

VarId maybe_offset_var(IterationGraph& g, const LinearTerm& map, const std::string& name) {
  if (map.offset.size() > 0 && map.offset.cwiseAbs().maxCoeff() > 0.0) {
    return g.add_constant(name, map.offset);
  }
  return VarId{};
}

}  // namespace

// ---------------------------------------------------------------------------
// gradient descent
// ---------------------------------------------------------------------------

VerificationProblem build_gradient_descent(const Mat& P, const LinearTerm& q_map,
                                           const StepSchedule& schedule, int K, SetSpec Z,
                                           SetSpec Theta) {
  if (K < 1) throw InvalidSchedule("K must be >= 1 (objective pair undefined)");
  schedule.check(K);
  require_psd(P, "gradient descent P");
  const int n = static_cast<int>(P.rows());
  if (q_map.dim() != n) throw DimensionMismatch("q_map dim != n");

  VerificationProblem vp;
  auto& g = vp.graph;
  vp.K = K;
  vp.init_var = g.add_initial("z0", n);
  vp.param_var = g.add_parameter("theta", set_dim(Theta));
  vp.init_set = std::move(Z);
  vp.param_set = std::move(Theta);
  VarId qoff = maybe_offset_var(g, q_map, "qoff");

  vp.iterates.push_back(vp.init_var);
  VarId z = vp.init_var;
  const Mat I = Mat::Identity(n, n);
  for (int k = 0; k < K; ++k) {
    const double t = schedule.at(k);
    std::vector<std::pair<Mat, VarId>> terms;
    terms.emplace_back(I - t * P, z);
    push_linear_term(terms, -t * I, q_map, vp.param_var, qoff);
    const int begin = g.num_steps();
    z = g.add_affine_step(I, std::move(terms), iter_name("z", k + 1), k + 1);
    vp.iteration_steps.emplace_back(begin, g.num_steps());
    vp.iterates.push_back(z);
  }
  vp.objective_pair = {vp.iterates[static_cast<std::size_t>(K)],
                       vp.iterates[static_cast<std::size_t>(K - 1)]};
  return vp;
}

// ---------------------------------------------------------------------------
// Nesterov acceleration on the stacked state (w, r)
// ---------------------------------------------------------------------------

VerificationProblem build_nesterov(const Mat& P, const LinearTerm& q_map, double t,
                                   const BetaRule& beta_rule, int K, SetSpec Z,
                                   SetSpec Theta) {
  if (K < 1) throw InvalidSchedule("K must be >= 1");
  if (t < 0.0) throw InvalidSchedule("t must be nonnegative");
  require_psd(P, "nesterov P");
  const int n = static_cast<int>(P.rows());
  if (q_map.dim() != n) throw DimensionMismatch("q_map dim != n");

  VerificationProblem vp;
  auto& g = vp.graph;
  vp.K = K;
  vp.init_var = g.add_initial("s0", 2 * n);
  vp.param_var = g.add_parameter("theta", set_dim(Theta));
  vp.init_set = std::move(Z);
  vp.param_set = std::move(Theta);
  VarId qoff = maybe_offset_var(g, q_map, "qoff");

  const Mat G = Mat::Identity(n, n) - t * P;
  const Mat I2 = Mat::Identity(2 * n, 2 * n);
  vp.iterates.push_back(vp.init_var);
  VarId s = vp.init_var;
  for (int k = 0; k < K; ++k) {
    const double beta = beta_rule.at(k);
    if (beta < 0.0) throw InvalidSchedule("beta must be nonnegative");
    Mat A = Mat::Zero(2 * n, 2 * n);
    A.topRightCorner(n, n) = G;
    A.bottomLeftCorner(n, n) = -beta * Mat::Identity(n, n);
    A.bottomRightCorner(n, n) = (1.0 + beta) * G;
    Mat B(2 * n, n);
    B.topRows(n) = -t * Mat::Identity(n, n);
    B.bottomRows(n) = -t * (1.0 + beta) * Mat::Identity(n, n);

    std::vector<std::pair<Mat, VarId>> terms;
    terms.emplace_back(std::move(A), s);
    push_linear_term(terms, B, q_map, vp.param_var, qoff);
    const int begin = g.num_steps();
    s = g.add_affine_step(I2, std::move(terms), iter_name("s", k + 1), k + 1);
    vp.iteration_steps.emplace_back(begin, g.num_steps());
    vp.iterates.push_back(s);
  }
  vp.objective_pair = {vp.iterates[static_cast<std::size_t>(K)],
                       vp.iterates[static_cast<std::size_t>(K - 1)]};
  return vp;
}

// ---------------------------------------------------------------------------
// projected gradient descent (nonnegative least squares)
// ---------------------------------------------------------------------------

VerificationProblem build_projected_gd(const Mat& A, const LinearTerm& b_map,
                                       const StepSchedule& schedule, int K, SetSpec Z,
                                       SetSpec Theta) {
  if (K < 1) throw InvalidSchedule("K must be >= 1");
  schedule.check(K);
  const int m = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  if (m < n) throw DimensionMismatch("A must have at least as many rows as columns");
  if (b_map.dim() != m) throw DimensionMismatch("b_map dim != m");

  VerificationProblem vp;
  auto& g = vp.graph;
  vp.K = K;
  vp.init_var = g.add_initial("z0", n);
  vp.param_var = g.add_parameter("b", set_dim(Theta));
  vp.init_set = std::move(Z);
  vp.param_set = std::move(Theta);
  VarId boff = maybe_offset_var(g, b_map, "boff");
  VarId zero = g.add_constant("zero", Vec::Zero(n));

  const Mat AtA = A.transpose() * A;
  const Mat I = Mat::Identity(n, n);
  std::vector<int> all(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;

  vp.iterates.push_back(vp.init_var);
  VarId z = vp.init_var;
  for (int k = 0; k < K; ++k) {
    const double t = schedule.at(k);
    std::vector<std::pair<Mat, VarId>> terms;
    terms.emplace_back(I - t * AtA, z);
    push_linear_term(terms, t * A.transpose(), b_map, vp.param_var, boff);
    const int begin = g.num_steps();
    VarId y = g.add_affine_step(I, std::move(terms), iter_name("y", k + 1), k + 1);
    z = g.add_max_step(y, zero, all, iter_name("z", k + 1), k + 1);
    vp.iteration_steps.emplace_back(begin, g.num_steps());
    vp.iterates.push_back(z);
  }
  vp.objective_pair = {vp.iterates[static_cast<std::size_t>(K)],
                       vp.iterates[static_cast<std::size_t>(K - 1)]};
  return vp;
}

// ---------------------------------------------------------------------------
// Douglas-Rachford splitting for the LP complementarity system
// ---------------------------------------------------------------------------

VerificationProblem build_dr_splitting(const Mat& M, const LinearTerm& q_map, int n, int m,
                                       int K, SetSpec Z, SetSpec Theta) {
  if (K < 1) throw InvalidSchedule("K must be >= 1");
  const int d = n + m;
  if (M.rows() != d || M.cols() != d) throw DimensionMismatch("M must be (n+m) square");
  if (q_map.dim() != d) throw DimensionMismatch("q_map dim != n+m");

  VerificationProblem vp;
  auto& g = vp.graph;
  vp.K = K;
  vp.init_var = g.add_initial("z0", d);
  vp.param_var = g.add_parameter("theta", set_dim(Theta));
  vp.init_set = std::move(Z);
  vp.param_set = std::move(Theta);
  VarId qoff = maybe_offset_var(g, q_map, "qoff");
  VarId zero = g.add_constant("zero", Vec::Zero(d));

  const Mat I = Mat::Identity(d, d);
  std::vector<int> last_m(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) last_m[static_cast<std::size_t>(i)] = n + i;

  vp.iterates.push_back(vp.init_var);
  VarId z = vp.init_var;
  for (int k = 0; k < K; ++k) {
    const int begin = g.num_steps();
    std::vector<std::pair<Mat, VarId>> solve_terms;
    solve_terms.emplace_back(I, z);
    push_linear_term(solve_terms, -I, q_map, vp.param_var, qoff);
    VarId u = g.add_affine_step(M + I, std::move(solve_terms), iter_name("u", k + 1), k + 1);
    VarId w = g.add_affine_step(I, {{2.0 * I, u}, {-I, z}}, iter_name("w", k + 1), k + 1);
    VarId ut = g.add_max_step(w, zero, last_m, iter_name("ut", k + 1), k + 1);
    z = g.add_affine_step(I, {{I, z}, {I, ut}, {-I, u}}, iter_name("z", k + 1), k + 1);
    vp.iteration_steps.emplace_back(begin, g.num_steps());
    vp.iterates.push_back(z);
  }
  vp.objective_pair = {vp.iterates[static_cast<std::size_t>(K)],
                       vp.iterates[static_cast<std::size_t>(K - 1)]};
  return vp;
}

// ---------------------------------------------------------------------------
// ISTA / FISTA
// ---------------------------------------------------------------------------

double fista_beta(int k) {
  double beta = 1.0;
  for (int i = 0; i < k; ++i) beta = (1.0 + std::sqrt(1.0 + 4.0 * beta * beta)) / 2.0;
  return beta;
}

namespace {

struct SoftThreshOut {
  VarId z;
};

// y -> max(y, thr) - max(-y, thr), emitted as two max steps and a subtraction
SoftThreshOut emit_soft_threshold(IterationGraph& g, VarId y, VarId thr, int k) {
  const int n = g.dim(y);
  const Mat I = Mat::Identity(n, n);
  std::vector<int> all(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
  VarId yneg = g.add_affine_step(I, {{-I, y}}, iter_name("yneg", k), k);
  VarId p = g.add_max_step(y, thr, all, iter_name("p", k), k);
  VarId q = g.add_max_step(yneg, thr, all, iter_name("q", k), k);
  VarId z = g.add_affine_step(I, {{I, p}, {-I, q}}, iter_name("z", k), k);
  return {z};
}

}  // namespace

VerificationProblem build_ista(const Mat& A, const LinearTerm& b_map, double lambda,
                               double t, int K, SetSpec Z, SetSpec Theta) {
  if (lambda < 0.0) throw NegativeLambda("lambda must be nonnegative");
  if (!(t > 0.0)) throw InvalidSchedule("t must be positive");
  if (K < 1) throw InvalidSchedule("K must be >= 1");
  const int m = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  if (b_map.dim() != m) throw DimensionMismatch("b_map dim != m");

  VerificationProblem vp;
  auto& g = vp.graph;
  vp.K = K;
  vp.init_var = g.add_initial("z0", n);
  vp.param_var = g.add_parameter("b", set_dim(Theta));
  vp.init_set = std::move(Z);
  vp.param_set = std::move(Theta);
  VarId boff = maybe_offset_var(g, b_map, "boff");
  VarId thr = g.add_constant("thr", Vec::Constant(n, lambda * t));

  const Mat I = Mat::Identity(n, n);
  const Mat At = I - t * A.transpose() * A;

  vp.iterates.push_back(vp.init_var);
  VarId z = vp.init_var;
  for (int k = 0; k < K; ++k) {
    const int begin = g.num_steps();
    std::vector<std::pair<Mat, VarId>> terms;
    terms.emplace_back(At, z);
    push_linear_term(terms, t * A.transpose(), b_map, vp.param_var, boff);
    VarId y = g.add_affine_step(I, std::move(terms), iter_name("y", k + 1), k + 1);
    z = emit_soft_threshold(g, y, thr, k + 1).z;
    vp.iteration_steps.emplace_back(begin, g.num_steps());
    vp.iterates.push_back(z);
  }
  vp.objective_pair = {vp.iterates[static_cast<std::size_t>(K)],
                       vp.iterates[static_cast<std::size_t>(K - 1)]};
  return vp;
}

VerificationProblem build_fista(const Mat& A, const LinearTerm& b_map, double lambda,
                                double t, int K, SetSpec Z, SetSpec Theta) {
  if (lambda < 0.0) throw NegativeLambda("lambda must be nonnegative");
  if (!(t > 0.0)) throw InvalidSchedule("t must be positive");
  if (K < 1) throw InvalidSchedule("K must be >= 1");
  const int m = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  if (b_map.dim() != m) throw DimensionMismatch("b_map dim != m");

  VerificationProblem vp;
  auto& g = vp.graph;
  vp.K = K;
  vp.init_var = g.add_initial("s0", 2 * n);  // stacked (z0, w0)
  vp.param_var = g.add_parameter("b", set_dim(Theta));
  vp.init_set = std::move(Z);
  vp.param_set = std::move(Theta);
  VarId boff = maybe_offset_var(g, b_map, "boff");
  VarId thr = g.add_constant("thr", Vec::Constant(n, lambda * t));

  const Mat I = Mat::Identity(n, n);
  const Mat At = I - t * A.transpose() * A;
  Mat Sz(n, 2 * n), Sw(n, 2 * n);  // slices of the stacked initial state
  Sz.setZero();
  Sw.setZero();
  Sz.leftCols(n) = I;
  Sw.rightCols(n) = I;

  VarId z_prev = vp.graph.add_affine_step(I, {{Sz, vp.init_var}}, "z0", 0);
  vp.iterates.push_back(z_prev);

  double beta_k = 1.0;
  VarId w_prev;  // invalid for k = 0, where the slice of s0 is used
  for (int k = 0; k < K; ++k) {
    const int begin = g.num_steps();
    std::vector<std::pair<Mat, VarId>> terms;
    if (k == 0) terms.emplace_back(At * Sw, vp.init_var);
    else terms.emplace_back(At, w_prev);
    push_linear_term(terms, t * A.transpose(), b_map, vp.param_var, boff);
    VarId y = g.add_affine_step(I, std::move(terms), iter_name("y", k + 1), k + 1);
    VarId z = emit_soft_threshold(g, y, thr, k + 1).z;

    const double beta_next = (1.0 + std::sqrt(1.0 + 4.0 * beta_k * beta_k)) / 2.0;
    const double gamma = (beta_k - 1.0) / beta_next;
    beta_k = beta_next;
    w_prev = g.add_affine_step(I, {{(1.0 + gamma) * I, z}, {-gamma * I, z_prev}},
                               iter_name("w", k + 1), k + 1);
    z_prev = z;
    vp.iteration_steps.emplace_back(begin, g.num_steps());
    vp.iterates.push_back(z);
  }
  vp.objective_pair = {vp.iterates[static_cast<std::size_t>(K)],
                       vp.iterates[static_cast<std::size_t>(K - 1)]};
  return vp;
}

// ---------------------------------------------------------------------------
// ADMM (QP-solver form) over iterate z = (x, v)
// ---------------------------------------------------------------------------

VerificationProblem build_osqp_admm(const Mat& P, const Mat& A, const AdmmConfig& config,
                                    const LinearTerm& l_map, const LinearTerm& u_map, int K,
                                    SetSpec Z, SetSpec Theta) {
  if (K < 1) throw InvalidSchedule("K must be >= 1");
  require_psd(P, "admm P");
  const int n = static_cast<int>(P.rows());
  const int m = static_cast<int>(A.rows());
  if (A.cols() != n) throw DimensionMismatch("A cols != n");
  if (l_map.dim() != m || u_map.dim() != m) throw DimensionMismatch("bound map dim != m");
  if (!(config.sigma > 0.0)) throw InvalidRho("sigma must be positive");
  Vec rho;
  if (config.rho.size() == 1) rho = Vec::Constant(m, config.rho[0]);
  else if (config.rho.size() == m) rho = config.rho;
  else throw InvalidRho("rho must be a scalar or have m entries");
  if ((rho.array() <= 0.0).any()) throw InvalidRho("rho entries must be positive");

  // mask infinite bound rows; they are excluded from the projection's active set
  auto masked = [&](const LinearTerm& map, std::vector<int>& active) {
    LinearTerm out = map;
    active.clear();
    for (int i = 0; i < m; ++i) {
      if (std::isfinite(map.offset[i])) {
        active.push_back(i);
      } else {
        out.offset[i] = 0.0;
        if (out.W.size() > 0) out.W.row(i).setZero();
      }
    }
    return out;
  };
  std::vector<int> l_active, u_active;
  const LinearTerm lm = masked(l_map, l_active);
  const LinearTerm um = masked(u_map, u_active);

  VerificationProblem vp;
  auto& g = vp.graph;
  vp.K = K;
  vp.init_var = g.add_initial("z0", n + m);  // stacked (x0, v0)
  vp.param_var = g.add_parameter("theta", set_dim(Theta));
  vp.init_set = std::move(Z);
  vp.param_set = std::move(Theta);

  const Mat Im = Mat::Identity(m, m);
  const Mat In = Mat::Identity(n, n);
  Mat Sx(n, n + m), Sv(m, n + m);
  Sx.setZero();
  Sv.setZero();
  Sx.leftCols(n) = In;
  Sv.rightCols(m) = Im;

  // parametric thresholds, built once: l(theta) and -u(theta); maps without a
  // theta part collapse to constants
  LinearTerm num{-um.W, -um.offset};
  auto threshold_var = [&](const LinearTerm& map, const char* name,
                           const char* offset_name) {
    if (map.W.size() == 0 || map.W.cwiseAbs().maxCoeff() == 0.0) {
      return g.add_constant(name, map.offset);
    }
    VarId off = maybe_offset_var(g, map, offset_name);
    std::vector<std::pair<Mat, VarId>> terms;
    push_linear_term(terms, Im, map, vp.param_var, off);
    return g.add_affine_step(Im, std::move(terms), name, 0);
  };
  VarId lvar = threshold_var(lm, "lb", "loff");
  VarId nuvar = threshold_var(num, "nub", "nuoff");

  const Mat rhoA = rho.asDiagonal() * A;
  const Mat D = P + config.sigma * In + A.transpose() * rhoA;
  const Mat Arho_t = A.transpose() * rho.asDiagonal();

  vp.iterates.push_back(vp.init_var);
  VarId x_cur, v_cur;  // invalid before the first iteration
  for (int k = 0; k < K; ++k) {
    const int begin = g.num_steps();
    // w = Pi_[l,u](v) = max(-max(-v, -u), l)
    VarId nv;
    if (k == 0) nv = g.add_affine_step(Im, {{-Sv, vp.init_var}}, iter_name("nv", k + 1), k + 1);
    else nv = g.add_affine_step(Im, {{-Im, v_cur}}, iter_name("nv", k + 1), k + 1);
    VarId m1 = g.add_max_step(nv, nuvar, u_active, iter_name("cu", k + 1), k + 1);
    VarId nm1 = g.add_affine_step(Im, {{-Im, m1}}, iter_name("ncu", k + 1), k + 1);
    VarId w = g.add_max_step(nm1, lvar, l_active, iter_name("pw", k + 1), k + 1);

    // (P + sigma I + A' rho A) x+ = sigma x + A' rho (2w - v)
    std::vector<std::pair<Mat, VarId>> xterms;
    if (k == 0) {
      xterms.emplace_back(config.sigma * Sx, vp.init_var);
      xterms.emplace_back(-(Arho_t * Sv), vp.init_var);
    } else {
      xterms.emplace_back(config.sigma * In, x_cur);
      xterms.emplace_back(-Arho_t, v_cur);
    }
    xterms.emplace_back(2.0 * Arho_t, w);
    VarId x_next = g.add_affine_step(D, std::move(xterms), iter_name("x", k + 1), k + 1);

    // v+ = rho A x+ + (I + rho) v - (2 rho + I) w
    std::vector<std::pair<Mat, VarId>> vterms;
    vterms.emplace_back(rhoA, x_next);
    if (k == 0) vterms.emplace_back((Im + Mat(rho.asDiagonal())) * Sv, vp.init_var);
    else vterms.emplace_back(Im + Mat(rho.asDiagonal()), v_cur);
    vterms.emplace_back(-(2.0 * Mat(rho.asDiagonal()) + Im), w);
    VarId v_next = g.add_affine_step(Im, std::move(vterms), iter_name("v", k + 1), k + 1);

    // stacked iterate for residual bookkeeping
    Mat Ex(n + m, n), Ev(n + m, m);
    Ex.setZero();
    Ev.setZero();
    Ex.topRows(n) = In;
    Ev.bottomRows(m) = Im;
    VarId zs = g.add_affine_step(Mat::Identity(n + m, n + m), {{Ex, x_next}, {Ev, v_next}},
                                 iter_name("z", k + 1), k + 1);
    x_cur = x_next;
    v_cur = v_next;
    vp.iteration_steps.emplace_back(begin, g.num_steps());
    vp.iterates.push_back(zs);
  }
  vp.objective_pair = {vp.iterates[static_cast<std::size_t>(K)],
                       vp.iterates[static_cast<std::size_t>(K - 1)]};
  return vp;
}

// ---------------------------------------------------------------------------
// condensed control QP
// ---------------------------------------------------------------------------

MpcQpData build_mpc_qp(double h, double eta, double mass, double gamma, double u_max,
                       double d_max, int T) {
  if (T < 2) throw InvalidHorizon("T must be >= 2");
  if (!(h > 0.0) || !(mass > 0.0)) throw InvalidHorizon("h and mass must be positive");

  MpcQpData out;
  out.T = T;
  Mat Ad = Mat::Identity(4, 4);
  Ad(0, 2) = h;
  Ad(1, 3) = h;
  Ad(2, 2) = 1.0 - h * eta / mass;
  Ad(3, 3) = 1.0 - h * eta / mass;
  Mat Bd = Mat::Zero(4, 2);
  Bd(2, 0) = h / mass;
  Bd(3, 1) = h / mass;
  Mat C = Mat::Zero(2, 4);
  C(0, 0) = 1.0;
  C(1, 1) = 1.0;
  out.A_dyn = Ad;
  out.B_dyn = Bd;
  out.C = C;

  const int nu = 2 * (T - 1);
  const int p = 6;  // theta = (sbar, u0)

  // input-to-state map for s_2..s_T
  Mat Gamma = Mat::Zero(4 * (T - 1), nu);
  std::vector<Mat> Apow(static_cast<std::size_t>(T), Mat::Identity(4, 4));
  for (int i = 1; i < T; ++i) Apow[static_cast<std::size_t>(i)] = Ad * Apow[static_cast<std::size_t>(i - 1)];
  for (int t = 2; t <= T; ++t) {
    for (int j = 1; j <= t - 1; ++j) {
      Gamma.block(4 * (t - 2), 2 * (j - 1), 4, 2) = Apow[static_cast<std::size_t>(t - 1 - j)] * Bd;
    }
  }
  Mat Cbar = Mat::Zero(2 * (T - 1), 4 * (T - 1));
  for (int t = 0; t < T - 1; ++t) Cbar.block(2 * t, 4 * t, 2, 4) = C;
  out.P = (Cbar * Gamma).transpose() * (Cbar * Gamma) + gamma * Mat::Identity(nu, nu);

  const int rows = 4 * (T - 1);
  out.A = Mat::Zero(rows, nu);
  Mat Wl = Mat::Zero(rows, p), Wu = Mat::Zero(rows, p);
  Vec l0 = Vec::Zero(rows), u0 = Vec::Zero(rows);

  int r = 0;
  // committed first moves: u_1 = u0 - B' sbar, and u_2 = u0 - B' Ad sbar when
  // the horizon has a second stage
  const Mat G1 = Bd.transpose();
  const Mat G2 = Bd.transpose() * Ad;
  {
    out.A.block(r, 0, 2, 2) = Mat::Identity(2, 2);
    Wl.block(r, 0, 2, 4) = -G1;
    Wl.block(r, 4, 2, 2) = Mat::Identity(2, 2);
    Wu.block(r, 0, 2, 4) = -G1;
    Wu.block(r, 4, 2, 2) = Mat::Identity(2, 2);
    r += 2;
  }
  if (T >= 3) {
    out.A.block(r, 2, 2, 2) = Mat::Identity(2, 2);
    Wl.block(r, 0, 2, 4) = -G2;
    Wl.block(r, 4, 2, 2) = Mat::Identity(2, 2);
    Wu.block(r, 0, 2, 4) = -G2;
    Wu.block(r, 4, 2, 2) = Mat::Identity(2, 2);
    r += 2;
  }
  // input boxes on u_1..u_{T-2}
  for (int t = 1; t <= T - 2; ++t) {
    out.A.block(r, 2 * (t - 1), 2, 2) = Mat::Identity(2, 2);
    l0.segment(r, 2).setConstant(-u_max);
    u0.segment(r, 2).setConstant(u_max);
    r += 2;
  }
  // slew constraints on u_1 - u_0, ..., u_{T-2} - u_{T-3}
  for (int t = 1; t <= T - 2; ++t) {
    out.A.block(r, 2 * (t - 1), 2, 2) = Mat::Identity(2, 2);
    if (t == 1) {
      Wl.block(r, 4, 2, 2) = Mat::Identity(2, 2);
      Wu.block(r, 4, 2, 2) = Mat::Identity(2, 2);
    } else {
      out.A.block(r, 2 * (t - 2), 2, 2) = -Mat::Identity(2, 2);
    }
    l0.segment(r, 2).setConstant(-d_max);
    u0.segment(r, 2).setConstant(d_max);
    r += 2;
  }
  if (r != rows) throw InvalidHorizon("row accounting failed");

  out.l_map = LinearTerm{Wl, l0};
  out.u_map = LinearTerm{Wu, u0};
  return out;
}

}  // namespace qpcert
