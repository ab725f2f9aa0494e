#include "qpcert/fixtures.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <cmath>

#include "qpcert/rng.hpp"
#include "qpcert/sample.hpp"

namespace qpcert {

namespace {

Mat randn(Rng& rng, int rows, int cols) {
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  }
  return m;
}

ExperimentConfig base_config(const std::string& name) {
  ExperimentConfig cfg;
  cfg.sample_n = 10000;
  cfg.seed = 20240831;
  cfg.out_dir = "out/" + name;
  return cfg;
}

ExperimentConfig uqp_k1() {
  ExperimentConfig cfg = base_config("uqp-k1");
  cfg.family = "unconstrained";
  Mat P(2, 2);
  P << 1.0, 0.0, 0.0, 10.0;
  cfg.params["P"] = mat_to_json(P);
  cfg.params["t"] = 2.0 / 11.0;
  cfg.params["mode"] = "iterate";
  cfg.k_min = cfg.k_max = 1;
  cfg.z_set = L2Ball{Vec::Zero(2), 1.0};
  cfg.theta_set = Singleton{Vec::Zero(2)};
  return cfg;
}

ExperimentConfig nnls_desk() {
  ExperimentConfig cfg = base_config("nnls-desk");
  cfg.family = "nnls";
  Rng rng(7001);
  const int m = 15, n = 10;
  const Mat A = randn(rng, m, n);
  Eigen::SelfAdjointEigenSolver<Mat> eig(A.transpose() * A, Eigen::EigenvaluesOnly);
  const double L = eig.eigenvalues().maxCoeff();
  cfg.params["A"] = mat_to_json(A);
  cfg.params["schedule"] = std::vector<double>{2.0 / L};
  cfg.k_min = 1;
  cfg.k_max = 5;
  // half the target coordinates away from zero, small relative radius
  Vec c = Vec::Zero(m);
  for (int i = 0; i < m / 2 + 1; ++i) c[i] = 3.0;
  cfg.theta_set = L2Ball{c, 0.05};
  cfg.z_set = Singleton{Vec::Zero(n)};
  return cfg;
}

ExperimentConfig num_desk() {
  ExperimentConfig cfg = base_config("num-desk");
  cfg.family = "num";
  Rng rng(7002);
  // small network so the K <= 5 relaxations solve inside the desk budget
  const int p = 3, n = 2;
  Mat R = Mat::Zero(p, n);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < n; ++j) R(i, j) = rng.bernoulli(0.5) ? 1.0 : 0.0;
  }
  for (int j = 0; j < n; ++j) {
    if (R.col(j).sum() == 0.0) R(j % p, j) = 1.0;
  }
  for (int i = 0; i < p; ++i) {
    if (R.row(i).sum() == 0.0) R(i, i % n) = 1.0;
  }
  Vec w(n), s(n);
  for (int j = 0; j < n; ++j) w[j] = rng.uniform();
  for (int j = 0; j < n; ++j) s[j] = rng.uniform(0.4, 0.5);

  const int m = p + 2 * n;
  Mat Alp(m, n);
  Alp.topRows(p) = R;
  Alp.block(p, 0, n, n) = -Mat::Identity(n, n);
  Alp.bottomRows(n) = Mat::Identity(n, n);
  Mat M = Mat::Zero(n + m, n + m);
  M.topRightCorner(n, m) = Alp.transpose();
  M.bottomLeftCorner(m, n) = -Alp;

  // q(theta) = (c, theta, 0, s) with c = -w
  Mat qW = Mat::Zero(n + m, p);
  qW.block(n, 0, p, p) = Mat::Identity(p, p);
  Vec q0 = Vec::Zero(n + m);
  q0.head(n) = -w;
  q0.tail(n) = s;

  cfg.params["M"] = mat_to_json(M);
  cfg.params["n"] = n;
  cfg.params["m"] = m;
  cfg.params["q_W"] = mat_to_json(qW);
  cfg.params["q_offset"] = vec_to_json(q0);
  cfg.k_min = 1;
  cfg.k_max = 5;
  cfg.theta_set = L2Ball{Vec::Constant(p, 1.0), 0.04};

  // warm start from the splitting fixed point at the center capacity
  Vec zbar = Vec::Zero(n + m);
  {
    const Vec qc = qW * Vec::Constant(p, 1.0) + q0;
    Eigen::PartialPivLU<Mat> solver(M + Mat::Identity(n + m, n + m));
    for (int it = 0; it < 200000; ++it) {
      Vec u = solver.solve(zbar - qc);
      Vec ut = 2.0 * u - zbar;
      ut.tail(m) = ut.tail(m).cwiseMax(0.0);
      Vec znext = zbar + ut - u;
      const double r = (znext - zbar).norm();
      zbar = znext;
      if (r < 1e-11) break;
    }
  }
  cfg.z_set = Singleton{zbar};
  return cfg;
}

ExperimentConfig lasso_desk() {
  ExperimentConfig cfg = base_config("lasso-desk");
  cfg.family = "lasso";
  Rng rng(7003);
  const int m = 5, n = 7;  // underdetermined, desk sized
  const Mat A = randn(rng, m, n);
  Eigen::SelfAdjointEigenSolver<Mat> eig(A.transpose() * A, Eigen::EigenvaluesOnly);
  cfg.params["A"] = mat_to_json(A);
  cfg.params["lambda"] = 10.0;
  cfg.params["t"] = 1.0 / eig.eigenvalues().maxCoeff();
  cfg.params["algorithm"] = "ista";
  cfg.k_min = 1;
  cfg.k_max = 5;
  cfg.theta_set = L2Ball{Vec::Constant(m, 10.0), 0.25};
  // start from the least-squares solution of one sampled right-hand side
  const Vec bbar = sample_set(cfg.theta_set, 1, 7103)[0];
  const Vec zbar = A.completeOrthogonalDecomposition().solve(bbar);
  cfg.z_set = Singleton{zbar};
  return cfg;
}

ExperimentConfig control_desk() {
  ExperimentConfig cfg = base_config("control-desk");
  cfg.family = "control";
  const double h = 0.1, eta = 0.1, mass = 1.0, gamma = 0.2;
  const double u_max = 2.0, d_max = 0.2;
  const int T = 3;  // desk horizon; the full T=5 shapes are covered in unit tests
  MpcQpData qp = build_mpc_qp(h, eta, mass, gamma, u_max, d_max, T);
  const int nu = static_cast<int>(qp.P.rows());
  const int mc = static_cast<int>(qp.A.rows());

  const double sigma = 1e-6;
  Vec rho = Vec::Ones(mc);
  for (int i = 0; i < 4; ++i) rho[i] = 10.0;  // equality rows get the large step

  // closed-loop runs generate the parameter and warm-start hypercubes
  Eigen::LLT<Mat> solver((qp.P + sigma * Mat::Identity(nu, nu) +
                          qp.A.transpose() * rho.asDiagonal() * qp.A));
  auto solve_qp = [&](const Vec& theta, Vec& x, Vec& v) {
    const Vec l = qp.l_map.eval(theta);
    const Vec u = qp.u_map.eval(theta);
    for (int it = 0; it < 20000; ++it) {
      const Vec w = v.cwiseMax(l).cwiseMin(u);
      const Vec x_new = solver.solve(sigma * x + qp.A.transpose() * (rho.asDiagonal() * (2.0 * w - v)));
      const Vec v_new = rho.asDiagonal() * (qp.A * x_new) + v + rho.asDiagonal() * v - 2.0 * (rho.asDiagonal() * w) - w;
      const double r = (x_new - x).norm() + (v_new - v).norm();
      x = x_new;
      v = v_new;
      if (r < 1e-11) break;
    }
  };

  Rng rng(7004);
  Vec theta_lo = Vec::Constant(6, kInf), theta_hi = Vec::Constant(6, -kInf);
  Vec z_lo = Vec::Constant(nu + mc, kInf), z_hi = Vec::Constant(nu + mc, -kInf);
  for (int rep = 0; rep < 3; ++rep) {
    Vec sbar(4);
    sbar << 1.0, 1.0, 0.0, 0.0;
    Vec u0 = Vec::Zero(2);
    Vec x = Vec::Zero(nu), v = Vec::Zero(mc);
    for (int step = 0; step < 25; ++step) {
      Vec theta(6);
      theta.head(4) = sbar;
      theta.tail(2) = u0;
      theta_lo = theta_lo.cwiseMin(theta);
      theta_hi = theta_hi.cwiseMax(theta);

      solve_qp(theta, x, v);
      Vec u_apply = x.head(2).cwiseMax(-u_max).cwiseMin(u_max);

      // one-step shift warm start
      Vec x_ws(nu);
      x_ws.head(nu - 2) = x.tail(nu - 2);
      x_ws.tail(2) = x.tail(2);
      Vec z_ws(nu + mc);
      z_ws.head(nu) = x_ws;
      z_ws.tail(mc) = rho.asDiagonal() * (qp.A * x_ws);
      z_lo = z_lo.cwiseMin(z_ws);
      z_hi = z_hi.cwiseMax(z_ws);

      Vec noise(4);
      for (int i = 0; i < 4; ++i) noise[i] = 1e-3 * rng.normal();
      sbar = qp.A_dyn * sbar + qp.B_dyn * u_apply + noise;
      u0 = u_apply;
    }
  }

  cfg.params["P"] = mat_to_json(qp.P);
  cfg.params["A"] = mat_to_json(qp.A);
  cfg.params["sigma"] = sigma;
  cfg.params["rho"] = vec_to_json(rho);
  cfg.params["l_W"] = mat_to_json(qp.l_map.W);
  cfg.params["l_offset"] = vec_to_json(qp.l_map.offset);
  cfg.params["u_W"] = mat_to_json(qp.u_map.W);
  cfg.params["u_offset"] = vec_to_json(qp.u_map.offset);
  cfg.k_min = 1;
  cfg.k_max = 5;
  cfg.theta_set = Hypercube{theta_lo, theta_hi};
  cfg.z_set = Hypercube{z_lo, z_hi};
  return cfg;
}

ExperimentConfig nphard_n2() {
  ExperimentConfig cfg = base_config("nphard-n2");
  cfg.family = "custom-graph";
  cfg.k_min = cfg.k_max = 1;
  cfg.sample_n = 2000;

  VerificationProblem vp;
  auto& g = vp.graph;
  vp.K = 1;
  vp.init_var = g.add_initial("x0", 2);
  vp.param_var = g.add_parameter("qv", 2);
  VarId y0 = g.add_constant("y0", Vec::Zero(2));
  const Mat I = Mat::Identity(2, 2);
  const int begin = g.num_steps();
  VarId y1 = g.add_affine_step(I, {{I, vp.init_var}, {-0.5 * I, vp.param_var}}, "y1", 1);
  vp.iteration_steps.emplace_back(begin, g.num_steps());
  vp.objective_pair = {y1, y0};
  vp.iterates = {y0, y1};

  // x in the segment {x1 + x2 = 1, 0 <= x <= 1}
  Mat Ap(6, 2);
  Ap << 1, 1, -1, -1, -1, 0, 0, -1, 1, 0, 0, 1;
  Vec bp(6);
  bp << 1, -1, 0, 0, 1, 1;
  vp.init_set = Polyhedron{Ap, bp};
  vp.param_set = Singleton{Vec::Ones(2)};
  cfg.z_set = vp.init_set;
  cfg.theta_set = vp.param_set;
  cfg.params["graph"] = vp_to_json(vp);
  return cfg;
}

}  // namespace

std::vector<std::string> fixture_names() {
  return {"uqp-k1", "nnls-desk", "num-desk", "lasso-desk", "control-desk", "nphard-n2"};
}

ExperimentConfig fixture(const std::string& name) {
  if (name == "uqp-k1") return uqp_k1();
  if (name == "nnls-desk") return nnls_desk();
  if (name == "num-desk") return num_desk();
  if (name == "lasso-desk") return lasso_desk();
  if (name == "control-desk") return control_desk();
  if (name == "nphard-n2") return nphard_n2();
  throw UnknownFixture("unknown fixture '" + name + "'");
}

}  // namespace qpcert
