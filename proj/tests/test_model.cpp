#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <qpcert/model.hpp>
#include <qpcert/rng.hpp>

using namespace qpcert;

namespace {

Mat I2() { return Mat::Identity(2, 2); }

// minimal one-step identity problem
VerificationProblem identity_vp() {
  VerificationProblem vp;
  auto& g = vp.graph;
  vp.K = 1;
  vp.init_var = g.add_initial("z0", 2);
  vp.param_var = g.add_parameter("theta", 2);
  vp.init_set = L2Ball{Vec::Zero(2), 1.0};
  vp.param_set = Singleton{Vec::Zero(2)};
  VarId z1 = g.add_affine_step(I2(), {{I2(), vp.init_var}}, "z1", 1);
  vp.iterates = {vp.init_var, z1};
  vp.iteration_steps = {{0, 1}};
  vp.objective_pair = {z1, vp.init_var};
  return vp;
}

}  // namespace

TEST_CASE("affine step with identity maps is the identity") {
  VerificationProblem vp = identity_vp();
  Vec z0(2);
  z0 << 1.0, 2.0;
  Trajectory tr = forward_eval(vp, z0, Vec::Zero(2));
  CHECK(tr.at(vp.iterates[1]) == z0);
}

TEST_CASE("gradient step matches the diagonal hand computation") {
  // z1 = (I - tP) z0 - t theta with P = diag(1, 10), t = 2/11
  const double t = 2.0 / 11.0;
  Mat P(2, 2);
  P << 1, 0, 0, 10;
  VerificationProblem vp;
  auto& g = vp.graph;
  vp.K = 1;
  vp.init_var = g.add_initial("z0", 2);
  vp.param_var = g.add_parameter("theta", 2);
  vp.init_set = L2Ball{Vec::Zero(2), 1.0};
  vp.param_set = Singleton{Vec::Zero(2)};
  VarId z1 = g.add_affine_step(I2(), {{I2() - t * P, vp.init_var}, {-t * I2(), vp.param_var}},
                               "z1", 1);
  vp.iterates = {vp.init_var, z1};
  vp.iteration_steps = {{0, 1}};
  vp.objective_pair = {z1, vp.init_var};

  Vec z0(2);
  z0 << 1.0, 0.0;
  Trajectory tr = forward_eval(vp, z0, Vec::Zero(2));
  CHECK(tr.at(z1)[0] == doctest::Approx(9.0 / 11.0).epsilon(1e-15));
  CHECK(tr.at(z1)[1] == doctest::Approx(0.0));
}

TEST_CASE("singular D is rejected") {
  IterationGraph g;
  VarId x = g.add_initial("x", 2);
  CHECK_THROWS_AS(g.add_affine_step(Mat::Zero(2, 2), {{I2(), x}}), SingularD);
}

TEST_CASE("dimension mismatches are rejected") {
  IterationGraph g;
  VarId x = g.add_initial("x", 2);
  VarId y = g.add_constant("c", Vec::Zero(3));
  CHECK_THROWS_AS(g.add_affine_step(I2(), {{Mat::Identity(3, 3), x}}), DimensionMismatch);
  CHECK_THROWS_AS(g.add_max_step(x, y, {0}), DimensionMismatch);
}

TEST_CASE("max step forward semantics") {
  IterationGraph g;
  VarId lhs = g.add_constant("a", (Vec(2) << 1.0, -1.0).finished());
  VarId rhs = g.add_constant("b", Vec::Zero(2));
  VarId both = g.add_max_step(lhs, rhs, {0, 1}, "both");
  VarId none = g.add_max_step(lhs, rhs, {}, "none");
  CHECK(g.warnings().size() == 1);  // empty active set warns

  std::vector<Vec> values(static_cast<std::size_t>(g.num_vars()));
  values[0] = g.info(lhs).value;
  values[1] = g.info(rhs).value;
  eval_steps(g, 0, g.num_steps(), values);
  CHECK(values[static_cast<std::size_t>(both.idx)][0] == 1.0);
  CHECK(values[static_cast<std::size_t>(both.idx)][1] == 0.0);
  CHECK(values[static_cast<std::size_t>(none.idx)][1] == -1.0);
}

TEST_CASE("validate flags bad sets and accepts well-formed graphs") {
  VerificationProblem vp = identity_vp();
  CHECK(validate(vp).ok());

  Vec l(2), u(2);
  l << 1.0, 0.0;
  u << 0.0, 1.0;  // l > u on the first coordinate
  vp.init_set = Hypercube{l, u};
  auto rep = validate(vp);
  REQUIRE_FALSE(rep.ok());
  CHECK(rep.violations.front().code == "SetSpec");
}

TEST_CASE("validate reports objective dim mismatch") {
  VerificationProblem vp = identity_vp();
  VarId odd = vp.graph.add_constant("odd", Vec::Zero(3));
  vp.objective_pair = {vp.iterates[1], odd};
  auto rep = validate(vp);
  REQUIRE_FALSE(rep.ok());
  CHECK(rep.violations.front().code == "DimensionMismatch");
}

TEST_CASE("random graphs evaluate in topological order") {
  // construction forbids forward references, so evaluation never reads an
  // undefined value; probe with randomized DAGs
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    IterationGraph g;
    std::vector<VarId> pool;
    const int d = 2 + static_cast<int>(rng.raw() % 3);
    VerificationProblem vp;
    vp.init_var = g.add_initial("z0", d);
    vp.param_var = g.add_parameter("th", d);
    pool.push_back(vp.init_var);
    pool.push_back(vp.param_var);
    const int steps = 1 + static_cast<int>(rng.raw() % 6);
    for (int s = 0; s < steps; ++s) {
      const VarId a = pool[rng.raw() % pool.size()];
      const VarId b = pool[rng.raw() % pool.size()];
      if (rng.bernoulli(0.5)) {
        Mat A(d, d), B(d, d);
        for (int i = 0; i < d * d; ++i) {
          A(i / d, i % d) = rng.normal();
          B(i / d, i % d) = rng.normal();
        }
        pool.push_back(g.add_affine_step(Mat::Identity(d, d), {{A, a}, {B, b}},
                                         "v" + std::to_string(s) + "a"));
      } else {
        std::vector<int> active;
        for (int i = 0; i < d; ++i) {
          if (rng.bernoulli(0.7)) active.push_back(i);
        }
        if (active.empty()) active.push_back(0);
        pool.push_back(g.add_max_step(a, b, active, "v" + std::to_string(s) + "m"));
      }
    }
    vp.K = 1;
    vp.init_set = L2Ball{Vec::Zero(d), 1.0};
    vp.param_set = L2Ball{Vec::Zero(d), 1.0};
    vp.objective_pair = {pool.back(), pool.front()};
    vp.iterates = {vp.init_var, pool.back()};
    vp.iteration_steps = {{0, g.num_steps()}};
    std::swap(vp.graph, g);
    REQUIRE(validate(vp).ok());
    Vec z0(d), th(d);
    for (int i = 0; i < d; ++i) {
      z0[i] = rng.normal();
      th[i] = rng.normal();
    }
    Trajectory tr = forward_eval(vp, z0, th);
    for (const auto& v : tr.values) REQUIRE(v.allFinite());
  }
}

TEST_CASE("box projection decomposes into two max steps exactly") {
  // min(u, max(v, l)) built as max(-max(-v, -u), l)
  Rng rng(7);
  IterationGraph g;
  const int d = 4;
  VarId v = g.add_initial("v", d);
  Vec l(d), u(d);
  for (int i = 0; i < d; ++i) {
    l[i] = -0.5 - rng.uniform();
    u[i] = 0.5 + rng.uniform();
  }
  VarId lv = g.add_constant("l", l);
  VarId nuv = g.add_constant("nu", -u);
  Mat I = Mat::Identity(d, d);
  std::vector<int> all{0, 1, 2, 3};
  VarId nv = g.add_affine_step(I, {{-I, v}}, "nv");
  VarId m1 = g.add_max_step(nv, nuv, all, "m1");
  VarId nm1 = g.add_affine_step(I, {{-I, m1}}, "nm1");
  VarId w = g.add_max_step(nm1, lv, all, "w");

  for (int trial = 0; trial < 200; ++trial) {
    Vec x(d);
    for (int i = 0; i < d; ++i) x[i] = 3.0 * rng.normal();
    std::vector<Vec> values(static_cast<std::size_t>(g.num_vars()));
    values[static_cast<std::size_t>(v.idx)] = x;
    values[static_cast<std::size_t>(lv.idx)] = l;
    values[static_cast<std::size_t>(nuv.idx)] = -u;
    eval_steps(g, 0, g.num_steps(), values);
    const Vec got = values[static_cast<std::size_t>(w.idx)];
    const Vec want = x.cwiseMax(l).cwiseMin(u);
    REQUIRE((got - want).lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("singleton sampling equals direct evaluation") {
  VerificationProblem vp = identity_vp();
  Vec v(2);
  v << 0.25, -0.75;
  vp.init_set = Singleton{v};
  Trajectory direct = forward_eval(vp, v, Vec::Zero(2));
  // any sample of a singleton must give the same trajectory
  Trajectory sampled = forward_eval(vp, std::get<Singleton>(vp.init_set).v, Vec::Zero(2));
  CHECK(direct.at(vp.iterates[1]) == sampled.at(vp.iterates[1]));
}
