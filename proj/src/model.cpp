#include "qpcert/model.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace qpcert {

// ---------------------------------------------------------------------------
// SetSpec helpers
// ---------------------------------------------------------------------------

int set_dim(const SetSpec& s) {
  return std::visit(
      [](const auto& v) -> int {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Hypercube>) return static_cast<int>(v.l.size());
        else if constexpr (std::is_same_v<T, Polyhedron>) return static_cast<int>(v.A.cols());
        else if constexpr (std::is_same_v<T, Singleton>) return static_cast<int>(v.v.size());
        else return static_cast<int>(v.c.size());
      },
      s);
}

bool set_is_singleton(const SetSpec& s) { return set_pinned_value(s).has_value(); }

std::optional<Vec> set_pinned_value(const SetSpec& s) {
  if (const auto* p = std::get_if<Singleton>(&s)) return p->v;
  if (const auto* h = std::get_if<Hypercube>(&s)) {
    if (h->l.size() > 0 && (h->u - h->l).cwiseAbs().maxCoeff() == 0.0) return h->l;
    if (h->l.size() == 0) return h->l;
    return std::nullopt;
  }
  if (const auto* b1 = std::get_if<L1Ball>(&s)) {
    if (b1->r == 0.0) return b1->c;
  }
  if (const auto* b2 = std::get_if<L2Ball>(&s)) {
    if (b2->r == 0.0) return b2->c;
  }
  if (const auto* bi = std::get_if<LinfBall>(&s)) {
    if (bi->r == 0.0) return bi->c;
  }
  return std::nullopt;
}

bool set_contains(const SetSpec& s, const Vec& v, double tol) {
  return std::visit(
      [&](const auto& sp) -> bool {
        using T = std::decay_t<decltype(sp)>;
        if constexpr (std::is_same_v<T, Hypercube>) {
          for (int i = 0; i < v.size(); ++i) {
            if (v[i] < sp.l[i] - tol || v[i] > sp.u[i] + tol) return false;
          }
          return true;
        } else if constexpr (std::is_same_v<T, Polyhedron>) {
          return ((sp.A * v - sp.b).array() <= tol).all();
        } else if constexpr (std::is_same_v<T, L1Ball>) {
          return (v - sp.c).template lpNorm<1>() <= sp.r + tol;
        } else if constexpr (std::is_same_v<T, L2Ball>) {
          return (v - sp.c).norm() <= sp.r + tol;
        } else if constexpr (std::is_same_v<T, LinfBall>) {
          return (v - sp.c).template lpNorm<Eigen::Infinity>() <= sp.r + tol;
        } else {
          return (v - sp.v).template lpNorm<Eigen::Infinity>() <= tol;
        }
      },
      s);
}

// ---------------------------------------------------------------------------
// IterationGraph
// ---------------------------------------------------------------------------

VarId IterationGraph::add_var(std::string name, int dim, VarKind kind, int iteration,
                              Vec value) {
  if (name.empty()) name = "v" + std::to_string(vars_.size());
  for (const auto& v : vars_) {
    if (v.name == name) throw Error("duplicate variable name: " + name);
  }
  VarInfo info;
  info.name = std::move(name);
  info.iteration = iteration;
  info.dim = dim;
  info.kind = kind;
  info.value = std::move(value);
  vars_.push_back(std::move(info));
  producer_.push_back(-1);
  return VarId{static_cast<std::int32_t>(vars_.size() - 1)};
}

VarId IterationGraph::add_initial(std::string name, int dim, int iteration) {
  return add_var(std::move(name), dim, VarKind::Initial, iteration);
}

VarId IterationGraph::add_parameter(std::string name, int dim) {
  return add_var(std::move(name), dim, VarKind::Parameter, 0);
}

VarId IterationGraph::add_constant(std::string name, Vec value) {
  const int d = static_cast<int>(value.size());
  return add_var(std::move(name), d, VarKind::Constant, 0, std::move(value));
}

void IterationGraph::require_known(VarId v) const {
  if (!v.valid() || v.idx >= static_cast<std::int32_t>(vars_.size())) {
    throw UnknownVariable("variable id " + std::to_string(v.idx) + " not defined");
  }
}

const VarInfo& IterationGraph::info(VarId v) const {
  require_known(v);
  return vars_[static_cast<std::size_t>(v.idx)];
}

int IterationGraph::producer(VarId v) const {
  require_known(v);
  return producer_[static_cast<std::size_t>(v.idx)];
}

std::optional<VarId> IterationGraph::find(const std::string& name) const {
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    if (vars_[i].name == name) return VarId{static_cast<std::int32_t>(i)};
  }
  return std::nullopt;
}

namespace {

double condition_estimate(const Mat& D) {
  if (D.rows() == 0) return 1.0;
  Eigen::JacobiSVD<Mat> svd(D);
  const double smax = svd.singularValues()(0);
  const double smin = svd.singularValues()(svd.singularValues().size() - 1);
  if (smin <= 0.0 || smax == 0.0) return kInf;
  return smax / smin;
}

}  // namespace

VarId IterationGraph::add_affine_step(const Mat& D, std::vector<std::pair<Mat, VarId>> terms,
                                      std::string name, int iteration) {
  if (D.rows() != D.cols()) throw DimensionMismatch("affine step: D must be square");
  const int d = static_cast<int>(D.rows());

  // coalesce duplicate inputs so each variable appears once
  std::vector<std::pair<Mat, VarId>> merged;
  for (auto& [A, x] : terms) {
    require_known(x);
    if (A.rows() != d) throw DimensionMismatch("affine step: coefficient rows != output dim");
    if (A.cols() != dim(x)) {
      throw DimensionMismatch("affine step: coefficient cols != dim(" + this->name(x) + ")");
    }
    bool found = false;
    for (auto& [B, y] : merged) {
      if (y == x) {
        B += A;
        found = true;
        break;
      }
    }
    if (!found) merged.emplace_back(std::move(A), x);
  }

  const double cond = condition_estimate(D);
  if (!(cond < kCondLimit)) {
    throw SingularD("affine step: condition estimate " + std::to_string(cond) +
                    " exceeds 1e12");
  }

  VarId out = add_var(std::move(name), d, VarKind::StepOutput, iteration);
  AffineStep st;
  st.out = out;
  st.D = D;
  st.terms = std::move(merged);
  st.factor = Eigen::PartialPivLU<Mat>(D);
  st.cond_estimate = cond;
  steps_.push_back(std::move(st));
  producer_.back() = static_cast<int>(steps_.size() - 1);
  return out;
}

VarId IterationGraph::add_max_step(VarId lhs, VarId rhs, std::vector<int> active,
                                   std::string name, int iteration) {
  require_known(lhs);
  require_known(rhs);
  if (dim(lhs) != dim(rhs)) throw DimensionMismatch("max step: operand dims differ");
  const int d = dim(lhs);
  std::sort(active.begin(), active.end());
  active.erase(std::unique(active.begin(), active.end()), active.end());
  for (int i : active) {
    if (i < 0 || i >= d) throw DimensionMismatch("max step: active index out of range");
  }
  if (active.empty()) {
    warnings_.push_back("max step producing '" + (name.empty() ? "v" + std::to_string(vars_.size()) : name) +
                        "' has an empty active set (pure copy)");
  }
  VarId out = add_var(std::move(name), d, VarKind::StepOutput, iteration);
  steps_.push_back(MaxStep{out, lhs, rhs, std::move(active)});
  producer_.back() = static_cast<int>(steps_.size() - 1);
  return out;
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

namespace {

void check_set(const SetSpec& s, int expect_dim, const std::string& label,
               std::vector<Violation>& out) {
  if (set_dim(s) != expect_dim) {
    out.push_back({"SetSpec", label + ": set dim " + std::to_string(set_dim(s)) +
                                  " != variable dim " + std::to_string(expect_dim)});
  }
  if (const auto* h = std::get_if<Hypercube>(&s)) {
    if (h->l.size() != h->u.size()) {
      out.push_back({"SetSpec", label + ": hypercube l/u dims differ"});
      return;
    }
    for (int i = 0; i < h->l.size(); ++i) {
      if (std::isfinite(h->l[i]) && std::isfinite(h->u[i]) && h->l[i] > h->u[i]) {
        out.push_back({"SetSpec", label + ": hypercube l > u at coordinate " +
                                      std::to_string(i)});
      }
    }
  } else if (const auto* p = std::get_if<Polyhedron>(&s)) {
    if (p->A.rows() != p->b.size()) {
      out.push_back({"SetSpec", label + ": polyhedron A rows != b size"});
    }
  } else if (const auto* b1 = std::get_if<L1Ball>(&s)) {
    if (b1->r < 0) out.push_back({"SetSpec", label + ": negative radius"});
  } else if (const auto* b2 = std::get_if<L2Ball>(&s)) {
    if (b2->r < 0) out.push_back({"SetSpec", label + ": negative radius"});
  } else if (const auto* bi = std::get_if<LinfBall>(&s)) {
    if (bi->r < 0) out.push_back({"SetSpec", label + ": negative radius"});
  }
}

}  // namespace

ValidationReport validate(const VerificationProblem& vp) {
  ValidationReport rep;
  const auto& g = vp.graph;

  // step references must point at earlier variables, dims must conform
  std::vector<bool> defined(static_cast<std::size_t>(g.num_vars()), false);
  for (int i = 0; i < g.num_vars(); ++i) {
    const auto& inf = g.info(VarId{i});
    if (inf.kind != VarKind::StepOutput) defined[static_cast<std::size_t>(i)] = true;
  }
  for (int si = 0; si < g.num_steps(); ++si) {
    const Step& s = g.step(si);
    if (const auto* a = std::get_if<AffineStep>(&s)) {
      for (const auto& [A, x] : a->terms) {
        if (!defined[static_cast<std::size_t>(x.idx)]) {
          rep.violations.push_back(
              {"UnknownVariable", "step " + std::to_string(si) + " reads '" + g.name(x) +
                                      "' before it is defined"});
        }
        if (A.cols() != g.dim(x) || A.rows() != g.dim(a->out)) {
          rep.violations.push_back({"DimensionMismatch",
                                    "step " + std::to_string(si) + " coefficient shape"});
        }
      }
      if (!(a->cond_estimate < IterationGraph::kCondLimit)) {
        rep.violations.push_back({"SingularD", "step " + std::to_string(si)});
      }
    } else if (const auto* m = std::get_if<MaxStep>(&s)) {
      for (VarId x : {m->lhs, m->rhs}) {
        if (!defined[static_cast<std::size_t>(x.idx)]) {
          rep.violations.push_back(
              {"UnknownVariable", "step " + std::to_string(si) + " reads '" + g.name(x) +
                                      "' before it is defined"});
        }
      }
      if (g.dim(m->lhs) != g.dim(m->rhs)) {
        rep.violations.push_back({"DimensionMismatch", "step " + std::to_string(si)});
      }
    }
    defined[static_cast<std::size_t>(step_out(s).idx)] = true;
  }

  if (!vp.init_var.valid() || !vp.param_var.valid()) {
    rep.violations.push_back({"Structure", "init/param variable missing"});
    return rep;
  }
  check_set(vp.init_set, g.dim(vp.init_var), "Z", rep.violations);
  check_set(vp.param_set, g.dim(vp.param_var), "Theta", rep.violations);

  const auto [zk, zk1] = vp.objective_pair;
  if (!zk.valid() || !zk1.valid()) {
    rep.violations.push_back({"Structure", "objective pair missing"});
  } else if (g.dim(zk) != g.dim(zk1)) {
    rep.violations.push_back({"DimensionMismatch", "objective pair dims differ"});
  }
  return rep;
}

// ---------------------------------------------------------------------------
// forward evaluation
// ---------------------------------------------------------------------------

void eval_steps(const IterationGraph& g, int begin, int end, std::vector<Vec>& values) {
  for (int si = begin; si < end; ++si) {
    const Step& s = g.step(si);
    if (const auto* a = std::get_if<AffineStep>(&s)) {
      Vec rhs = Vec::Zero(g.dim(a->out));
      for (const auto& [A, x] : a->terms) rhs.noalias() += A * values[static_cast<std::size_t>(x.idx)];
      values[static_cast<std::size_t>(a->out.idx)] = a->factor.solve(rhs);
    } else {
      const auto& m = std::get<MaxStep>(s);
      Vec y = values[static_cast<std::size_t>(m.lhs.idx)];
      const Vec& r = values[static_cast<std::size_t>(m.rhs.idx)];
      for (int i : m.active) y[i] = std::max(y[i], r[i]);
      values[static_cast<std::size_t>(m.out.idx)] = std::move(y);
    }
  }
}

Trajectory forward_eval(const VerificationProblem& vp, const Vec& z0, const Vec& theta) {
  const auto& g = vp.graph;
  if (z0.size() != g.dim(vp.init_var)) throw DimensionMismatch("forward_eval: z0 dim");
  if (theta.size() != g.dim(vp.param_var)) throw DimensionMismatch("forward_eval: theta dim");

  Trajectory tr;
  tr.values.resize(static_cast<std::size_t>(g.num_vars()));
  for (int i = 0; i < g.num_vars(); ++i) {
    const auto& inf = g.info(VarId{i});
    if (inf.kind == VarKind::Constant) tr.values[static_cast<std::size_t>(i)] = inf.value;
  }
  tr.values[static_cast<std::size_t>(vp.init_var.idx)] = z0;
  tr.values[static_cast<std::size_t>(vp.param_var.idx)] = theta;
  eval_steps(g, 0, g.num_steps(), tr.values);
  return tr;
}

}  // namespace qpcert
