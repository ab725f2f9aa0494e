#pragma once

#include <Eigen/LU>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qpcert/types.hpp"

namespace qpcert {

// ---------------------------------------------------------------------------
// Convex regions for initial iterates, parameters, and constant thresholds.
// ---------------------------------------------------------------------------

struct Hypercube {
  Vec l, u;  // entries may be +-inf
};
struct Polyhedron {
  Mat A;  // A v <= b
  Vec b;
};
struct L1Ball {
  Vec c;
  double r = 0.0;
};
struct L2Ball {
  Vec c;
  double r = 0.0;
};
struct LinfBall {
  Vec c;
  double r = 0.0;
};
struct Singleton {
  Vec v;
};

using SetSpec = std::variant<Hypercube, Polyhedron, L1Ball, L2Ball, LinfBall, Singleton>;

int set_dim(const SetSpec& s);
bool set_is_singleton(const SetSpec& s);
// the fixed point when the set is a Singleton (or zero-radius ball / zero-width box)
std::optional<Vec> set_pinned_value(const SetSpec& s);
bool set_contains(const SetSpec& s, const Vec& v, double tol = 1e-9);

// ---------------------------------------------------------------------------
// Parametric QP family: (1/2) x'Px + q(theta)'x  s.t.  l(theta) <= Ax <= u(theta)
// ---------------------------------------------------------------------------

// Affine descriptor v(theta) = W * theta + offset.
struct LinearTerm {
  Mat W;
  Vec offset;

  LinearTerm() = default;
  LinearTerm(Mat W_, Vec offset_) : W(std::move(W_)), offset(std::move(offset_)) {}

  static LinearTerm identity(int n) { return {Mat::Identity(n, n), Vec::Zero(n)}; }
  static LinearTerm matrix(Mat W_) {
    Vec z = Vec::Zero(W_.rows());
    return {std::move(W_), std::move(z)};
  }
  static LinearTerm constant(Vec v, int p) {
    return {Mat::Zero(v.size(), p), std::move(v)};
  }

  int dim() const { return static_cast<int>(offset.size()); }
  int param_dim() const { return static_cast<int>(W.cols()); }
  Vec eval(const Vec& theta) const { return W * theta + offset; }
};

struct PqpFamily {
  Mat P;
  LinearTerm q_map;       // q(theta)
  Mat A;                  // m x n
  LinearTerm l_map, u_map;  // box bounds on Ax, entries may be +-inf in offset
};

// ---------------------------------------------------------------------------
// Iteration graph: vector variables produced by affine and element-wise-max
// steps. Construction is single-writer; once validated the graph is immutable
// and safe to read concurrently.
// ---------------------------------------------------------------------------

struct VarId {
  std::int32_t idx = -1;
  bool valid() const { return idx >= 0; }
  friend bool operator==(VarId a, VarId b) { return a.idx == b.idx; }
  friend auto operator<=>(VarId a, VarId b) { return a.idx <=> b.idx; }
};

enum class VarKind { Initial, Parameter, Constant, StepOutput };

struct VarInfo {
  std::string name;
  int iteration = 0;
  int dim = 0;
  VarKind kind = VarKind::StepOutput;
  Vec value;  // constants only
};

struct AffineStep {
  VarId out;
  Mat D;
  std::vector<std::pair<Mat, VarId>> terms;  // D*out = sum_i terms[i].first * x_i
  Eigen::PartialPivLU<Mat> factor;           // factorization of D, computed once
  double cond_estimate = 0.0;
};

struct MaxStep {
  VarId out;
  VarId lhs, rhs;
  std::vector<int> active;  // sorted coordinate indices; others copy lhs
};

using Step = std::variant<AffineStep, MaxStep>;

inline VarId step_out(const Step& s) {
  return std::visit([](const auto& st) { return st.out; }, s);
}

class IterationGraph {
public:
  static constexpr double kCondLimit = 1e12;

  VarId add_initial(std::string name, int dim, int iteration = 0);
  VarId add_parameter(std::string name, int dim);
  VarId add_constant(std::string name, Vec value);

  // D * out = sum_i A_i x_i.  Duplicate input vars are coalesced.
  VarId add_affine_step(const Mat& D, std::vector<std::pair<Mat, VarId>> terms,
                        std::string name = {}, int iteration = 0);
  // out_i = max(lhs_i, rhs_i) for i in active, out_i = lhs_i otherwise.
  VarId add_max_step(VarId lhs, VarId rhs, std::vector<int> active,
                     std::string name = {}, int iteration = 0);

  int num_vars() const { return static_cast<int>(vars_.size()); }
  int num_steps() const { return static_cast<int>(steps_.size()); }
  const VarInfo& info(VarId v) const;
  int dim(VarId v) const { return info(v).dim; }
  const std::string& name(VarId v) const { return info(v).name; }
  const std::vector<Step>& steps() const { return steps_; }
  const Step& step(int i) const { return steps_.at(i); }
  // step index that produced v, or -1 for inputs/constants
  int producer(VarId v) const;
  std::optional<VarId> find(const std::string& name) const;
  const std::vector<std::string>& warnings() const { return warnings_; }

private:
  VarId add_var(std::string name, int dim, VarKind kind, int iteration, Vec value = {});
  void require_known(VarId v) const;

  std::vector<VarInfo> vars_;
  std::vector<Step> steps_;
  std::vector<int> producer_;  // per var, -1 if not a step output
  std::vector<std::string> warnings_;
};

// ---------------------------------------------------------------------------
// Verification problem: maximize ||z^K - z^{K-1}||^2 over z^0 in Z, theta in
// Theta subject to the unrolled iteration.
// ---------------------------------------------------------------------------

struct VerificationProblem {
  IterationGraph graph;
  int K = 0;
  VarId init_var, param_var;
  SetSpec init_set, param_set;
  std::pair<VarId, VarId> objective_pair;
  std::vector<VarId> iterates;                      // z^0 .. z^K
  std::vector<std::pair<int, int>> iteration_steps;  // per k: [begin, end) step range
};

struct Violation {
  std::string code;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

ValidationReport validate(const VerificationProblem& vp);

// Values for every variable in topological order.
struct Trajectory {
  std::vector<Vec> values;  // indexed by VarId.idx
  const Vec& at(VarId v) const { return values.at(static_cast<std::size_t>(v.idx)); }
};

Trajectory forward_eval(const VerificationProblem& vp, const Vec& z0, const Vec& theta);

// Evaluates steps [begin, end) given preassigned values; used by forward_eval
// and by the fixed-point driver in the sampling module.
void eval_steps(const IterationGraph& g, int begin, int end, std::vector<Vec>& values);

}  // namespace qpcert
