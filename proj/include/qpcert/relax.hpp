#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "qpcert/bounds.hpp"
#include "qpcert/model.hpp"
#include "qpcert/types.hpp"

namespace qpcert {

// ---------------------------------------------------------------------------
// LiftedProgram: scalar vector variables, shared outer-product blocks M_{u,v},
// linear constraints over both, bordered PSD constraints, linear objective
// (maximize). Immutable once assembled; safe to canonicalize/solve from any
// thread.
// ---------------------------------------------------------------------------

class LiftedProgram {
public:
  enum class Sense { Eq, Le, Ge };
  enum class RowTag {
    AffineVec,
    AffineBlock,
    MaxIneq,
    MaxTrace,
    MaxCopy,
    SetRow,
    SingletonPin,
    Rlt,
    Triangle,
    Generic,
  };
  enum class ConeTag { Objective, Step, Set };

  struct VarEntry {
    std::string name;
    int dim = 0;
    VarId graph_var;  // invalid for auxiliaries
    bool pinned = false;
    Vec pin_value;
    enum class Aux { None, PolySlack, L1Abs } aux = Aux::None;
    std::vector<int> aux_owners;  // lvars feeding the auxiliary definition
    Mat aux_A;
    Vec aux_b;  // PolySlack: s = aux_b - aux_A * concat(owners)
    Vec aux_c;  // L1Abs: u = |z - aux_c|
    int col_begin = 0;
  };

  struct BlockInfo {
    int a = 0, b = 0;  // lvar indices, a <= b
    int rows = 0, cols = 0;
    int col_begin = 0;
  };

  struct Row {
    std::vector<std::pair<int, double>> terms;
    double rhs = 0.0;
    Sense sense = Sense::Eq;
    RowTag tag = RowTag::Generic;
  };

  // groups are lvar indices; the cone matrix stacks them in order, optionally
  // bordered by the group vectors and a unit corner.
  struct Cone {
    std::vector<int> groups;
    bool bordered = true;
    ConeTag tag = ConeTag::Step;
  };

  // --- variables ---
  int add_var(std::string name, int dim, VarId graph_var, bool pinned, Vec pin_value);
  int add_aux(std::string name, int dim, VarEntry::Aux kind);
  int num_vars() const { return static_cast<int>(vars_.size()); }
  const VarEntry& var(int lvar) const { return vars_.at(static_cast<std::size_t>(lvar)); }
  VarEntry& var_mut(int lvar) { return vars_.at(static_cast<std::size_t>(lvar)); }
  int lvar_of(VarId v) const;   // -1 if the graph variable is not lifted
  bool is_lifted(VarId v) const { return lvar_of(v) >= 0; }

  // --- blocks (created lazily) ---
  int block(int a, int b);
  int find_block(int a, int b) const;  // -1 if absent
  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  const BlockInfo& block_info(int id) const { return blocks_.at(static_cast<std::size_t>(id)); }
  const std::vector<BlockInfo>& blocks() const { return blocks_; }

  // --- scalar columns ---
  int num_cols() const { return next_col_; }
  int var_col_count() const { return var_cols_; }
  int col_of_var(int lvar, int i) const;
  // column of the product u_i * v_j for lifted vars u, v (order-insensitive)
  int col_of_pair(int lvar_u, int i, int lvar_v, int j) const;

  // --- rows / cones / objective ---
  void add_row(Row row) { rows_.push_back(std::move(row)); }
  const std::vector<Row>& rows() const { return rows_; }
  void add_cone(Cone cone) { cones_.push_back(std::move(cone)); }
  const std::vector<Cone>& cones() const { return cones_; }
  int cone_order(const Cone& c) const;
  std::vector<std::pair<int, double>> objective;  // maximize
  double objective_constant = 0.0;

  int count_rows(RowTag tag) const;
  int count_cones(ConeTag tag) const;
  void describe(std::ostream& os) const;  // human-readable audit listing

private:
  std::vector<VarEntry> vars_;
  std::vector<BlockInfo> blocks_;
  std::map<std::pair<int, int>, int> block_ids_;
  std::map<std::int32_t, int> graph_to_lvar_;
  std::vector<Row> rows_;
  std::vector<Cone> cones_;
  int next_col_ = 0;
  int var_cols_ = 0;
};

struct RelaxOptions {
  bool rlt = true;
  bool triangle = true;
  // Prop. 4 aggregates complementarity into one trace equality; this switches
  // to one equality per active coordinate.
  bool per_coordinate_complementarity = false;
};

// ---------------------------------------------------------------------------
// Lifting builder. The individual lift_* operations are exposed so tests can
// exercise them in isolation; assemble() runs the whole pipeline.
// ---------------------------------------------------------------------------

class Lifting {
public:
  Lifting(const VerificationProblem& vp, const BoundsTable& bounds,
          RelaxOptions opts = {});

  LiftedProgram take() { return std::move(lp_); }
  const LiftedProgram& program() const { return lp_; }

  void register_graph_vars();
  void lift_objective(VarId zK, VarId zKm1);
  void lift_affine(const AffineStep& step);
  void lift_max(const MaxStep& step);
  void lift_set(const SetSpec& set, VarId var);
  void add_singleton_pins();
  void add_rlt_pair(int lvar_u, int lvar_v);
  void add_rlt_all();
  void add_triangle(const MaxStep& step);
  void finalize_orphan_blocks();

private:
  void lift_hypercube(int lvar, const Vec& l, const Vec& u);
  void lift_polyhedron(const std::vector<int>& lvars, const Mat& A, const Vec& b);
  const VarBounds& bounds_of(int lvar) const;

  const VerificationProblem& vp_;
  const BoundsTable& bounds_;
  RelaxOptions opts_;
  LiftedProgram lp_;
};

LiftedProgram assemble(const VerificationProblem& vp, const BoundsTable& bounds,
                       RelaxOptions opts = {});

enum class UnconstrainedMode { Iterate, Parameter };

// Exact S-lemma programs for gradient descent on unconstrained QPs with
// ell_2-ball initial/parameter sets; exactly one radius must be zero.
LiftedProgram assemble_unconstrained(const Mat& P, double t, int K, const L2Ball& Z,
                                     const L2Ball& Theta, UnconstrainedMode mode);

// ---------------------------------------------------------------------------
// Point evaluation (containment checks, oracle embeddings)
// ---------------------------------------------------------------------------

struct LiftedResiduals {
  double max_eq = 0.0;
  double max_ineq = 0.0;
  double min_eigenvalue = 0.0;
  double max_violation() const;
};

LiftedResiduals evaluate(const LiftedProgram& lp, const Vec& x);
double objective_value(const LiftedProgram& lp, const Vec& x);

// Embeds a forward trajectory as an exact rank-1 assignment of all columns.
Vec lifted_assignment(const LiftedProgram& lp, const Trajectory& traj);

}  // namespace qpcert
