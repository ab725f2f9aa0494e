#include "qpcert/relax.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "qpcert/conic.hpp"

namespace qpcert {

namespace {
inline int packed_index(int i, int j) {  // i <= j, column-wise upper triangle
  return j * (j + 1) / 2 + i;
}
}  // namespace

// ---------------------------------------------------------------------------
// LiftedProgram
// ---------------------------------------------------------------------------

int LiftedProgram::add_var(std::string name, int dim, VarId graph_var, bool pinned,
                           Vec pin_value) {
  VarEntry e;
  e.name = std::move(name);
  e.dim = dim;
  e.graph_var = graph_var;
  e.pinned = pinned;
  e.pin_value = std::move(pin_value);
  e.col_begin = next_col_;
  next_col_ += dim;
  var_cols_ = next_col_;
  if (!blocks_.empty()) throw Error("variables must be registered before blocks");
  vars_.push_back(std::move(e));
  if (graph_var.valid()) graph_to_lvar_[graph_var.idx] = static_cast<int>(vars_.size()) - 1;
  return static_cast<int>(vars_.size()) - 1;
}

int LiftedProgram::add_aux(std::string name, int dim, VarEntry::Aux kind) {
  const int lvar = add_var(std::move(name), dim, VarId{}, false, {});
  vars_.back().aux = kind;
  return lvar;
}

int LiftedProgram::lvar_of(VarId v) const {
  auto it = graph_to_lvar_.find(v.idx);
  return it == graph_to_lvar_.end() ? -1 : it->second;
}

int LiftedProgram::block(int a, int b) {
  if (a > b) std::swap(a, b);
  auto it = block_ids_.find({a, b});
  if (it != block_ids_.end()) return it->second;
  BlockInfo info;
  info.a = a;
  info.b = b;
  info.rows = var(a).dim;
  info.cols = var(b).dim;
  info.col_begin = next_col_;
  next_col_ += (a == b) ? info.rows * (info.rows + 1) / 2 : info.rows * info.cols;
  blocks_.push_back(info);
  const int id = static_cast<int>(blocks_.size()) - 1;
  block_ids_[{a, b}] = id;
  return id;
}

int LiftedProgram::find_block(int a, int b) const {
  if (a > b) std::swap(a, b);
  auto it = block_ids_.find({a, b});
  return it == block_ids_.end() ? -1 : it->second;
}

int LiftedProgram::col_of_var(int lvar, int i) const { return var(lvar).col_begin + i; }

int LiftedProgram::col_of_pair(int lvar_u, int i, int lvar_v, int j) const {
  if (lvar_u > lvar_v) {
    std::swap(lvar_u, lvar_v);
    std::swap(i, j);
  }
  const int id = find_block(lvar_u, lvar_v);
  if (id < 0) {
    throw MissingBlock("no block for (" + var(lvar_u).name + ", " + var(lvar_v).name + ")");
  }
  const BlockInfo& info = blocks_[static_cast<std::size_t>(id)];
  if (lvar_u == lvar_v) {
    return info.col_begin + packed_index(std::min(i, j), std::max(i, j));
  }
  return info.col_begin + i * info.cols + j;
}

int LiftedProgram::cone_order(const Cone& c) const {
  int order = c.bordered ? 1 : 0;
  for (int g : c.groups) order += var(g).dim;
  return order;
}

int LiftedProgram::count_rows(RowTag tag) const {
  int n = 0;
  for (const auto& r : rows_) n += (r.tag == tag) ? 1 : 0;
  return n;
}

int LiftedProgram::count_cones(ConeTag tag) const {
  int n = 0;
  for (const auto& c : cones_) n += (c.tag == tag) ? 1 : 0;
  return n;
}

void LiftedProgram::describe(std::ostream& os) const {
  os << "lifted program: " << vars_.size() << " vector vars, " << blocks_.size()
     << " blocks, " << rows_.size() << " rows, " << cones_.size() << " PSD constraints\n";
  os << "vars:";
  for (const auto& v : vars_) os << " " << v.name << "(" << v.dim << ")";
  os << "\nblocks:";
  for (const auto& b : blocks_) os << " M[" << var(b.a).name << "," << var(b.b).name << "]";
  os << "\ncones:";
  for (const auto& c : cones_) {
    os << " {";
    for (std::size_t i = 0; i < c.groups.size(); ++i) {
      os << (i ? "," : "") << var(c.groups[i]).name;
    }
    os << (c.bordered ? "|1}" : "}");
    os << "(order " << cone_order(c) << ")";
  }
  auto tag_count = [&](RowTag t, const char* label) {
    const int n = count_rows(t);
    if (n) os << "\n  " << label << ": " << n;
  };
  os << "\nrows by kind:";
  tag_count(RowTag::AffineVec, "affine vector equalities");
  tag_count(RowTag::AffineBlock, "affine block equalities");
  tag_count(RowTag::MaxIneq, "max elementwise inequalities");
  tag_count(RowTag::MaxTrace, "max trace equalities");
  tag_count(RowTag::MaxCopy, "max copy ties");
  tag_count(RowTag::SetRow, "set rows");
  tag_count(RowTag::SingletonPin, "singleton pins");
  tag_count(RowTag::Rlt, "RLT inequalities");
  tag_count(RowTag::Triangle, "triangle inequalities");
  os << "\n";
}

// ---------------------------------------------------------------------------
// row builder with coefficient merging
// ---------------------------------------------------------------------------

namespace {

class RowBuilder {
public:
  void add(int col, double coef) {
    if (coef != 0.0) terms_[col] += coef;
  }
  LiftedProgram::Row finish(double rhs, LiftedProgram::Sense sense,
                            LiftedProgram::RowTag tag) {
    LiftedProgram::Row row;
    row.terms.reserve(terms_.size());
    for (auto& [col, coef] : terms_) {
      if (coef != 0.0) row.terms.emplace_back(col, coef);
    }
    row.rhs = rhs;
    row.sense = sense;
    row.tag = tag;
    terms_.clear();
    return row;
  }

private:
  std::map<int, double> terms_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Lifting
// ---------------------------------------------------------------------------

Lifting::Lifting(const VerificationProblem& vp, const BoundsTable& bounds, RelaxOptions opts)
    : vp_(vp), bounds_(bounds), opts_(opts) {
  register_graph_vars();
}

void Lifting::register_graph_vars() {
  const auto& g = vp_.graph;
  for (int i = 0; i < g.num_vars(); ++i) {
    const VarId v{i};
    const auto& inf = g.info(v);
    if (inf.kind == VarKind::Constant) continue;  // folded into liftings
    bool pinned = false;
    Vec pin;
    if (v == vp_.init_var) {
      if (auto p = set_pinned_value(vp_.init_set)) {
        pinned = true;
        pin = *p;
      }
    } else if (v == vp_.param_var) {
      if (auto p = set_pinned_value(vp_.param_set)) {
        pinned = true;
        pin = *p;
      }
    }
    lp_.add_var(inf.name, inf.dim, v, pinned, std::move(pin));
  }
}

const VarBounds& Lifting::bounds_of(int lvar) const {
  const auto& e = lp_.var(lvar);
  if (!e.graph_var.valid()) throw Error("bounds requested for auxiliary variable");
  return bounds_.at(e.graph_var);
}

namespace {

// cones reference every pairwise block inside them
void add_cone_ensuring(LiftedProgram& lp, std::vector<int> groups, bool bordered,
                       LiftedProgram::ConeTag tag) {
  for (std::size_t p = 0; p < groups.size(); ++p) {
    for (std::size_t q = p; q < groups.size(); ++q) lp.block(groups[p], groups[q]);
  }
  lp.add_cone({std::move(groups), bordered, tag});
}

}  // namespace

void Lifting::lift_objective(VarId zK, VarId zKm1) {
  const auto& g = vp_.graph;
  const int d = g.dim(zK);
  const int lK = lp_.lvar_of(zK);
  if (lK < 0) throw Error("objective variable is not lifted");

  if (g.info(zKm1).kind == VarKind::Constant) {
    const Vec& c = g.info(zKm1).value;
    lp_.block(lK, lK);
    for (int i = 0; i < d; ++i) {
      lp_.objective.emplace_back(lp_.col_of_pair(lK, i, lK, i), 1.0);
      if (c[i] != 0.0) lp_.objective.emplace_back(lp_.col_of_var(lK, i), -2.0 * c[i]);
    }
    lp_.objective_constant += c.squaredNorm();
    add_cone_ensuring(lp_, {lK}, true, LiftedProgram::ConeTag::Objective);
    return;
  }

  const int lKm1 = lp_.lvar_of(zKm1);
  if (lKm1 < 0) throw Error("objective variable is not lifted");
  lp_.block(lK, lK);
  lp_.block(lK, lKm1);
  lp_.block(lKm1, lKm1);
  for (int i = 0; i < d; ++i) {
    lp_.objective.emplace_back(lp_.col_of_pair(lK, i, lK, i), 1.0);
    lp_.objective.emplace_back(lp_.col_of_pair(lK, i, lKm1, i), -2.0);
    lp_.objective.emplace_back(lp_.col_of_pair(lKm1, i, lKm1, i), 1.0);
  }
  add_cone_ensuring(lp_, {lK, lKm1}, true, LiftedProgram::ConeTag::Objective);
}

void Lifting::lift_affine(const AffineStep& step) {
  const auto& g = vp_.graph;
  const int d = g.dim(step.out);
  const int ly = lp_.lvar_of(step.out);

  // split lifted inputs from constant inputs (folded into an offset)
  std::vector<std::pair<const Mat*, int>> inputs;  // (coefficient, lvar)
  Vec h = Vec::Zero(d);
  for (const auto& [A, x] : step.terms) {
    if (g.info(x).kind == VarKind::Constant) {
      h += A * g.info(x).value;
    } else {
      inputs.emplace_back(&A, lp_.lvar_of(x));
    }
  }

  // vector equality D y - sum A_i x_i = h
  for (int r = 0; r < d; ++r) {
    RowBuilder rb;
    for (int k = 0; k < d; ++k) rb.add(lp_.col_of_var(ly, k), step.D(r, k));
    for (const auto& [A, lx] : inputs) {
      for (int a = 0; a < A->cols(); ++a) rb.add(lp_.col_of_var(lx, a), -(*A)(r, a));
    }
    lp_.add_row(rb.finish(h[r], LiftedProgram::Sense::Eq, LiftedProgram::RowTag::AffineVec));
  }

  // register blocks: output and all input pairs
  lp_.block(ly, ly);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t j = i; j < inputs.size(); ++j) {
      lp_.block(inputs[i].second, inputs[j].second);
    }
  }

  // block equality D M_yy D' = sum_ij A_i M_ij A_j' + (sum_i A_i x_i) h' + h (...)' + hh'
  for (int r = 0; r < d; ++r) {
    for (int s = r; s < d; ++s) {
      RowBuilder rb;
      for (int k = 0; k < d; ++k) {
        const double dr = step.D(r, k);
        if (dr == 0.0) continue;
        for (int l = 0; l < d; ++l) {
          const double ds = step.D(s, l);
          if (ds == 0.0) continue;
          rb.add(lp_.col_of_pair(ly, k, ly, l), dr * ds);
        }
      }
      for (const auto& [Ai, lxi] : inputs) {
        for (const auto& [Aj, lxj] : inputs) {
          for (int a = 0; a < Ai->cols(); ++a) {
            const double ar = (*Ai)(r, a);
            if (ar == 0.0) continue;
            for (int b = 0; b < Aj->cols(); ++b) {
              const double as = (*Aj)(s, b);
              if (as == 0.0) continue;
              rb.add(lp_.col_of_pair(lxi, a, lxj, b), -ar * as);
            }
          }
        }
      }
      if (h.cwiseAbs().maxCoeff() > 0.0) {
        for (const auto& [Ai, lxi] : inputs) {
          for (int a = 0; a < Ai->cols(); ++a) {
            rb.add(lp_.col_of_var(lxi, a), -(*Ai)(r, a) * h[s] - (*Ai)(s, a) * h[r]);
          }
        }
      }
      lp_.add_row(rb.finish(h[r] * h[s], LiftedProgram::Sense::Eq,
                            LiftedProgram::RowTag::AffineBlock));
    }
  }

  if (!inputs.empty()) {
    std::vector<int> groups;
    for (const auto& [A, lx] : inputs) groups.push_back(lx);
    add_cone_ensuring(lp_, std::move(groups), true, LiftedProgram::ConeTag::Step);
  }
}

void Lifting::lift_max(const MaxStep& step) {
  const auto& g = vp_.graph;
  const int d = g.dim(step.out);
  const int ly = lp_.lvar_of(step.out);
  const int lx = lp_.lvar_of(step.lhs);
  if (lx < 0) throw Error("max step lhs must be a lifted variable");
  const bool const_rhs = g.info(step.rhs).kind == VarKind::Constant;
  const int ll = const_rhs ? -1 : lp_.lvar_of(step.rhs);
  const Vec* lval = const_rhs ? &g.info(step.rhs).value : nullptr;

  lp_.block(ly, ly);
  lp_.block(ly, lx);
  if (!const_rhs) {
    lp_.block(ly, ll);
    lp_.block(lx, ll);
  }

  std::vector<bool> is_active(static_cast<std::size_t>(d), false);
  for (int a : step.active) is_active[static_cast<std::size_t>(a)] = true;

  // y >= x, y >= l on active coordinates
  for (int a : step.active) {
    RowBuilder rb;
    rb.add(lp_.col_of_var(ly, a), 1.0);
    rb.add(lp_.col_of_var(lx, a), -1.0);
    lp_.add_row(rb.finish(0.0, LiftedProgram::Sense::Ge, LiftedProgram::RowTag::MaxIneq));
    RowBuilder rb2;
    rb2.add(lp_.col_of_var(ly, a), 1.0);
    if (const_rhs) {
      lp_.add_row(rb2.finish((*lval)[a], LiftedProgram::Sense::Ge,
                             LiftedProgram::RowTag::MaxIneq));
    } else {
      rb2.add(lp_.col_of_var(ll, a), -1.0);
      lp_.add_row(rb2.finish(0.0, LiftedProgram::Sense::Ge, LiftedProgram::RowTag::MaxIneq));
    }
  }

  // complementarity (y - l)'(y - x) = 0 over active coordinates
  if (!step.active.empty()) {
    auto emit_trace = [&](const std::vector<int>& coords) {
      RowBuilder rb;
      for (int a : coords) {
        rb.add(lp_.col_of_pair(ly, a, ly, a), 1.0);
        rb.add(lp_.col_of_pair(ly, a, lx, a), -1.0);
        if (const_rhs) {
          rb.add(lp_.col_of_var(ly, a), -(*lval)[a]);
          rb.add(lp_.col_of_var(lx, a), (*lval)[a]);
        } else {
          rb.add(lp_.col_of_pair(ly, a, ll, a), -1.0);
          rb.add(lp_.col_of_pair(lx, a, ll, a), 1.0);
        }
      }
      lp_.add_row(rb.finish(0.0, LiftedProgram::Sense::Eq, LiftedProgram::RowTag::MaxTrace));
    };
    if (opts_.per_coordinate_complementarity) {
      for (int a : step.active) emit_trace({a});
    } else {
      emit_trace(step.active);
    }
  }

  // inactive coordinates copy lhs; blocks are matched row-wise
  std::vector<int> partners{ly, lx};
  if (!const_rhs) partners.push_back(ll);
  for (int i = 0; i < d; ++i) {
    if (is_active[static_cast<std::size_t>(i)]) continue;
    RowBuilder rb;
    rb.add(lp_.col_of_var(ly, i), 1.0);
    rb.add(lp_.col_of_var(lx, i), -1.0);
    lp_.add_row(rb.finish(0.0, LiftedProgram::Sense::Eq, LiftedProgram::RowTag::MaxCopy));
    for (int w : partners) {
      for (int j = 0; j < lp_.var(w).dim; ++j) {
        RowBuilder rbw;
        rbw.add(lp_.col_of_pair(ly, i, w, j), 1.0);
        rbw.add(lp_.col_of_pair(lx, i, w, j), -1.0);
        auto row = rbw.finish(0.0, LiftedProgram::Sense::Eq, LiftedProgram::RowTag::MaxCopy);
        if (!row.terms.empty()) lp_.add_row(std::move(row));
      }
    }
  }

  std::vector<int> groups{ly, lx};
  if (!const_rhs) groups.push_back(ll);
  add_cone_ensuring(lp_, std::move(groups), true, LiftedProgram::ConeTag::Step);
}

void Lifting::lift_hypercube(int lvar, const Vec& l, const Vec& u) {
  const int d = lp_.var(lvar).dim;
  lp_.block(lvar, lvar);
  auto vcol = [&](int i) { return lp_.col_of_var(lvar, i); };
  auto mcol = [&](int i, int j) { return lp_.col_of_pair(lvar, i, lvar, j); };

  // (u - z)(z - l)' >= 0, elementwise
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (!std::isfinite(u[i]) || !std::isfinite(l[j])) continue;
      RowBuilder rb;
      rb.add(vcol(j), u[i]);
      rb.add(mcol(i, j), -1.0);
      rb.add(vcol(i), l[j]);
      lp_.add_row(
          rb.finish(u[i] * l[j], LiftedProgram::Sense::Ge, LiftedProgram::RowTag::SetRow));
    }
  }
  // (u - z)(u - z)' >= 0
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      if (!std::isfinite(u[i]) || !std::isfinite(u[j])) continue;
      RowBuilder rb;
      rb.add(vcol(j), -u[i]);
      rb.add(vcol(i), -u[j]);
      rb.add(mcol(i, j), 1.0);
      lp_.add_row(
          rb.finish(-u[i] * u[j], LiftedProgram::Sense::Ge, LiftedProgram::RowTag::SetRow));
    }
  }
  // (z - l)(z - l)' >= 0
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      if (!std::isfinite(l[i]) || !std::isfinite(l[j])) continue;
      RowBuilder rb;
      rb.add(mcol(i, j), 1.0);
      rb.add(vcol(i), -l[j]);
      rb.add(vcol(j), -l[i]);
      lp_.add_row(
          rb.finish(-l[i] * l[j], LiftedProgram::Sense::Ge, LiftedProgram::RowTag::SetRow));
    }
  }
}

void Lifting::lift_polyhedron(const std::vector<int>& lvars, const Mat& A, const Vec& b) {
  const int rows = static_cast<int>(A.rows());
  int stacked_dim = 0;
  for (int lv : lvars) stacked_dim += lp_.var(lv).dim;
  if (A.cols() != stacked_dim) throw DimensionMismatch("polyhedron lifting shape");

  std::string sname = "s[";
  for (std::size_t i = 0; i < lvars.size(); ++i) {
    sname += (i ? "," : "") + lp_.var(lvars[i]).name;
  }
  sname += "]";
  const int ls = lp_.add_aux(sname, rows, LiftedProgram::VarEntry::Aux::PolySlack);
  {
    auto& e = lp_.var_mut(ls);
    e.aux_owners = lvars;
    e.aux_A = A;
    e.aux_b = b;
  }

  // column segments of A per variable
  std::vector<int> seg_begin;
  {
    int at = 0;
    for (int lv : lvars) {
      seg_begin.push_back(at);
      at += lp_.var(lv).dim;
    }
  }
  auto stacked_col = [&](int a) -> int {  // lp column of stacked coordinate a
    for (std::size_t v = 0; v < lvars.size(); ++v) {
      const int d = lp_.var(lvars[v]).dim;
      if (a < seg_begin[v] + d) return lp_.col_of_var(lvars[v], a - seg_begin[v]);
    }
    throw DimensionMismatch("stacked coordinate out of range");
  };
  auto stacked_var = [&](int a) -> std::pair<int, int> {  // (lvar, local index)
    for (std::size_t v = 0; v < lvars.size(); ++v) {
      const int d = lp_.var(lvars[v]).dim;
      if (a < seg_begin[v] + d) return {lvars[v], a - seg_begin[v]};
    }
    throw DimensionMismatch("stacked coordinate out of range");
  };

  // A z + s = b, s >= 0
  for (int r = 0; r < rows; ++r) {
    RowBuilder rb;
    for (int a = 0; a < stacked_dim; ++a) rb.add(stacked_col(a), A(r, a));
    rb.add(lp_.col_of_var(ls, r), 1.0);
    lp_.add_row(rb.finish(b[r], LiftedProgram::Sense::Eq, LiftedProgram::RowTag::SetRow));
    RowBuilder rb2;
    rb2.add(lp_.col_of_var(ls, r), 1.0);
    lp_.add_row(rb2.finish(0.0, LiftedProgram::Sense::Ge, LiftedProgram::RowTag::SetRow));
  }

  // blocks among (vars..., s)
  std::vector<int> groups = lvars;
  groups.push_back(ls);
  for (std::size_t p = 0; p < groups.size(); ++p) {
    for (std::size_t q = p; q < groups.size(); ++q) lp_.block(groups[p], groups[q]);
  }

  // [A I] M [A I]' = bb'
  for (int r = 0; r < rows; ++r) {
    for (int t = r; t < rows; ++t) {
      RowBuilder rb;
      for (int a = 0; a < stacked_dim; ++a) {
        const double ar = A(r, a);
        if (ar == 0.0) continue;
        const auto [va, ia] = stacked_var(a);
        for (int c = 0; c < stacked_dim; ++c) {
          const double at = A(t, c);
          if (at == 0.0) continue;
          const auto [vb, ib] = stacked_var(c);
          rb.add(lp_.col_of_pair(va, ia, vb, ib), ar * at);
        }
        rb.add(lp_.col_of_pair(va, ia, ls, t), ar);
      }
      for (int c = 0; c < stacked_dim; ++c) {
        const double at = A(t, c);
        if (at == 0.0) continue;
        const auto [vb, ib] = stacked_var(c);
        rb.add(lp_.col_of_pair(ls, r, vb, ib), at);
      }
      rb.add(lp_.col_of_pair(ls, r, ls, t), 1.0);
      lp_.add_row(
          rb.finish(b[r] * b[t], LiftedProgram::Sense::Eq, LiftedProgram::RowTag::SetRow));
    }
  }

  add_cone_ensuring(lp_, std::move(groups), true, LiftedProgram::ConeTag::Set);
}

void Lifting::lift_set(const SetSpec& set, VarId var) {
  const int lvar = lp_.lvar_of(var);
  if (lvar < 0) throw Error("set attached to a non-lifted variable");
  const int d = lp_.var(lvar).dim;
  if (set_dim(set) != d) throw DimensionMismatch("lift_set: set dim");

  if (std::holds_alternative<Singleton>(set)) return;  // handled by the pin pass

  if (const auto* h = std::get_if<Hypercube>(&set)) {
    lift_hypercube(lvar, h->l, h->u);
  } else if (const auto* bi = std::get_if<LinfBall>(&set)) {
    lift_hypercube(lvar, bi->c.array() - bi->r, bi->c.array() + bi->r);
  } else if (const auto* b2 = std::get_if<L2Ball>(&set)) {
    lp_.block(lvar, lvar);
    RowBuilder rb;
    for (int i = 0; i < d; ++i) {
      rb.add(lp_.col_of_pair(lvar, i, lvar, i), 1.0);
      rb.add(lp_.col_of_var(lvar, i), -2.0 * b2->c[i]);
    }
    lp_.add_row(rb.finish(b2->r * b2->r - b2->c.squaredNorm(), LiftedProgram::Sense::Le,
                          LiftedProgram::RowTag::SetRow));
  } else if (const auto* p = std::get_if<Polyhedron>(&set)) {
    lift_polyhedron({lvar}, p->A, p->b);
  } else if (const auto* b1 = std::get_if<L1Ball>(&set)) {
    const int lu = lp_.add_aux("abs[" + lp_.var(lvar).name + "]", d,
                               LiftedProgram::VarEntry::Aux::L1Abs);
    {
      auto& e = lp_.var_mut(lu);
      e.aux_owners = {lvar};
      e.aux_c = b1->c;
    }
    Mat A(2 * d + 1, 2 * d);
    A.setZero();
    A.topLeftCorner(d, d) = Mat::Identity(d, d);
    A.topRightCorner(d, d) = -Mat::Identity(d, d);
    A.block(d, 0, d, d) = -Mat::Identity(d, d);
    A.block(d, d, d, d) = -Mat::Identity(d, d);
    A.row(2 * d).tail(d).setOnes();
    Vec b(2 * d + 1);
    b.head(d) = b1->c;
    b.segment(d, d) = -b1->c;
    b[2 * d] = b1->r;
    lift_polyhedron({lvar, lu}, A, b);
  }
}

void Lifting::add_singleton_pins() {
  for (int lv = 0; lv < lp_.num_vars(); ++lv) {
    const auto& e = lp_.var(lv);
    if (!e.pinned) continue;
    const Vec& v = e.pin_value;
    for (int i = 0; i < e.dim; ++i) {
      RowBuilder rb;
      rb.add(lp_.col_of_var(lv, i), 1.0);
      lp_.add_row(rb.finish(v[i], LiftedProgram::Sense::Eq,
                            LiftedProgram::RowTag::SingletonPin));
    }
    for (const auto& blk : lp_.blocks()) {
      if (blk.a != lv && blk.b != lv) continue;
      if (blk.a == lv && blk.b == lv) {
        for (int i = 0; i < e.dim; ++i) {
          for (int j = i; j < e.dim; ++j) {
            RowBuilder rb;
            rb.add(lp_.col_of_pair(lv, i, lv, j), 1.0);
            lp_.add_row(rb.finish(v[i] * v[j], LiftedProgram::Sense::Eq,
                                  LiftedProgram::RowTag::SingletonPin));
          }
        }
      } else {
        const int other = (blk.a == lv) ? blk.b : blk.a;
        if (lp_.var(other).pinned && other < lv) continue;  // pinned by the partner pass
        for (int i = 0; i < e.dim; ++i) {
          for (int j = 0; j < lp_.var(other).dim; ++j) {
            RowBuilder rb;
            rb.add(lp_.col_of_pair(lv, i, other, j), 1.0);
            rb.add(lp_.col_of_var(other, j), -v[i]);
            lp_.add_row(rb.finish(0.0, LiftedProgram::Sense::Eq,
                                  LiftedProgram::RowTag::SingletonPin));
          }
        }
      }
    }
  }
}

void Lifting::add_rlt_pair(int lvar_u, int lvar_v) {
  if (lvar_u > lvar_v) std::swap(lvar_u, lvar_v);
  const VarBounds& bu = bounds_of(lvar_u);
  const VarBounds& bv = bounds_of(lvar_v);
  const int du = lp_.var(lvar_u).dim;
  const int dv = lp_.var(lvar_v).dim;

  auto ucol = [&](int i) { return lp_.col_of_var(lvar_u, i); };
  auto vcol = [&](int j) { return lp_.col_of_var(lvar_v, j); };
  auto mcol = [&](int i, int j) { return lp_.col_of_pair(lvar_u, i, lvar_v, j); };
  const auto Ge = LiftedProgram::Sense::Ge;
  const auto tag = LiftedProgram::RowTag::Rlt;

  if (lvar_u == lvar_v) {
    if (lp_.find_block(lvar_u, lvar_u) < 0) lp_.block(lvar_u, lvar_u);
    for (int i = 0; i < du; ++i) {
      for (int j = i; j < du; ++j) {
        if (std::isfinite(bu.upper[i]) && std::isfinite(bu.upper[j])) {
          RowBuilder rb;  // (u - z)(u - z)' >= 0
          rb.add(mcol(i, j), 1.0);
          rb.add(ucol(j), -bu.upper[i]);
          rb.add(ucol(i), -bu.upper[j]);
          lp_.add_row(rb.finish(-bu.upper[i] * bu.upper[j], Ge, tag));
        }
        if (std::isfinite(bu.lower[i]) && std::isfinite(bu.lower[j])) {
          RowBuilder rb;  // (z - l)(z - l)' >= 0
          rb.add(mcol(i, j), 1.0);
          rb.add(ucol(j), -bu.lower[i]);
          rb.add(ucol(i), -bu.lower[j]);
          lp_.add_row(rb.finish(-bu.lower[i] * bu.lower[j], Ge, tag));
        }
      }
    }
    for (int i = 0; i < du; ++i) {
      for (int j = 0; j < du; ++j) {
        if (!std::isfinite(bu.upper[i]) || !std::isfinite(bu.lower[j])) continue;
        RowBuilder rb;  // (u - z)(z - l)' >= 0
        rb.add(ucol(j), bu.upper[i]);
        rb.add(mcol(i, j), -1.0);
        rb.add(ucol(i), bu.lower[j]);
        lp_.add_row(rb.finish(bu.upper[i] * bu.lower[j], Ge, tag));
      }
    }
    return;
  }

  if (lp_.find_block(lvar_u, lvar_v) < 0) return;  // cross pairs only when present
  for (int i = 0; i < du; ++i) {
    for (int j = 0; j < dv; ++j) {
      if (std::isfinite(bu.upper[i]) && std::isfinite(bv.upper[j])) {
        RowBuilder rb;  // (ubar - u)(vbar - v) >= 0
        rb.add(mcol(i, j), 1.0);
        rb.add(vcol(j), -bu.upper[i]);
        rb.add(ucol(i), -bv.upper[j]);
        lp_.add_row(rb.finish(-bu.upper[i] * bv.upper[j], Ge, tag));
      }
      if (std::isfinite(bu.lower[i]) && std::isfinite(bv.lower[j])) {
        RowBuilder rb;  // (u - ulow)(v - vlow) >= 0
        rb.add(mcol(i, j), 1.0);
        rb.add(vcol(j), -bu.lower[i]);
        rb.add(ucol(i), -bv.lower[j]);
        lp_.add_row(rb.finish(-bu.lower[i] * bv.lower[j], Ge, tag));
      }
      if (std::isfinite(bu.upper[i]) && std::isfinite(bv.lower[j])) {
        RowBuilder rb;  // (ubar - u)(v - vlow) >= 0
        rb.add(vcol(j), bu.upper[i]);
        rb.add(mcol(i, j), -1.0);
        rb.add(ucol(i), bv.lower[j]);
        lp_.add_row(rb.finish(bu.upper[i] * bv.lower[j], Ge, tag));
      }
      if (std::isfinite(bu.lower[i]) && std::isfinite(bv.upper[j])) {
        RowBuilder rb;  // (u - ulow)(vbar - v) >= 0
        rb.add(ucol(i), bv.upper[j]);
        rb.add(mcol(i, j), -1.0);
        rb.add(vcol(j), bu.lower[i]);
        lp_.add_row(rb.finish(bu.lower[i] * bv.upper[j], Ge, tag));
      }
    }
  }
}

void Lifting::add_rlt_all() {
  const int nblocks = lp_.num_blocks();  // snapshot: self pairs may add blocks
  for (int lv = 0; lv < lp_.num_vars(); ++lv) {
    if (!lp_.var(lv).graph_var.valid()) continue;
    const VarBounds& b = bounds_of(lv);
    bool any = false;
    for (int i = 0; i < b.dim() && !any; ++i) {
      any = std::isfinite(b.lower[i]) || std::isfinite(b.upper[i]);
    }
    if (any) add_rlt_pair(lv, lv);
  }
  for (int id = 0; id < nblocks; ++id) {
    const auto blk = lp_.block_info(id);
    if (blk.a == blk.b) continue;
    if (!lp_.var(blk.a).graph_var.valid() || !lp_.var(blk.b).graph_var.valid()) continue;
    add_rlt_pair(blk.a, blk.b);
  }
}

void Lifting::add_triangle(const MaxStep& step) {
  const auto& g = vp_.graph;
  if (step.active.empty()) return;
  const int ly = lp_.lvar_of(step.out);
  const int lx = lp_.lvar_of(step.lhs);
  if (lx < 0) return;
  const VarBounds& bx = bounds_.at(step.lhs);
  const VarBounds& by = bounds_.at(step.out);
  const int d = g.dim(step.out);

  for (int i : step.active) {
    if (!bx.finite(i) || !by.finite(i)) continue;
    const double wx = bx.width(i);
    if (wx < 1e-9) continue;  // secant slope would divide by ~0
    const double e = (by.upper[i] - by.lower[i]) / wx;
    const double o = by.lower[i] - e * bx.lower[i];

    RowBuilder rb;  // y_i <= e x_i + o
    rb.add(lp_.col_of_var(ly, i), 1.0);
    rb.add(lp_.col_of_var(lx, i), -e);
    lp_.add_row(rb.finish(o, LiftedProgram::Sense::Le, LiftedProgram::RowTag::Triangle));

    for (int j = 0; j < d; ++j) {
      if (!std::isfinite(bx.upper[j])) continue;
      const double xbar = bx.upper[j];
      RowBuilder rbl;  // (e x_i + o - y_i)(xbar_j - x_j) >= 0, lifted
      rbl.add(lp_.col_of_var(lx, i), e * xbar);
      rbl.add(lp_.col_of_pair(lx, i, lx, j), -e);
      rbl.add(lp_.col_of_var(lx, j), -o);
      rbl.add(lp_.col_of_var(ly, i), -xbar);
      rbl.add(lp_.col_of_pair(ly, i, lx, j), 1.0);
      lp_.add_row(
          rbl.finish(-o * xbar, LiftedProgram::Sense::Ge, LiftedProgram::RowTag::Triangle));
    }
  }
}

void Lifting::finalize_orphan_blocks() {
  std::vector<bool> covered(static_cast<std::size_t>(lp_.num_blocks()), false);
  auto mark = [&](const LiftedProgram::Cone& cone) {
    for (std::size_t p = 0; p < cone.groups.size(); ++p) {
      for (std::size_t q = p; q < cone.groups.size(); ++q) {
        const int id = lp_.find_block(cone.groups[p], cone.groups[q]);
        if (id >= 0 && id < static_cast<int>(covered.size())) {
          covered[static_cast<std::size_t>(id)] = true;
        }
      }
    }
  };
  for (const auto& cone : lp_.cones()) mark(cone);
  for (int id = 0; id < static_cast<int>(covered.size()); ++id) {
    if (covered[static_cast<std::size_t>(id)]) continue;
    const auto blk = lp_.block_info(id);  // by value: adding cones may grow the store
    std::vector<int> groups{blk.a};
    if (blk.b != blk.a) groups.push_back(blk.b);
    add_cone_ensuring(lp_, groups, true, LiftedProgram::ConeTag::Set);
    mark(lp_.cones().back());
  }
}

LiftedProgram assemble(const VerificationProblem& vp, const BoundsTable& bounds,
                       RelaxOptions opts) {
  Lifting lifting(vp, bounds, opts);
  const auto& g = vp.graph;
  for (const Step& s : g.steps()) {
    if (const auto* a = std::get_if<AffineStep>(&s)) lifting.lift_affine(*a);
    else lifting.lift_max(std::get<MaxStep>(s));
  }
  lifting.lift_objective(vp.objective_pair.first, vp.objective_pair.second);
  lifting.lift_set(vp.init_set, vp.init_var);
  lifting.lift_set(vp.param_set, vp.param_var);
  if (opts.rlt) lifting.add_rlt_all();
  if (opts.triangle) {
    for (const Step& s : g.steps()) {
      if (const auto* m = std::get_if<MaxStep>(&s)) lifting.add_triangle(*m);
    }
  }
  lifting.add_singleton_pins();
  lifting.finalize_orphan_blocks();
  return lifting.take();
}

// ---------------------------------------------------------------------------
// exact S-lemma programs for the unconstrained family
// ---------------------------------------------------------------------------

LiftedProgram assemble_unconstrained(const Mat& P, double t, int K, const L2Ball& Z,
                                     const L2Ball& Theta, UnconstrainedMode mode) {
  if (Z.r > 0.0 && Theta.r > 0.0) {
    throw BothRadiiPositive("both radii positive: single-constraint S-lemma does not apply");
  }
  if (K < 1) throw InvalidParams("K must be >= 1");
  if (mode == UnconstrainedMode::Iterate && Theta.r != 0.0) {
    throw Error("iterate mode requires a singleton parameter set");
  }
  if (mode == UnconstrainedMode::Parameter && Z.r != 0.0) {
    throw Error("parameter mode requires a singleton initial set");
  }
  const int d = static_cast<int>(P.rows());
  Mat G = Mat::Identity(d, d) - t * P;
  Mat Gk = Mat::Identity(d, d);
  for (int k = 0; k < K - 1; ++k) Gk = G * Gk;  // (I - tP)^{K-1}
  const Mat H = G * Gk - Gk;
  const Mat E = -t * Gk;

  const bool iterate = mode == UnconstrainedMode::Iterate;
  const Vec& center = iterate ? Z.c : Theta.c;
  const double radius = iterate ? Z.r : Theta.r;
  const Vec fixed_term = iterate ? Vec(E * Theta.c) : Vec(H * Z.c);
  const Mat& F = iterate ? H : E;  // quadratic part acts through F

  LiftedProgram lp;
  const int lv = lp.add_var(iterate ? "z0" : "theta", d, VarId{}, radius == 0.0, center);
  lp.block(lv, lv);

  const Mat Q = F.transpose() * F;
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      const double w = (i == j) ? Q(i, i) : 2.0 * Q(i, j);
      if (w != 0.0) lp.objective.emplace_back(lp.col_of_pair(lv, i, lv, j), w);
    }
  }
  const Vec lin = 2.0 * F.transpose() * fixed_term;
  for (int i = 0; i < d; ++i) {
    if (lin[i] != 0.0) lp.objective.emplace_back(lp.col_of_var(lv, i), lin[i]);
  }
  lp.objective_constant = fixed_term.squaredNorm();

  RowBuilder rb;  // tr(M) - 2 c'v <= r^2 - c'c
  for (int i = 0; i < d; ++i) {
    rb.add(lp.col_of_pair(lv, i, lv, i), 1.0);
    rb.add(lp.col_of_var(lv, i), -2.0 * center[i]);
  }
  lp.add_row(rb.finish(radius * radius - center.squaredNorm(), LiftedProgram::Sense::Le,
                       LiftedProgram::RowTag::SetRow));
  lp.add_cone({{lv}, true, LiftedProgram::ConeTag::Set});
  return lp;
}

// ---------------------------------------------------------------------------
// canonicalization into the conic container (declared in conic.hpp)
// ---------------------------------------------------------------------------

ConicProgram canonicalize(const LiftedProgram& lp, CanonMap* map_out) {
  ConicProgram cp;
  cp.n_free = lp.var_col_count();

  std::vector<int> lpcol_to_conic(static_cast<std::size_t>(lp.num_cols()), -1);
  for (int i = 0; i < lp.var_col_count(); ++i) lpcol_to_conic[static_cast<std::size_t>(i)] = i;

  for (const auto& cone : lp.cones()) cp.cone_orders.push_back(lp.cone_order(cone));

  std::vector<ConicProgram::Row> ties;
  for (std::size_t ci = 0; ci < lp.cones().size(); ++ci) {
    const auto& cone = lp.cones()[ci];
    std::vector<int> offs;
    {
      int at = 0;
      for (int g : cone.groups) {
        offs.push_back(at);
        at += lp.var(g).dim;
      }
    }
    const int order = lp.cone_order(cone);
    for (std::size_t p = 0; p < cone.groups.size(); ++p) {
      for (std::size_t q = p; q < cone.groups.size(); ++q) {
        const int ga = cone.groups[p];
        const int gb = cone.groups[q];
        const int da = lp.var(ga).dim;
        const int db = lp.var(gb).dim;
        for (int i = 0; i < da; ++i) {
          const int jstart = (p == q) ? i : 0;
          for (int j = jstart; j < db; ++j) {
            const int lpcol = lp.col_of_pair(ga, i, gb, j);
            const int ccol = cp.col_of_entry(static_cast<int>(ci), offs[p] + i, offs[q] + j);
            int& owner = lpcol_to_conic[static_cast<std::size_t>(lpcol)];
            if (owner < 0) {
              owner = ccol;
            } else {
              ConicProgram::Row tie;
              tie.terms = {{ccol, 1.0}, {owner, -1.0}};
              tie.rhs = 0.0;
              tie.sense = ConicProgram::Sense::Eq;
              ties.push_back(std::move(tie));
            }
          }
        }
      }
    }
    if (cone.bordered) {
      for (std::size_t p = 0; p < cone.groups.size(); ++p) {
        const int g = cone.groups[p];
        for (int i = 0; i < lp.var(g).dim; ++i) {
          ConicProgram::Row tie;
          tie.terms = {{cp.col_of_entry(static_cast<int>(ci), offs[p] + i, order - 1), 1.0},
                       {lp.col_of_var(g, i), -1.0}};
          tie.rhs = 0.0;
          tie.sense = ConicProgram::Sense::Eq;
          ties.push_back(std::move(tie));
        }
      }
      ConicProgram::Row corner;
      corner.terms = {{cp.col_of_entry(static_cast<int>(ci), order - 1, order - 1), 1.0}};
      corner.rhs = 1.0;
      corner.sense = ConicProgram::Sense::Eq;
      ties.push_back(std::move(corner));
    }
  }

  auto remap = [&](int lpcol) -> int {
    const int c = lpcol_to_conic[static_cast<std::size_t>(lpcol)];
    if (c < 0) throw MissingBlock("lifted column not covered by any PSD constraint");
    return c;
  };

  for (const auto& row : lp.rows()) {
    ConicProgram::Row r;
    r.rhs = row.rhs;
    switch (row.sense) {
      case LiftedProgram::Sense::Eq: r.sense = ConicProgram::Sense::Eq; break;
      case LiftedProgram::Sense::Le: r.sense = ConicProgram::Sense::Le; break;
      case LiftedProgram::Sense::Ge: r.sense = ConicProgram::Sense::Ge; break;
    }
    for (const auto& [col, coef] : row.terms) r.terms.emplace_back(remap(col), coef);
    cp.rows.push_back(std::move(r));
  }
  for (auto& tie : ties) cp.rows.push_back(std::move(tie));

  for (const auto& [col, coef] : lp.objective) cp.objective.emplace_back(remap(col), coef);
  cp.objective_constant = lp.objective_constant;

  if (map_out) {
    map_out->col.assign(lpcol_to_conic.begin(), lpcol_to_conic.end());
  }
  return cp;
}

// ---------------------------------------------------------------------------
// point evaluation
// ---------------------------------------------------------------------------

double LiftedResiduals::max_violation() const {
  return std::max({max_eq, max_ineq, std::max(0.0, -min_eigenvalue)});
}

LiftedResiduals evaluate(const LiftedProgram& lp, const Vec& x) {
  if (x.size() != lp.num_cols()) throw DimensionMismatch("evaluate: assignment size");
  LiftedResiduals res;
  for (const auto& row : lp.rows()) {
    double v = -row.rhs;
    for (const auto& [col, coef] : row.terms) v += coef * x[col];
    switch (row.sense) {
      case LiftedProgram::Sense::Eq: res.max_eq = std::max(res.max_eq, std::abs(v)); break;
      case LiftedProgram::Sense::Le: res.max_ineq = std::max(res.max_ineq, v); break;
      case LiftedProgram::Sense::Ge: res.max_ineq = std::max(res.max_ineq, -v); break;
    }
  }
  res.min_eigenvalue = lp.cones().empty() ? 0.0 : kInf;
  for (const auto& cone : lp.cones()) {
    const int order = lp.cone_order(cone);
    Mat M(order, order);
    std::vector<int> offs;
    int at = 0;
    for (int g : cone.groups) {
      offs.push_back(at);
      at += lp.var(g).dim;
    }
    for (std::size_t p = 0; p < cone.groups.size(); ++p) {
      for (std::size_t q = p; q < cone.groups.size(); ++q) {
        const int ga = cone.groups[p];
        const int gb = cone.groups[q];
        for (int i = 0; i < lp.var(ga).dim; ++i) {
          for (int j = (p == q) ? i : 0; j < lp.var(gb).dim; ++j) {
            const double v = x[lp.col_of_pair(ga, i, gb, j)];
            M(offs[p] + i, offs[q] + j) = v;
            M(offs[q] + j, offs[p] + i) = v;
          }
        }
      }
    }
    if (cone.bordered) {
      for (std::size_t p = 0; p < cone.groups.size(); ++p) {
        for (int i = 0; i < lp.var(cone.groups[p]).dim; ++i) {
          const double v = x[lp.col_of_var(cone.groups[p], i)];
          M(offs[p] + i, order - 1) = v;
          M(order - 1, offs[p] + i) = v;
        }
      }
      M(order - 1, order - 1) = 1.0;
    }
    Eigen::SelfAdjointEigenSolver<Mat> eig(M, Eigen::EigenvaluesOnly);
    res.min_eigenvalue = std::min(res.min_eigenvalue, eig.eigenvalues().minCoeff());
  }
  if (!std::isfinite(res.min_eigenvalue)) res.min_eigenvalue = 0.0;
  return res;
}

double objective_value(const LiftedProgram& lp, const Vec& x) {
  double v = lp.objective_constant;
  for (const auto& [col, coef] : lp.objective) v += coef * x[col];
  return v;
}

Vec lifted_assignment(const LiftedProgram& lp, const Trajectory& traj) {
  Vec x = Vec::Zero(lp.num_cols());
  std::vector<Vec> values(static_cast<std::size_t>(lp.num_vars()));
  for (int lv = 0; lv < lp.num_vars(); ++lv) {
    const auto& e = lp.var(lv);
    if (e.graph_var.valid()) {
      values[static_cast<std::size_t>(lv)] = traj.at(e.graph_var);
    }
  }
  for (int lv = 0; lv < lp.num_vars(); ++lv) {
    const auto& e = lp.var(lv);
    if (e.graph_var.valid()) continue;
    if (e.aux == LiftedProgram::VarEntry::Aux::PolySlack) {
      Vec stacked(e.aux_A.cols());
      int at = 0;
      for (int owner : e.aux_owners) {
        stacked.segment(at, values[static_cast<std::size_t>(owner)].size()) =
            values[static_cast<std::size_t>(owner)];
        at += static_cast<int>(values[static_cast<std::size_t>(owner)].size());
      }
      values[static_cast<std::size_t>(lv)] = e.aux_b - e.aux_A * stacked;
    } else if (e.aux == LiftedProgram::VarEntry::Aux::L1Abs) {
      values[static_cast<std::size_t>(lv)] =
          (values[static_cast<std::size_t>(e.aux_owners[0])] - e.aux_c).cwiseAbs();
    } else {
      throw Error("auxiliary variable without provenance");
    }
  }
  for (int lv = 0; lv < lp.num_vars(); ++lv) {
    const Vec& v = values[static_cast<std::size_t>(lv)];
    for (int i = 0; i < lp.var(lv).dim; ++i) x[lp.col_of_var(lv, i)] = v[i];
  }
  for (const auto& blk : lp.blocks()) {
    const Vec& va = values[static_cast<std::size_t>(blk.a)];
    const Vec& vb = values[static_cast<std::size_t>(blk.b)];
    if (blk.a == blk.b) {
      for (int i = 0; i < blk.rows; ++i) {
        for (int j = i; j < blk.cols; ++j) {
          x[blk.col_begin + packed_index(i, j)] = va[i] * va[j];
        }
      }
    } else {
      for (int i = 0; i < blk.rows; ++i) {
        for (int j = 0; j < blk.cols; ++j) {
          x[blk.col_begin + i * blk.cols + j] = va[i] * vb[j];
        }
      }
    }
  }
  return x;
}

}  // namespace qpcert
