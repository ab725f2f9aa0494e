#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "qpcert/model.hpp"
#include "qpcert/types.hpp"

namespace qpcert {

struct VarBounds {
  Vec lower, upper;  // entries in R, +-inf permitted
  int dim() const { return static_cast<int>(lower.size()); }
  bool finite(int i) const { return std::isfinite(lower[i]) && std::isfinite(upper[i]); }
  double width(int i) const { return upper[i] - lower[i]; }
};

struct BoundsTable {
  std::vector<VarBounds> by_var;  // indexed by VarId.idx
  std::vector<std::string> notes;  // e.g. unbounded polyhedron coordinates
  const VarBounds& at(VarId v) const { return by_var.at(static_cast<std::size_t>(v.idx)); }
};

enum class NormP { One, Two, Inf };

VarBounds initial_bounds(const SetSpec& set);

// y = Atil x + Btil q with interval arithmetic on both terms.
VarBounds propagate_affine_interval(const Mat& Atil, const Mat& Btil, const VarBounds& x,
                                    const VarBounds& q);

// single-term interval product bounds for y = A x
VarBounds interval_matvec(const Mat& A, const VarBounds& x);

// dual-norm bounds for y = Atil x when x lies in an lp-ball
VarBounds propagate_affine_lpball(const Mat& Atil, const Vec& c, double r, NormP p);

VarBounds propagate_max(const VarBounds& x, const VarBounds& l,
                        const std::vector<int>& active);

BoundsTable propagate_all(const VerificationProblem& vp);

void write_bounds_csv(std::ostream& os, const IterationGraph& g, const BoundsTable& table);

}  // namespace qpcert
