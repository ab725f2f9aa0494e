#pragma once

#include <optional>
#include <vector>

#include "qpcert/model.hpp"
#include "qpcert/types.hpp"

namespace qpcert {

struct StepSchedule {
  std::vector<double> values;  // length K, or length 1 for a constant step

  StepSchedule() = default;
  explicit StepSchedule(double t) : values{t} {}
  explicit StepSchedule(std::vector<double> v) : values(std::move(v)) {}

  double at(int k) const { return values.size() == 1 ? values[0] : values.at(static_cast<std::size_t>(k)); }
  void check(int K) const {
    if (values.empty() || (values.size() != 1 && static_cast<int>(values.size()) != K)) {
      throw InvalidSchedule("schedule must have length 1 or K");
    }
    for (double t : values) {
      if (!(t > 0.0)) throw InvalidSchedule("step sizes must be positive");
    }
  }
};

struct AdmmConfig {
  double sigma = 1e-6;
  Vec rho;  // one entry (scalar rho) or m entries (diagonal)
};

// Momentum coefficient rule beta_k = (k-1)/(k+2) with a configurable starting
// index (negative raw values clamp to zero), or an explicit list.
struct BetaRule {
  std::optional<std::vector<double>> explicit_values;
  int start_k = 1;

  static BetaRule nesterov(int start_k = 1) {
    BetaRule r;
    r.start_k = start_k;
    return r;
  }
  static BetaRule list(std::vector<double> v) {
    BetaRule r;
    r.explicit_values = std::move(v);
    return r;
  }
  double at(int k) const {
    if (explicit_values) return explicit_values->at(static_cast<std::size_t>(k));
    const double raw = static_cast<double>(start_k + k - 1) / static_cast<double>(start_k + k + 2);
    return std::max(0.0, raw);
  }
};

VerificationProblem build_gradient_descent(const Mat& P, const LinearTerm& q_map,
                                           const StepSchedule& schedule, int K, SetSpec Z,
                                           SetSpec Theta);

VerificationProblem build_nesterov(const Mat& P, const LinearTerm& q_map, double t,
                                   const BetaRule& beta_rule, int K, SetSpec Z,
                                   SetSpec Theta);

// projected gradient descent for nonnegative least squares
VerificationProblem build_projected_gd(const Mat& A, const LinearTerm& b_map,
                                       const StepSchedule& schedule, int K, SetSpec Z,
                                       SetSpec Theta);

// Douglas-Rachford splitting for the LP complementarity system with skew
// matrix M ((n+m) x (n+m)); the cone projection clips the last m coordinates.
VerificationProblem build_dr_splitting(const Mat& M, const LinearTerm& q_map, int n, int m,
                                       int K, SetSpec Z, SetSpec Theta);

VerificationProblem build_ista(const Mat& A, const LinearTerm& b_map, double lambda,
                               double t, int K, SetSpec Z, SetSpec Theta);

// FISTA over the stacked initial state (z^0, w^0); Z constrains the stack.
VerificationProblem build_fista(const Mat& A, const LinearTerm& b_map, double lambda,
                                double t, int K, SetSpec Z, SetSpec Theta);

double fista_beta(int k);  // beta_0 = 1, beta_{k+1} = (1 + sqrt(1 + 4 beta_k^2))/2

// ADMM in the fixed step-size QP-solver form; iterate z = (x, v), Z constrains
// the stack.
VerificationProblem build_osqp_admm(const Mat& P, const Mat& A, const AdmmConfig& config,
                                    const LinearTerm& l_map, const LinearTerm& u_map, int K,
                                    SetSpec Z, SetSpec Theta);

// Condensed input-constrained control QP over a double-integrator-with-drag
// model; theta = (sbar, u0) in R^6 enters the bounds affinely.
struct MpcQpData {
  Mat P;
  Mat A;
  LinearTerm l_map, u_map;
  Mat A_dyn, B_dyn, C;
  int T = 0;
};

MpcQpData build_mpc_qp(double h, double eta, double mass, double gamma, double u_max,
                       double d_max, int T);

}  // namespace qpcert
