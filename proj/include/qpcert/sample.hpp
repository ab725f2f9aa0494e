#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "qpcert/model.hpp"
#include "qpcert/types.hpp"

namespace qpcert {

struct SampleReport {
  int n = 0;
  std::uint64_t seed = 0;
  std::vector<double> max_residual;  // index k-1 holds max ||z^k - z^{k-1}||^2
  std::vector<int> argmax;           // sample index attaining each maximum
};

// Uniform samples from a bounded set; deterministic under (seed).
std::vector<Vec> sample_set(const SetSpec& set, int n, std::uint64_t seed);

SampleReport sample_max(const VerificationProblem& vp, int N = 10000,
                        std::uint64_t seed = 0);

// Iterates the final iteration block of the graph to a fixed point.
Vec solve_fixpoint(const VerificationProblem& vp, const Vec& theta, double tol = 1e-10,
                   long maxiter = 1000000);

// tau^{k-1} (1 + tau) * dist0 with tau = max(|1 - t mu|, |1 - t L|); bounds
// ||z^k - z^{k-1}|| (not squared) for gradient descent.
double analytic_gd_bound(double mu, double L, double t, int k, double dist0);

void write_sample_csv(std::ostream& os, const SampleReport& rep);

}  // namespace qpcert
