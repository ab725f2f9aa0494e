#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "qpcert/algorithms.hpp"
#include "qpcert/model.hpp"
#include "qpcert/relax.hpp"

namespace qpcert {

using Json = nlohmann::json;

// Experiment description; schema documented in docs/config_schema.md.
struct ExperimentConfig {
  std::string family;  // unconstrained | nnls | num | lasso | control | custom-graph
  Json params;         // family-specific parameters
  int k_min = 1, k_max = 1;
  SetSpec z_set = Singleton{Vec::Zero(0)};
  SetSpec theta_set = Singleton{Vec::Zero(0)};
  RelaxOptions relax;
  int sample_n = 10000;
  std::uint64_t seed = 0;
  std::string solver_backend;
  double solver_tol = 1e-7;
  int solver_max_iter = 200000;
  double solver_time_limit_s = 55.0;
  std::string out_dir = "out";
};

ExperimentConfig config_from_json(const Json& j, const std::string& base_dir = {});
Json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);

// JSON representations (inline arrays or {"csv": path}); infinities are the
// strings "inf" / "-inf"
Mat mat_from_json(const Json& j, const std::string& base_dir = {});
Vec vec_from_json(const Json& j, const std::string& base_dir = {});
Json mat_to_json(const Mat& m);
Json vec_to_json(const Vec& v);
SetSpec set_from_json(const Json& j, const std::string& base_dir = {});
Json set_to_json(const SetSpec& s);

// Iteration graphs round-trip through the same config format.
Json vp_to_json(const VerificationProblem& vp);
VerificationProblem vp_from_json(const Json& j, const std::string& base_dir = {});

// Builds the verification problem for one K (all families except
// "unconstrained", which is assembled directly as an SDP).
VerificationProblem build_vp(const ExperimentConfig& cfg, int K);

bool family_is_unconstrained(const ExperimentConfig& cfg);
LiftedProgram build_unconstrained_lp(const ExperimentConfig& cfg, int K);

}  // namespace qpcert
