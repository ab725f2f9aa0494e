#include "qpcert/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace qpcert {

namespace {

double number_from_json(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
  }
  throw ConfigError("expected a number or \"inf\"/\"-inf\", got " + j.dump());
}

Json number_to_json(double v) {
  if (v == kInf) return Json("inf");
  if (v == -kInf) return Json("-inf");
  return Json(v);
}

Mat csv_matrix(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open CSV file " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      if (cell == "inf" || cell == "+inf") row.push_back(kInf);
      else if (cell == "-inf") row.push_back(-kInf);
      else row.push_back(std::stod(cell));
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ConfigError("ragged CSV file " + path);
    }
    rows.push_back(std::move(row));
  }
  Mat m(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

std::string resolve(const std::string& base, const std::string& path) {
  if (base.empty() || path.empty() || path.front() == '/') return path;
  return base + "/" + path;
}

}  // namespace

Mat mat_from_json(const Json& j, const std::string& base_dir) {
  if (j.is_object()) {
    if (j.contains("csv")) return csv_matrix(resolve(base_dir, j.at("csv").get<std::string>()));
    if (j.contains("identity")) {
      const int n = j.at("identity").get<int>();
      return Mat::Identity(n, n);
    }
    throw ConfigError("matrix object must contain \"csv\" or \"identity\"");
  }
  if (!j.is_array()) throw ConfigError("expected a matrix, got " + j.dump());
  const auto rows = j.size();
  if (rows == 0) return Mat(0, 0);
  const auto cols = j.at(0).size();
  Mat m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (j.at(i).size() != cols) throw ConfigError("ragged matrix literal");
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = number_from_json(j.at(i).at(c));
    }
  }
  return m;
}

Vec vec_from_json(const Json& j, const std::string& base_dir) {
  if (j.is_object()) {
    Mat m = mat_from_json(j, base_dir);
    if (m.cols() != 1 && m.rows() != 1) throw ConfigError("CSV vector must be one column or one row");
    return m.cols() == 1 ? Vec(m.col(0)) : Vec(m.row(0).transpose());
  }
  if (!j.is_array()) throw ConfigError("expected a vector, got " + j.dump());
  Vec v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = number_from_json(j.at(i));
  return v;
}

Json mat_to_json(const Mat& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(number_to_json(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json vec_to_json(const Vec& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number_to_json(v[i]));
  return out;
}

SetSpec set_from_json(const Json& j, const std::string& base_dir) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "hypercube") {
    return Hypercube{vec_from_json(j.at("l"), base_dir), vec_from_json(j.at("u"), base_dir)};
  }
  if (type == "polyhedron") {
    return Polyhedron{mat_from_json(j.at("A"), base_dir), vec_from_json(j.at("b"), base_dir)};
  }
  if (type == "l1ball") {
    return L1Ball{vec_from_json(j.at("center"), base_dir), j.at("radius").get<double>()};
  }
  if (type == "l2ball") {
    return L2Ball{vec_from_json(j.at("center"), base_dir), j.at("radius").get<double>()};
  }
  if (type == "linfball") {
    return LinfBall{vec_from_json(j.at("center"), base_dir), j.at("radius").get<double>()};
  }
  if (type == "singleton") return Singleton{vec_from_json(j.at("v"), base_dir)};
  throw ConfigError("unknown set type " + type);
}

Json set_to_json(const SetSpec& s) {
  return std::visit(
      [](const auto& sp) -> Json {
        using T = std::decay_t<decltype(sp)>;
        Json j;
        if constexpr (std::is_same_v<T, Hypercube>) {
          j["type"] = "hypercube";
          j["l"] = vec_to_json(sp.l);
          j["u"] = vec_to_json(sp.u);
        } else if constexpr (std::is_same_v<T, Polyhedron>) {
          j["type"] = "polyhedron";
          j["A"] = mat_to_json(sp.A);
          j["b"] = vec_to_json(sp.b);
        } else if constexpr (std::is_same_v<T, L1Ball>) {
          j["type"] = "l1ball";
          j["center"] = vec_to_json(sp.c);
          j["radius"] = sp.r;
        } else if constexpr (std::is_same_v<T, L2Ball>) {
          j["type"] = "l2ball";
          j["center"] = vec_to_json(sp.c);
          j["radius"] = sp.r;
        } else if constexpr (std::is_same_v<T, LinfBall>) {
          j["type"] = "linfball";
          j["center"] = vec_to_json(sp.c);
          j["radius"] = sp.r;
        } else {
          j["type"] = "singleton";
          j["v"] = vec_to_json(sp.v);
        }
        return j;
      },
      s);
}

// ---------------------------------------------------------------------------
// graph round-trip
// ---------------------------------------------------------------------------

Json vp_to_json(const VerificationProblem& vp) {
  const auto& g = vp.graph;
  Json j;
  Json vars = Json::array();
  for (int i = 0; i < g.num_vars(); ++i) {
    const auto& inf = g.info(VarId{i});
    if (inf.kind == VarKind::StepOutput) continue;  // produced by steps
    Json v;
    v["name"] = inf.name;
    v["dim"] = inf.dim;
    switch (inf.kind) {
      case VarKind::Initial: v["kind"] = "initial"; break;
      case VarKind::Parameter: v["kind"] = "parameter"; break;
      case VarKind::Constant:
        v["kind"] = "constant";
        v["value"] = vec_to_json(inf.value);
        break;
      default: break;
    }
    vars.push_back(std::move(v));
  }
  j["vars"] = std::move(vars);

  Json steps = Json::array();
  for (const Step& s : g.steps()) {
    Json st;
    if (const auto* a = std::get_if<AffineStep>(&s)) {
      st["type"] = "affine";
      st["out"] = g.name(a->out);
      st["iteration"] = g.info(a->out).iteration;
      st["D"] = mat_to_json(a->D);
      Json terms = Json::array();
      for (const auto& [A, x] : a->terms) {
        Json t;
        t["coef"] = mat_to_json(A);
        t["var"] = g.name(x);
        terms.push_back(std::move(t));
      }
      st["terms"] = std::move(terms);
    } else {
      const auto& m = std::get<MaxStep>(s);
      st["type"] = "max";
      st["out"] = g.name(m.out);
      st["iteration"] = g.info(m.out).iteration;
      st["lhs"] = g.name(m.lhs);
      st["rhs"] = g.name(m.rhs);
      st["active"] = m.active;
    }
    steps.push_back(std::move(st));
  }
  j["steps"] = std::move(steps);

  j["K"] = vp.K;
  j["init"] = g.name(vp.init_var);
  j["param"] = g.name(vp.param_var);
  j["z_set"] = set_to_json(vp.init_set);
  j["theta_set"] = set_to_json(vp.param_set);
  j["objective"] = Json::array({g.name(vp.objective_pair.first), g.name(vp.objective_pair.second)});
  Json iterates = Json::array();
  for (VarId v : vp.iterates) iterates.push_back(g.name(v));
  j["iterates"] = std::move(iterates);
  Json blocks = Json::array();
  for (const auto& [b, e] : vp.iteration_steps) blocks.push_back(Json::array({b, e}));
  j["iteration_steps"] = std::move(blocks);
  return j;
}

VerificationProblem vp_from_json(const Json& j, const std::string& base_dir) {
  VerificationProblem vp;
  auto& g = vp.graph;
  for (const auto& v : j.at("vars")) {
    const std::string kind = v.at("kind").get<std::string>();
    const std::string name = v.at("name").get<std::string>();
    if (kind == "initial") g.add_initial(name, v.at("dim").get<int>());
    else if (kind == "parameter") g.add_parameter(name, v.at("dim").get<int>());
    else if (kind == "constant") g.add_constant(name, vec_from_json(v.at("value"), base_dir));
    else throw ConfigError("unknown var kind " + kind);
  }
  auto lookup = [&](const std::string& name) {
    auto id = g.find(name);
    if (!id) throw ConfigError("unknown variable '" + name + "' in graph");
    return *id;
  };
  for (const auto& st : j.at("steps")) {
    const std::string type = st.at("type").get<std::string>();
    const int iteration = st.value("iteration", 0);
    if (type == "affine") {
      std::vector<std::pair<Mat, VarId>> terms;
      for (const auto& t : st.at("terms")) {
        terms.emplace_back(mat_from_json(t.at("coef"), base_dir), lookup(t.at("var").get<std::string>()));
      }
      g.add_affine_step(mat_from_json(st.at("D"), base_dir), std::move(terms),
                        st.at("out").get<std::string>(), iteration);
    } else if (type == "max") {
      g.add_max_step(lookup(st.at("lhs").get<std::string>()),
                     lookup(st.at("rhs").get<std::string>()),
                     st.at("active").get<std::vector<int>>(),
                     st.at("out").get<std::string>(), iteration);
    } else {
      throw ConfigError("unknown step type " + type);
    }
  }
  vp.K = j.at("K").get<int>();
  vp.init_var = lookup(j.at("init").get<std::string>());
  vp.param_var = lookup(j.at("param").get<std::string>());
  vp.init_set = set_from_json(j.at("z_set"), base_dir);
  vp.param_set = set_from_json(j.at("theta_set"), base_dir);
  vp.objective_pair = {lookup(j.at("objective").at(0).get<std::string>()),
                       lookup(j.at("objective").at(1).get<std::string>())};
  for (const auto& name : j.at("iterates")) vp.iterates.push_back(lookup(name.get<std::string>()));
  if (j.contains("iteration_steps")) {
    for (const auto& be : j.at("iteration_steps")) {
      vp.iteration_steps.emplace_back(be.at(0).get<int>(), be.at(1).get<int>());
    }
  }
  return vp;
}

// ---------------------------------------------------------------------------
// experiment config
// ---------------------------------------------------------------------------

ExperimentConfig config_from_json(const Json& j, const std::string& base_dir) {
  ExperimentConfig cfg;
  try {
    cfg.family = j.at("family").get<std::string>();
    cfg.params = j.value("params", Json::object());
    if (j.contains("k_range")) {
      cfg.k_min = j.at("k_range").at(0).get<int>();
      cfg.k_max = j.at("k_range").at(1).get<int>();
    }
    if (cfg.k_min < 1 || cfg.k_max < cfg.k_min) throw ConfigError("empty K range");
    if (j.contains("z_set")) cfg.z_set = set_from_json(j.at("z_set"), base_dir);
    if (j.contains("theta_set")) cfg.theta_set = set_from_json(j.at("theta_set"), base_dir);
    if (j.contains("relax")) {
      cfg.relax.rlt = j.at("relax").value("rlt", true);
      cfg.relax.triangle = j.at("relax").value("triangle", true);
    }
    if (j.contains("sampler")) {
      cfg.sample_n = j.at("sampler").value("n", 10000);
      cfg.seed = j.at("sampler").value("seed", std::uint64_t{0});
    }
    if (j.contains("solver")) {
      cfg.solver_backend = j.at("solver").value("backend", std::string{});
      cfg.solver_tol = j.at("solver").value("tol", 1e-7);
      cfg.solver_max_iter = j.at("solver").value("max_iter", 200000);
      cfg.solver_time_limit_s = j.at("solver").value("time_limit_s", 55.0);
    }
    cfg.out_dir = j.value("out_dir", std::string("out"));
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  const bool known = cfg.family == "unconstrained" || cfg.family == "nnls" ||
                     cfg.family == "num" || cfg.family == "lasso" ||
                     cfg.family == "control" || cfg.family == "custom-graph";
  if (!known) throw ConfigError("unknown family " + cfg.family);
  return cfg;
}

Json config_to_json(const ExperimentConfig& cfg) {
  Json j;
  j["family"] = cfg.family;
  j["params"] = cfg.params;
  j["k_range"] = Json::array({cfg.k_min, cfg.k_max});
  j["z_set"] = set_to_json(cfg.z_set);
  j["theta_set"] = set_to_json(cfg.theta_set);
  j["relax"] = Json{{"rlt", cfg.relax.rlt}, {"triangle", cfg.relax.triangle}};
  j["sampler"] = Json{{"n", cfg.sample_n}, {"seed", cfg.seed}};
  j["solver"] = Json{{"backend", cfg.solver_backend},
                     {"tol", cfg.solver_tol},
                     {"max_iter", cfg.solver_max_iter},
                     {"time_limit_s", cfg.solver_time_limit_s}};
  j["out_dir"] = cfg.out_dir;
  return j;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  Json j;
  try {
    is >> j;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  std::string base_dir;
  const auto slash = path.find_last_of('/');
  if (slash != std::string::npos) base_dir = path.substr(0, slash);
  return config_from_json(j, base_dir);
}

// ---------------------------------------------------------------------------
// family dispatch
// ---------------------------------------------------------------------------

bool family_is_unconstrained(const ExperimentConfig& cfg) {
  return cfg.family == "unconstrained";
}

VerificationProblem build_vp(const ExperimentConfig& cfg, int K) {
  const Json& p = cfg.params;
  if (cfg.family == "unconstrained") {
    // sampling and bounds run on the equivalent gradient-descent graph
    const Mat P = mat_from_json(p.at("P"));
    const double t = p.at("t").get<double>();
    return build_gradient_descent(P, LinearTerm::identity(static_cast<int>(P.rows())),
                                  StepSchedule(t), K, cfg.z_set, cfg.theta_set);
  }
  if (cfg.family == "nnls") {
    const Mat A = mat_from_json(p.at("A"));
    std::vector<double> sched = p.at("schedule").get<std::vector<double>>();
    return build_projected_gd(A, LinearTerm::identity(static_cast<int>(A.rows())),
                              StepSchedule(sched), K, cfg.z_set, cfg.theta_set);
  }
  if (cfg.family == "num") {
    const Mat M = mat_from_json(p.at("M"));
    const int n = p.at("n").get<int>();
    const int m = p.at("m").get<int>();
    LinearTerm q_map{mat_from_json(p.at("q_W")), vec_from_json(p.at("q_offset"))};
    return build_dr_splitting(M, q_map, n, m, K, cfg.z_set, cfg.theta_set);
  }
  if (cfg.family == "lasso") {
    const Mat A = mat_from_json(p.at("A"));
    const double lambda = p.at("lambda").get<double>();
    const double t = p.at("t").get<double>();
    const std::string alg = p.value("algorithm", "ista");
    const LinearTerm b_map = LinearTerm::identity(static_cast<int>(A.rows()));
    if (alg == "ista") return build_ista(A, b_map, lambda, t, K, cfg.z_set, cfg.theta_set);
    if (alg == "fista") return build_fista(A, b_map, lambda, t, K, cfg.z_set, cfg.theta_set);
    throw ConfigError("unknown lasso algorithm " + alg);
  }
  if (cfg.family == "control") {
    const Mat P = mat_from_json(p.at("P"));
    const Mat A = mat_from_json(p.at("A"));
    AdmmConfig admm;
    admm.sigma = p.at("sigma").get<double>();
    admm.rho = vec_from_json(p.at("rho"));
    LinearTerm l_map{mat_from_json(p.at("l_W")), vec_from_json(p.at("l_offset"))};
    LinearTerm u_map{mat_from_json(p.at("u_W")), vec_from_json(p.at("u_offset"))};
    return build_osqp_admm(P, A, admm, l_map, u_map, K, cfg.z_set, cfg.theta_set);
  }
  if (cfg.family == "custom-graph") {
    VerificationProblem vp = vp_from_json(p.at("graph"));
    if (K != vp.K) throw ConfigError("custom-graph: K must match the embedded graph");
    vp.init_set = cfg.z_set;
    vp.param_set = cfg.theta_set;
    return vp;
  }
  throw ConfigError("unknown family " + cfg.family);
}

LiftedProgram build_unconstrained_lp(const ExperimentConfig& cfg, int K) {
  const Json& p = cfg.params;
  const Mat P = mat_from_json(p.at("P"));
  const double t = p.at("t").get<double>();
  const std::string mode = p.value("mode", "iterate");
  const auto* z = std::get_if<L2Ball>(&cfg.z_set);
  const auto* th = std::get_if<L2Ball>(&cfg.theta_set);
  L2Ball zb = z ? *z : L2Ball{std::get<Singleton>(cfg.z_set).v, 0.0};
  L2Ball tb = th ? *th : L2Ball{std::get<Singleton>(cfg.theta_set).v, 0.0};
  return assemble_unconstrained(P, t, K, zb, tb,
                                mode == "parameter" ? UnconstrainedMode::Parameter
                                                    : UnconstrainedMode::Iterate);
}

}  // namespace qpcert
