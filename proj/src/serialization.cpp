#include "relu_optset/serialization.hpp"

#include "relu_optset/errors.hpp"

#include <cmath>

namespace relu_optset {

namespace {

// JSON has no NaN/Inf; they are written as null.
json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

double get_num(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!j.is_number()) throw ParseError("expected a number in JSON input");
  return j.get<double>();
}

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(std::string("missing JSON field '") + key + "'");
  return j.at(key);
}

}  // namespace

json to_json(const Mat& M) {
  json data = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index k = 0; k < M.cols(); ++k) data.push_back(num(M(i, k)));
  return json{{"rows", M.rows()}, {"cols", M.cols()}, {"data", std::move(data)}};
}

json to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
  return a;
}

json to_json(const IndexSet& s) { return json(s); }

Mat mat_from_json(const json& j) {
  auto r = field(j, "rows").get<Eigen::Index>();
  auto c = field(j, "cols").get<Eigen::Index>();
  const json& d = field(j, "data");
  if (!d.is_array() || static_cast<Eigen::Index>(d.size()) != r * c)
    throw ParseError("matrix data length differs from rows*cols");
  Mat M(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index k = 0; k < c; ++k) M(i, k) = get_num(d[i * c + k]);
  return M;
}

Vec vec_from_json(const json& j) {
  if (!j.is_array()) throw ParseError("expected a JSON array for a vector");
  Vec v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[i] = get_num(j[i]);
  return v;
}

json to_json(const BlockPartition& p) { return json(p.blocks()); }

BlockPartition partition_from_json(const json& j) {
  return BlockPartition(j.get<std::vector<std::vector<int>>>());
}

json to_json(const CglProblem& p) {
  json K = json::array();
  for (const auto& k : p.K) K.push_back(k ? to_json(*k) : json(nullptr));
  return json{{"X", to_json(p.X)},
              {"y", to_json(p.y)},
              {"blocks", to_json(p.partition)},
              {"constraints", std::move(K)},
              {"lambda", p.lambda}};
}

CglProblem problem_from_json(const json& j) {
  CglProblem p;
  p.X = mat_from_json(field(j, "X"));
  p.y = vec_from_json(field(j, "y"));
  p.partition = partition_from_json(field(j, "blocks"));
  p.lambda = field(j, "lambda").get<double>();
  if (j.contains("constraints")) {
    for (const auto& k : j.at("constraints")) {
      if (k.is_null()) p.K.emplace_back();
      else p.K.emplace_back(mat_from_json(k));
    }
  } else {
    p.K.resize(p.partition.num_blocks());
  }
  p.validate();
  return p;
}

json weights_to_json(const CglProblem& p, const Weights& w) {
  json blocks = json::array();
  for (int i = 0; i < p.num_blocks(); ++i) blocks.push_back(to_json(p.partition.gather(w, i)));
  return json{{"w", to_json(w)}, {"blocks", std::move(blocks)}};
}

Weights weights_from_json(const json& j) { return vec_from_json(j.is_object() ? field(j, "w") : j); }

json to_json(const DualCertificate& d) {
  json a = json::array();
  for (const auto& r : d.rho) a.push_back(to_json(r));
  return json{{"rho", std::move(a)}};
}

DualCertificate dual_from_json(const json& j) {
  DualCertificate d;
  for (const auto& r : field(j, "rho")) d.rho.push_back(vec_from_json(r));
  return d;
}

json to_json(const KktReport& r) {
  json c = json::array(), v = json::array();
  for (const auto& x : r.correlations) c.push_back(to_json(x));
  for (const auto& x : r.v_vectors) v.push_back(to_json(x));
  return json{{"residual", to_json(r.residual)},
              {"correlations", std::move(c)},
              {"v_vectors", std::move(v)},
              {"stationarity_violation", num(r.stationarity_violation)},
              {"feasibility_violation", num(r.feasibility_violation)},
              {"slackness_violation", num(r.slackness_violation)},
              {"equicorrelation", r.equicorrelation},
              {"active", r.active},
              {"satisfied", r.satisfied},
              {"tol", r.tol}};
}

json to_json(const SolverOptions& o) {
  return json{{"max_iters", o.max_iters},
              {"kkt_tol", o.kkt_tol},
              {"step_rule", to_string(o.step_rule)},
              {"al_penalty_init", o.al_penalty_init},
              {"al_penalty_growth", o.al_penalty_growth},
              {"seed", o.seed},
              {"random_init", o.random_init},
              {"method", to_string(o.method)}};
}

SolverOptions solver_options_from_json(const json& j) {
  SolverOptions o;
  if (j.contains("max_iters")) o.max_iters = j.at("max_iters").get<int>();
  if (j.contains("kkt_tol")) o.kkt_tol = j.at("kkt_tol").get<double>();
  if (j.contains("step_rule")) o.step_rule = parse_step_rule(j.at("step_rule").get<std::string>());
  if (j.contains("al_penalty_init")) o.al_penalty_init = j.at("al_penalty_init").get<double>();
  if (j.contains("al_penalty_growth")) o.al_penalty_growth = j.at("al_penalty_growth").get<double>();
  if (j.contains("seed")) o.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("random_init")) o.random_init = j.at("random_init").get<bool>();
  if (j.contains("method")) o.method = parse_solver_method(j.at("method").get<std::string>());
  o.validate();
  return o;
}

json to_json(const SolveResult& r) {
  return json{{"w", to_json(r.w)},
              {"dual", to_json(r.rho)},
              {"kkt", to_json(r.report)},
              {"converged", r.converged},
              {"iterations", r.iterations},
              {"method", to_string(r.method_used)}};
}

json to_json(const PatternSet& ps) {
  json masks = json::array(), wit = json::array(), open = json::array();
  for (const auto& m : ps.masks) masks.push_back(mask_to_string(m));
  for (const auto& u : ps.witnesses) wit.push_back(to_json(u));
  for (bool b : ps.open_cell) open.push_back(b);
  json prov = ps.provenance.kind == PatternMode::Kind::exhaustive
                  ? json{{"mode", "enumerated"}}
                  : json{{"mode", "sampled"}, {"seed", ps.provenance.seed}, {"count", ps.provenance.count}};
  return json{{"n", ps.n},
              {"d", ps.d},
              {"rank_of_Z", ps.rank_of_Z},
              {"provenance", std::move(prov)},
              {"masks", std::move(masks)},
              {"witnesses", std::move(wit)},
              {"open_cell", std::move(open)},
              {"count", ps.size()},
              {"open_cell_count", ps.open_cell_count()},
              {"growth_bound", ps.growth_bound()}};
}

PatternSet pattern_set_from_json(const json& j) {
  PatternSet ps;
  ps.n = field(j, "n").get<int>();
  ps.d = field(j, "d").get<int>();
  ps.rank_of_Z = field(j, "rank_of_Z").get<int>();
  const json& prov = field(j, "provenance");
  if (field(prov, "mode").get<std::string>() == "sampled")
    ps.provenance = PatternMode::sampled(field(prov, "count").get<int>(), field(prov, "seed").get<std::uint64_t>());
  for (const auto& m : field(j, "masks")) ps.masks.push_back(mask_from_string(m.get<std::string>()));
  for (const auto& u : field(j, "witnesses")) ps.witnesses.push_back(vec_from_json(u));
  for (const auto& b : field(j, "open_cell")) ps.open_cell.push_back(b.get<bool>());
  if (ps.witnesses.size() != ps.masks.size() || ps.open_cell.size() != ps.masks.size())
    throw ParseError("pattern set: masks, witnesses and open_cell differ in length");
  return ps;
}

json to_json(const ReluNetwork& net) {
  json j{{"W1", to_json(net.W1)}, {"w2", to_json(net.w2)}};
  if (net.gates) j["gates"] = to_json(*net.gates);
  if (net.bias1) j["bias1"] = to_json(*net.bias1);
  if (net.bias2) j["bias2"] = *net.bias2;
  return j;
}

json to_json(const OptimalSetDescription& d) {
  json v = json::object();
  for (int b : d.equicorrelation) v[std::to_string(b)] = to_json(d.v_vectors[b]);
  return json{{"lambda", d.problem.lambda},
              {"y_hat", to_json(d.y_hat)},
              {"equicorrelation", d.equicorrelation},
              {"active", d.active},
              {"eligible", d.eligible},
              {"support", d.support},
              {"subset_only", d.subset_only},
              {"v_vectors", std::move(v)},
              {"generators", to_json(d.generators)},
              {"alpha_w", to_json(d.alpha_w)}};
}

json to_json(const UniquenessCertificate& c) {
  json j{{"verdict", to_string(c.verdict)},
         {"margin", num(c.margin)},
         {"tolerance", num(c.tolerance)},
         {"columns_independent", c.columns_independent},
         {"note", c.note}};
  if (c.witness) j["witness"] = to_json(*c.witness);
  return j;
}

json to_json(const GgpResult& g) {
  return json{{"violation_found", g.violation_found},
              {"verdict", g.violation_found ? "violation found" : "no violation found"},
              {"method", g.method},
              {"grid_resolution", g.grid_resolution},
              {"starts", g.starts},
              {"best_residual", num(g.best_residual)},
              {"violating_subset", g.violating_subset},
              {"violating_pivot", g.violating_pivot}};
}

json to_json(const PathReport& r) {
  json pts = json::array();
  for (const auto& p : r.points)
    pts.push_back(json{{"lambda", p.lambda},
                       {"objective", num(p.objective)},
                       {"penalty", num(p.penalty)},
                       {"fit", to_json(p.fit)},
                       {"fit_norm", num(p.fit_norm)},
                       {"support", p.support},
                       {"converged", p.converged},
                       {"kkt_violation", num(p.kkt_violation)},
                       {"jump", p.jump},
                       {"error", p.error}});
  return json{{"points", std::move(pts)}, {"jumps", r.jumps}};
}

json to_json(const PruneTrace& t) {
  json steps = json::array();
  for (const auto& s : t.steps)
    steps.push_back(json{{"removed_block", s.removed_block},
                         {"t", s.t},
                         {"beta_norm", s.beta_norm},
                         {"objective_before", s.objective_before},
                         {"objective_after", s.objective_after}});
  return json{{"initial_support", t.initial_support}, {"final_support", t.final_support}, {"steps", std::move(steps)}};
}

json to_json(const SensitivityReport& r) {
  json j{{"active_blocks", r.active_blocks},
         {"active_coords", r.active_coords},
         {"minimal", r.minimal},
         {"licq", r.licq},
         {"scs", r.scs},
         {"available", r.available},
         {"reason", r.reason},
         {"d_condition", num(r.d_condition)},
         {"hessian_min_eig", num(r.hessian_min_eig)}};
  if (r.available) {
    j["jacobian_lambda"] = to_json(r.jacobian_lambda);
    j["jacobian_y"] = to_json(r.jacobian_y);
  }
  return j;
}

json envelope(const std::string& kind, json payload) {
  return json{{"schema_version", kSchemaVersion}, {"kind", kind}, {"data", std::move(payload)}};
}

}  // namespace relu_optset
