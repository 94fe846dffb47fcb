#include "relu_optset/run.hpp"

#include "relu_optset/dataset.hpp"
#include "relu_optset/errors.hpp"
#include "relu_optset/fixtures.hpp"
#include "relu_optset/numeric.hpp"
#include "relu_optset/optimal_set.hpp"
#include "relu_optset/pruning.hpp"
#include "relu_optset/sensitivity.hpp"
#include "relu_optset/serialization.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace relu_optset {

namespace fs = std::filesystem;

namespace {

struct Workspace {
  bool has_data = false;
  Dataset train, val, test;
  PatternSet patterns;
  CglProblem problem;
  Mat X_val, X_test;
  Vec y_val, y_test;
};

Workspace build_workspace(const ExperimentConfig& cfg, double lambda) {
  Workspace ws;
  if (cfg.source == "duplicate") {
    ws.problem = fixtures::duplicate_instance(lambda);
    return ws;
  }
  if (cfg.source == "min_norm_interp") {
    ws.problem = fixtures::min_norm_interp(lambda);
    return ws;
  }
  if (cfg.source == "degenerate_tuning") {
    auto t = fixtures::degenerate_tuning_instance(cfg.require_seed("the degenerate tuning generator"), lambda);
    ws.problem = t.problem;
    ws.X_val = t.X_val;
    ws.y_val = t.y_val;
    ws.X_test = t.X_test;
    ws.y_test = t.y_test;
    return ws;
  }

  Dataset ds;
  if (cfg.source == "gaussian") ds = gaussian_dataset(cfg.n, cfg.d, cfg.require_seed("the gaussian generator"), cfg.noise);
  else if (cfg.source == "csv") ds = load_dataset(cfg.path);
  else ds = fixtures::one_neuron_dataset();

  ws.has_data = true;
  if (cfg.train_frac < 1.0) {
    Split s = split_dataset(ds.n(), cfg.train_frac, cfg.val_frac, cfg.require_seed("the data split"));
    if (s.train.empty()) throw InputError("the training split is empty");
    ws.train = ds.subset(s.train);
    ws.val = ds.subset(s.val);
    ws.test = ds.subset(s.test);
  } else {
    ws.train = ds;
  }
  PatternMode mode = cfg.pattern_kind == PatternMode::Kind::exhaustive
                         ? PatternMode::exhaustive()
                         : PatternMode::sampled(cfg.pattern_count, cfg.require_seed("pattern sampling"));
  ws.patterns = enumerate_patterns(ws.train.Z, mode);
  ws.problem = build_cgl(ws.train.Z, ws.train.y, ws.patterns, lambda, cfg.arch);
  if (ws.val.n() > 0) {
    ws.X_val = design_on(ws.val.Z, ws.patterns, cfg.arch);
    ws.y_val = ws.val.y;
  }
  if (ws.test.n() > 0) {
    ws.X_test = design_on(ws.test.Z, ws.patterns, cfg.arch);
    ws.y_test = ws.test.y;
  }
  return ws;
}

std::string fmt(double x) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

void write_atomic(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, path);
  spdlog::info("wrote {}", path.string());
}

void write_json(const fs::path& path, const std::string& kind, json payload) {
  write_atomic(path, envelope(kind, std::move(payload)).dump(2) + "\n");
}

double cert_tol(const ExperimentConfig& cfg) { return std::max(1e-6, 10 * cfg.solver.kkt_tol); }

SolveResult solve_certified(const CglProblem& problem, const SolverOptions& opts) {
  SolveResult res = solve(problem, opts);
  if (!res.report.satisfied)
    throw SolverError("solver stopped after " + std::to_string(res.iterations) +
                      " iterations with KKT violation " + fmt(res.report.max_violation()));
  return res;
}

ReluNetwork network_of(const Workspace& ws, const Weights& w, Arch arch) {
  ConvexWeights cw = split_weights(ws.problem, w, arch);
  return arch == Arch::relu ? convex_to_relu(cw.v, cw.u) : convex_to_gated(cw.v, ws.patterns);
}

json problem_summary(const ExperimentConfig& cfg, const Workspace& ws) {
  json j{{"source", cfg.source},
         {"n", ws.problem.n()},
         {"d", ws.problem.d()},
         {"num_blocks", ws.problem.num_blocks()},
         {"lambda", ws.problem.lambda},
         {"constrained", ws.problem.any_constrained()}};
  if (ws.has_data) {
    j["arch"] = to_string(cfg.arch);
    j["num_patterns"] = ws.patterns.size();
    j["rows"] = json{{"train", ws.train.n()}, {"val", ws.val.n()}, {"test", ws.test.n()}};
  }
  return j;
}

double mse(const Mat& X, const Vec& y, const Weights& w) {
  if (y.size() == 0) return 0.0;
  return (X * w - y).squaredNorm() / static_cast<double>(y.size());
}

int cmd_solve(const ExperimentConfig& cfg, const fs::path& out) {
  Workspace ws = build_workspace(cfg, cfg.lambda);
  SolverOptions opts = cfg.solver;
  opts.record_trace = cfg.trace;
  SolveResult res = solve(ws.problem, opts);
  json j{{"problem", problem_summary(cfg, ws)},
         {"objective", objective(ws.problem, res.w)},
         {"penalty", penalty(ws.problem, res.w)},
         {"result", to_json(res)}};
  if (ws.has_data) {
    ReluNetwork net = network_of(ws, res.w, cfg.arch);
    j["network"] = to_json(net);
    j["network_objective"] = relu_objective(net, ws.train.Z, ws.train.y, ws.problem.lambda);
  }
  write_json(out / "solution.json", "solve", std::move(j));
  if (cfg.trace) {
    std::ostringstream os;
    write_trace_csv(os, res.trace);
    write_atomic(out / "trace.csv", os.str());
  }
  if (!res.report.satisfied) {
    spdlog::error("solver did not reach the KKT tolerance (violation {})", res.report.max_violation());
    return kSolverError;
  }
  return kOk;
}

int cmd_describe(const ExperimentConfig& cfg, const fs::path& out) {
  Workspace ws = build_workspace(cfg, cfg.lambda);
  SolveResult res = solve_certified(ws.problem, cfg.solver);
  const double tol = cert_tol(cfg);
  OptimalSetDescription desc = describe_set(ws.problem, res.w, res.rho, tol);
  UniquenessCertificate uniq = is_unique(ws.problem, res.w, res.rho, tol);
  Weights mn = min_norm(desc);
  json samples = json::array();
  if (cfg.describe_samples > 0)
    for (const auto& s : sample_solutions(desc, cfg.describe_samples, cfg.require_seed("optimal-set sampling")))
      samples.push_back(to_json(s));
  json j{{"problem", problem_summary(cfg, ws)},
         {"w", to_json(res.w)},
         {"dual", to_json(res.rho)},
         {"optimal_set", to_json(desc)},
         {"uniqueness", to_json(uniq)},
         {"min_norm", to_json(mn)},
         {"samples", std::move(samples)}};
  if (ws.has_data) {
    const int p = ws.patterns.size();
    std::vector<int> seen;
    for (int b : desc.equicorrelation) seen.push_back(b % p);
    std::sort(seen.begin(), seen.end());
    j["p_unique_premise"] = json{{"nnz_condition", nnz_premise(ws.patterns)},
                                 {"distinct_patterns_in_equicorrelation",
                                  std::adjacent_find(seen.begin(), seen.end()) == seen.end()}};
  }
  if (!ws.problem.any_constrained() && ws.problem.num_blocks() <= 12) {
    bool wide = false;
    for (int b = 0; b < ws.problem.num_blocks(); ++b) wide = wide || ws.problem.partition.width(b) > 1;
    std::uint64_t seed = wide ? cfg.require_seed("the group general position search") : 0;
    j["ggp"] = to_json(ggp_check(ws.problem.X, ws.problem.partition, GgpMode::exact_small, seed));
  }
  write_json(out / "optimal_set.json", "describe", std::move(j));
  return kOk;
}

int cmd_tune(const ExperimentConfig& cfg, const fs::path& out) {
  Workspace ws = build_workspace(cfg, cfg.lambda);
  if (ws.y_val.size() == 0 || ws.y_test.size() == 0)
    throw InputError("tune needs validation and test rows (set data.train_frac < 1 and data.val_frac > 0)");
  SolveResult res = solve_certified(ws.problem, cfg.solver);
  const double tol = cert_tol(cfg);
  OptimalSetDescription desc = describe_set(ws.problem, res.w, res.rho, tol);
  UniquenessCertificate uniq = is_unique(ws.problem, res.w, res.rho, tol);

  const std::vector<std::string> names{"min_l2", "ep", "v_mse", "t_mse"};
  std::vector<Weights> sel;
  if (uniq.verdict == Verdict::unique) {
    sel.assign(4, res.w);
  } else {
    sel = {min_norm(desc), max_norm_approx(desc), tune_over_set(desc, ws.X_val, ws.y_val),
           tune_over_set(desc, ws.X_test, ws.y_test)};
  }
  struct Row {
    std::string metric;
    std::vector<double> vals;
  };
  std::vector<Row> rows{{"train_objective", {}}, {"val_mse", {}}, {"test_mse", {}}};
  for (const auto& w : sel) {
    rows[0].vals.push_back(objective(ws.problem, w));
    rows[1].vals.push_back(mse(ws.X_val, ws.y_val, w));
    rows[2].vals.push_back(mse(ws.X_test, ws.y_test, w));
  }
  std::ostringstream csv;
  csv << "metric,min_l2,ep,v_mse,t_mse,max_diff\n";
  json table = json::object();
  for (const auto& r : rows) {
    auto [lo, hi] = std::minmax_element(r.vals.begin(), r.vals.end());
    csv << r.metric;
    for (double v : r.vals) csv << ',' << fmt(v);
    csv << ',' << fmt(*hi - *lo) << '\n';
    json jr = json::object();
    for (size_t k = 0; k < names.size(); ++k) jr[names[k]] = r.vals[k];
    jr["max_diff"] = *hi - *lo;
    table[r.metric] = std::move(jr);
  }
  json weights = json::object();
  for (size_t k = 0; k < names.size(); ++k) weights[names[k]] = to_json(sel[k]);
  write_atomic(out / "tune.csv", csv.str());
  write_json(out / "tune.json", "tune",
             json{{"problem", problem_summary(cfg, ws)},
                  {"uniqueness", to_json(uniq)},
                  {"support", desc.support},
                  {"table", std::move(table)},
                  {"weights", std::move(weights)}});
  return kOk;
}

int cmd_prune(const ExperimentConfig& cfg, const fs::path& out) {
  Workspace ws = build_workspace(cfg, cfg.lambda);
  if (!ws.has_data) throw InputError("prune needs a (Z, y) data source, not " + cfg.source);
  SolveResult res = solve_certified(ws.problem, cfg.solver);
  auto [w_min, trace] = optimal_prune(ws.problem, res.w, cert_tol(cfg));
  MinimalityResult minimal = is_minimal(ws.problem, w_min);

  ReluNetwork net = network_of(ws, res.w, cfg.arch);
  const int target = std::min(cfg.prune_target_width, net.active_width());
  const Mat* Zt = ws.test.n() > 0 ? &ws.test.Z : nullptr;
  const Vec* yt = ws.test.n() > 0 ? &ws.test.y : nullptr;
  std::vector<PruneCurveRow> rows;
  for (ScoreMethod m : cfg.prune_methods) {
    std::uint64_t seed = m == ScoreMethod::random ? cfg.require_seed("random pruning") : cfg.seed.value_or(0);
    auto r = approximate_prune_relu(ws.train.Z, ws.train.y, net, target, m, seed, Zt, yt);
    rows.insert(rows.end(), r.curve.begin(), r.curve.end());
  }
  std::ostringstream csv;
  write_prune_csv(csv, rows);
  write_atomic(out / "prune.csv", csv.str());
  write_json(out / "prune.json", "prune",
             json{{"problem", problem_summary(cfg, ws)},
                  {"objective_before", objective(ws.problem, res.w)},
                  {"objective_after", objective(ws.problem, w_min)},
                  {"trace", to_json(trace)},
                  {"minimal", minimal.minimal},
                  {"minimality_margin", minimal.margin},
                  {"pruned_w", to_json(w_min)},
                  {"initial_width", net.active_width()},
                  {"target_width", target}});
  return kOk;
}

int cmd_path(const ExperimentConfig& cfg, const fs::path& out) {
  if (cfg.lambda_grid.empty()) throw InputError("path needs [model] lambda_grid");
  PathReport report;
  json summary;
  if (cfg.source == "one_neuron") {
    report = one_neuron_path(cfg.lambda_grid);
    summary = json{{"source", cfg.source}, {"closed_form", true}, {"breakpoint", one_neuron_breakpoint()}};
  } else {
    Workspace ws = build_workspace(cfg, cfg.lambda_grid.front());
    if (!ws.has_data) throw InputError("path needs a (Z, y) data source, not " + cfg.source);
    report = trace_path(ws.train.Z, ws.train.y, ws.patterns, cfg.arch, cfg.lambda_grid, cfg.solver);
    summary = problem_summary(cfg, ws);
  }
  std::ostringstream csv;
  write_path_csv(csv, report);
  write_atomic(out / "path.csv", csv.str());
  write_json(out / "path.json", "path", json{{"problem", std::move(summary)}, {"path", to_json(report)}});
  for (int k : report.jumps)
    spdlog::info("fit jump between lambda = {} and {}", report.points[k].lambda, report.points[k + 1].lambda);
  return kOk;
}

int cmd_sensitivity(const ExperimentConfig& cfg, const fs::path& out) {
  Workspace ws = build_workspace(cfg, cfg.lambda);
  SolverOptions opts = cfg.solver;
  opts.kkt_tol = std::min(opts.kkt_tol, 1e-10);
  SolveResult res = solve_certified(ws.problem, opts);
  const double tol = cert_tol(cfg);
  auto [w_min, trace] = optimal_prune(ws.problem, res.w, tol);
  DualCertificate rho = recover_dual(ws.problem, w_min, tol);
  SensitivityReport rep = jacobians(ws.problem, w_min, rho, tol);
  json j{{"problem", problem_summary(cfg, ws)},
         {"w", to_json(w_min)},
         {"prune_trace", to_json(trace)},
         {"report", to_json(rep)}};
  if (!rep.available) {
    write_json(out / "sensitivity.json", "sensitivity", std::move(j));
    spdlog::error("Jacobians unavailable: {}", rep.reason);
    return kCertificateError;
  }
  FdResult fd = fd_jacobian(ws.problem, w_min, FdTarget::lambda, cfg.fd_step, opts);
  double err = 0.0;
  if (fd.errors.empty() && fd.active_coords == rep.active_coords) {
    for (Eigen::Index i = 0; i < fd.J.rows(); ++i)
      err = std::max(err, std::abs(fd.J(i, 0) - rep.jacobian_lambda[i]) / (1.0 + std::abs(rep.jacobian_lambda[i])));
    j["fd_check"] = json{{"step", cfg.fd_step}, {"max_relative_error_lambda", err}};
  } else {
    j["fd_check"] = json{{"step", cfg.fd_step}, {"errors", fd.errors}, {"support_changed", true}};
  }
  write_json(out / "sensitivity.json", "sensitivity", std::move(j));

  const auto& coords = rep.active_coords;
  Mat jl(coords.size(), 2), jy(coords.size(), 1 + rep.jacobian_y.cols());
  std::vector<std::string> hy{"coord"};
  for (Eigen::Index k = 0; k < rep.jacobian_y.cols(); ++k) hy.push_back("y" + std::to_string(k));
  for (size_t i = 0; i < coords.size(); ++i) {
    jl(i, 0) = coords[i];
    jl(i, 1) = rep.jacobian_lambda[i];
    jy(i, 0) = coords[i];
    jy.row(i).tail(rep.jacobian_y.cols()) = rep.jacobian_y.row(i);
  }
  std::ostringstream a, b;
  write_csv(a, {"coord", "dw_dlambda"}, jl);
  write_csv(b, hy, jy);
  write_atomic(out / "jacobian_lambda.csv", a.str());
  write_atomic(out / "jacobian_y.csv", b.str());
  return kOk;
}

int cmd_patterns(const ExperimentConfig& cfg, const fs::path& out) {
  Workspace ws = build_workspace(cfg, cfg.lambda);
  if (!ws.has_data) throw InputError("patterns needs a (Z, y) data source, not " + cfg.source);
  const PatternSet& ps = ws.patterns;
  std::ostringstream csv;
  csv << "mask,open_cell\n";
  for (int i = 0; i < ps.size(); ++i) csv << mask_to_string(ps.masks[i]) << ',' << (ps.open_cell[i] ? 1 : 0) << '\n';
  write_atomic(out / "patterns.csv", csv.str());
  write_json(out / "patterns.json", "patterns", to_json(ps));
  return kOk;
}

int cmd_probe_1d(const ExperimentConfig& cfg, const fs::path& out) {
  json entries = json::array();
  for (int n : cfg.probe_sizes) {
    Vec Z = Vec::LinSpaced(n, 0.0, n - 1.0);
    Mat A = one_d_lasso_design(Z);
    const int rank = numeric::numerical_rank(A);
    json e{{"n", n}, {"Z", to_json(Z)}, {"A", to_json(A)}, {"rank", rank},
           {"square_full_rank", A.rows() == A.cols() && rank == A.rows()}};
    try {
      bool gp = lasso_general_position(A);
      e["general_position"] = gp;
      e["verdict"] = gp ? "unique" : "not certified";
    } catch (const CapabilityError& err) {
      e["general_position"] = nullptr;
      e["verdict"] = "unknown";
      e["note"] = err.what();
    }
    spdlog::info("n = {}: {}", n, e["verdict"].get<std::string>());
    entries.push_back(std::move(e));
  }
  write_json(out / "probe_1d.json", "probe-1d", json{{"entries", std::move(entries)}});
  return kOk;
}

}  // namespace

const std::vector<std::string>& commands() {
  static const std::vector<std::string> c{"solve", "describe", "tune", "prune",
                                          "path", "sensitivity", "patterns", "probe-1d"};
  return c;
}

int run(const std::string& command, const ExperimentConfig& cfg) {
  fs::path out(cfg.out_dir);
  spdlog::info("{} -> {}", command, out.string());
  if (command == "solve") return cmd_solve(cfg, out);
  if (command == "describe") return cmd_describe(cfg, out);
  if (command == "tune") return cmd_tune(cfg, out);
  if (command == "prune") return cmd_prune(cfg, out);
  if (command == "path") return cmd_path(cfg, out);
  if (command == "sensitivity") return cmd_sensitivity(cfg, out);
  if (command == "patterns") return cmd_patterns(cfg, out);
  if (command == "probe-1d") return cmd_probe_1d(cfg, out);
  throw InputError("unknown command '" + command + "'");
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const CertificateError*>(&e)) return kCertificateError;
  if (dynamic_cast<const SolverError*>(&e)) return kSolverError;
  if (dynamic_cast<const std::invalid_argument*>(&e)) return kParseError;
  return kOtherError;
}

}  // namespace relu_optset
