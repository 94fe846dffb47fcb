#include "relu_optset/config.hpp"

#include "relu_optset/errors.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace relu_optset {

namespace pt = boost::property_tree;

namespace {

const std::set<std::string> kSources{"gaussian", "csv", "duplicate", "min_norm_interp", "one_neuron",
                                     "degenerate_tuning"};

const std::map<std::string, std::set<std::string>> kKeys{
    {"experiment", {"seed"}},
    {"data", {"source", "path", "n", "d", "noise", "train_frac", "val_frac"}},
    {"model", {"arch", "patterns", "pattern_count", "lambda", "lambda_grid"}},
    {"solver",
     {"method", "max_iters", "kkt_tol", "step_rule", "al_penalty_init", "al_penalty_growth", "random_init",
      "trace"}},
    {"describe", {"samples"}},
    {"prune", {"target_width", "methods"}},
    {"sensitivity", {"fd_step"}},
    {"probe", {"sizes"}},
    {"output", {"dir"}},
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) {
    auto b = cur.find_first_not_of(" \t");
    auto e = cur.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? std::string() : cur.substr(b, e - b + 1));
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& s) {
  T x{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError("config: bad value '" + s + "' for " + key);
  return x;
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ParseError("config: bad boolean '" + s + "' for " + key);
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  char buf[32];
  for (size_t i = 0; i < v.size(); ++i) {
    auto r = std::to_chars(buf, buf + sizeof buf, v[i]);
    out += (i ? "," : "") + std::string(buf, r.ptr);
  }
  return out;
}

std::string fmt_double(double x) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

}  // namespace

std::vector<double> parse_lambda_grid(const std::string& s) {
  std::vector<double> grid;
  if (s.empty()) return grid;
  if (s.find(':') != std::string::npos) {
    auto parts = split(s, ':');
    if (parts.size() != 3) throw ParseError("config: lambda_grid range must be start:stop:count");
    double a = parse_number<double>("lambda_grid", parts[0]);
    double b = parse_number<double>("lambda_grid", parts[1]);
    int m = parse_number<int>("lambda_grid", parts[2]);
    if (m < 1) throw ParseError("config: lambda_grid count must be positive");
    for (int k = 0; k < m; ++k) grid.push_back(m == 1 ? a : a + (b - a) * k / (m - 1));
  } else {
    for (const auto& t : split(s, ',')) grid.push_back(parse_number<double>("lambda_grid", t));
  }
  for (double l : grid)
    if (!(l > 0)) throw ParseError("config: lambda_grid entries must be positive");
  return grid;
}

bool ExperimentConfig::synthetic_cgl() const {
  return source == "duplicate" || source == "min_norm_interp" || source == "degenerate_tuning";
}

std::uint64_t ExperimentConfig::require_seed(const std::string& why) const {
  if (!seed) throw InputError("a seed is required for " + why + " (set [experiment] seed or --seed)");
  return *seed;
}

ExperimentConfig parse_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream is(text);
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(std::string("config: ") + e.message() + " at line " + std::to_string(e.line()));
  }
  for (const auto& [section, body] : tree) {
    auto it = kKeys.find(section);
    if (it == kKeys.end()) {
      if (body.empty()) throw ParseError("config: key '" + section + "' outside a section");
      throw ParseError("config: unknown section [" + section + "]");
    }
    for (const auto& [key, _] : body)
      if (!it->second.count(key)) throw ParseError("config: unknown key '" + key + "' in [" + section + "]");
  }

  ExperimentConfig c;
  auto get = [&](const std::string& path) -> std::optional<std::string> {
    if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(path, '.'))) return *v;
    return std::nullopt;
  };
  if (auto v = get("experiment.seed")) c.seed = parse_number<std::uint64_t>("seed", *v);

  if (auto v = get("data.source")) c.source = *v;
  if (!kSources.count(c.source)) throw ParseError("config: unknown data source '" + c.source + "'");
  if (auto v = get("data.path")) c.path = *v;
  if (auto v = get("data.n")) c.n = parse_number<int>("n", *v);
  if (auto v = get("data.d")) c.d = parse_number<int>("d", *v);
  if (auto v = get("data.noise")) c.noise = parse_number<double>("noise", *v);
  if (auto v = get("data.train_frac")) c.train_frac = parse_number<double>("train_frac", *v);
  if (auto v = get("data.val_frac")) c.val_frac = parse_number<double>("val_frac", *v);
  if (c.source == "csv" && c.path.empty()) throw ParseError("config: source = csv needs data.path");
  if (c.source != "csv" && !c.path.empty())
    throw ParseError("config: data.path given with source = " + c.source + "; exactly one data source allowed");
  if (c.n < 1 || c.d < 1) throw ParseError("config: n and d must be positive");
  if (c.train_frac <= 0 || c.val_frac < 0 || c.train_frac + c.val_frac > 1.0 + 1e-12)
    throw ParseError("config: need train_frac > 0, val_frac >= 0, train_frac + val_frac <= 1");

  try {
    if (auto v = get("model.arch")) c.arch = parse_arch(*v);
    if (auto v = get("solver.method")) c.solver.method = parse_solver_method(*v);
    if (auto v = get("solver.step_rule")) c.solver.step_rule = parse_step_rule(*v);
    if (auto v = get("prune.methods")) {
      c.prune_methods.clear();
      for (const auto& m : split(*v, ',')) c.prune_methods.push_back(parse_score_method(m));
    }
  } catch (const ParseError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  if (auto v = get("model.patterns")) {
    if (*v == "exhaustive") c.pattern_kind = PatternMode::Kind::exhaustive;
    else if (*v == "sampled") c.pattern_kind = PatternMode::Kind::sampled;
    else throw ParseError("config: patterns must be exhaustive or sampled");
  }
  if (auto v = get("model.pattern_count")) c.pattern_count = parse_number<int>("pattern_count", *v);
  if (auto v = get("model.lambda")) c.lambda = parse_number<double>("lambda", *v);
  if (!(c.lambda > 0)) throw ParseError("config: lambda must be positive");
  if (auto v = get("model.lambda_grid")) c.lambda_grid = parse_lambda_grid(*v);

  if (auto v = get("solver.max_iters")) c.solver.max_iters = parse_number<int>("max_iters", *v);
  if (auto v = get("solver.kkt_tol")) c.solver.kkt_tol = parse_number<double>("kkt_tol", *v);
  if (auto v = get("solver.al_penalty_init")) c.solver.al_penalty_init = parse_number<double>("al_penalty_init", *v);
  if (auto v = get("solver.al_penalty_growth"))
    c.solver.al_penalty_growth = parse_number<double>("al_penalty_growth", *v);
  if (auto v = get("solver.random_init")) c.solver.random_init = parse_bool("random_init", *v);
  if (auto v = get("solver.trace")) c.trace = parse_bool("trace", *v);
  try {
    c.solver.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("config: ") + e.what());
  }

  if (auto v = get("describe.samples")) c.describe_samples = parse_number<int>("samples", *v);
  if (auto v = get("prune.target_width")) c.prune_target_width = parse_number<int>("target_width", *v);
  if (auto v = get("sensitivity.fd_step")) c.fd_step = parse_number<double>("fd_step", *v);
  if (auto v = get("probe.sizes")) {
    c.probe_sizes.clear();
    for (const auto& t : split(*v, ',')) c.probe_sizes.push_back(parse_number<int>("sizes", t));
  }
  for (int s : c.probe_sizes)
    if (s < 2) throw ParseError("config: probe sizes must be at least 2");
  if (auto v = get("output.dir")) c.out_dir = *v;
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_ini(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "[experiment]\n";
  if (c.seed) os << "seed = " << *c.seed << "\n";
  else os << "; seed = (unset)\n";
  os << "\n[data]\nsource = " << c.source << "\n";
  if (!c.path.empty()) os << "path = " << c.path << "\n";
  os << "n = " << c.n << "\nd = " << c.d << "\nnoise = " << fmt_double(c.noise)
     << "\ntrain_frac = " << fmt_double(c.train_frac) << "\nval_frac = " << fmt_double(c.val_frac) << "\n";
  os << "\n[model]\narch = " << to_string(c.arch)
     << "\npatterns = " << (c.pattern_kind == PatternMode::Kind::exhaustive ? "exhaustive" : "sampled")
     << "\npattern_count = " << c.pattern_count << "\nlambda = " << fmt_double(c.lambda) << "\n";
  if (!c.lambda_grid.empty()) os << "lambda_grid = " << join_doubles(c.lambda_grid) << "\n";
  os << "\n[solver]\nmethod = " << to_string(c.solver.method) << "\nmax_iters = " << c.solver.max_iters
     << "\nkkt_tol = " << fmt_double(c.solver.kkt_tol) << "\nstep_rule = " << to_string(c.solver.step_rule)
     << "\nal_penalty_init = " << fmt_double(c.solver.al_penalty_init)
     << "\nal_penalty_growth = " << fmt_double(c.solver.al_penalty_growth)
     << "\nrandom_init = " << (c.solver.random_init ? "true" : "false") << "\ntrace = " << (c.trace ? "true" : "false")
     << "\n";
  os << "\n[describe]\nsamples = " << c.describe_samples << "\n";
  os << "\n[prune]\ntarget_width = " << c.prune_target_width << "\nmethods = ";
  for (size_t i = 0; i < c.prune_methods.size(); ++i) os << (i ? "," : "") << to_string(c.prune_methods[i]);
  os << "\n\n[sensitivity]\nfd_step = " << fmt_double(c.fd_step) << "\n";
  os << "\n[probe]\nsizes = ";
  for (size_t i = 0; i < c.probe_sizes.size(); ++i) os << (i ? "," : "") << c.probe_sizes[i];
  os << "\n\n[output]\ndir = " << c.out_dir << "\n";
  return os.str();
}

}  // namespace relu_optset
