#pragma once

#include "relu_optset/pruning.hpp"
#include "relu_optset/reformulation.hpp"
#include "relu_optset/solver.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace relu_optset {

// Flat key/value file with [sections]:
//   [experiment] seed
//   [data]       source (gaussian|csv|duplicate|min_norm_interp|one_neuron|degenerate_tuning),
//                path, n, d, noise, train_frac, val_frac
//   [model]      arch, patterns (exhaustive|sampled), pattern_count, lambda, lambda_grid
//   [solver]     method, max_iters, kkt_tol, step_rule, al_penalty_init, al_penalty_growth,
//                random_init, trace
//   [describe]   samples
//   [prune]      target_width, methods
//   [sensitivity] fd_step
//   [probe]      sizes
//   [output]     dir
struct ExperimentConfig {
  std::optional<std::uint64_t> seed;

  std::string source = "gaussian";
  std::string path;
  int n = 12;
  int d = 2;
  double noise = 0.1;
  double train_frac = 1.0;
  double val_frac = 0.0;

  Arch arch = Arch::relu;
  PatternMode::Kind pattern_kind = PatternMode::Kind::exhaustive;
  int pattern_count = 64;
  double lambda = 0.1;
  std::vector<double> lambda_grid;

  SolverOptions solver;
  bool trace = false;

  int describe_samples = 5;
  int prune_target_width = 1;
  std::vector<ScoreMethod> prune_methods{ScoreMethod::ls_residual, ScoreMethod::magnitude,
                                         ScoreMethod::gradient, ScoreMethod::random};
  double fd_step = 1e-6;
  std::vector<int> probe_sizes{2, 3, 4};

  std::string out_dir = "out";

  bool synthetic_cgl() const;  // fixtures that are CGL problems rather than (Z, y) data
  std::uint64_t require_seed(const std::string& why) const;
};

// Unknown sections or keys and malformed values raise ParseError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string to_ini(const ExperimentConfig& cfg);

// "a,b,c" or "start:stop:count" (inclusive, evenly spaced).
std::vector<double> parse_lambda_grid(const std::string& s);

}  // namespace relu_optset
