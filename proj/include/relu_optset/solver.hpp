#pragma once

#include "relu_optset/core.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace relu_optset {

enum class StepRule { fixed, backtracking };

enum class SolverMethod {
  automatic,             // proximal gradient if unconstrained, augmented Lagrangian otherwise
  proximal_gradient,     // unconstrained problems only
  augmented_lagrangian,
  projected_proximal,    // prox of the penalty restricted to each cone (exact projection by NNLS)
};

std::string to_string(StepRule r);
std::string to_string(SolverMethod m);
StepRule parse_step_rule(const std::string& s);
SolverMethod parse_solver_method(const std::string& s);

struct SolverOptions {
  int max_iters = 200000;
  double kkt_tol = 1e-6;
  StepRule step_rule = StepRule::fixed;
  double al_penalty_init = 1.0;
  double al_penalty_growth = 10.0;
  std::uint64_t seed = 0;
  bool random_init = false;  // false: w0 = 0; true: Gaussian w0 drawn from `seed`
  SolverMethod method = SolverMethod::automatic;
  std::optional<Weights> initial;  // warm start, overrides random_init
  bool record_trace = false;

  void validate() const;
};

struct TraceRow {
  int iter = 0;
  double objective = 0.0;
  double kkt_violation = 0.0;
};

struct SolveResult {
  Weights w;
  DualCertificate rho;
  KktReport report;
  bool converged = false;
  int iterations = 0;
  SolverMethod method_used = SolverMethod::automatic;
  std::vector<TraceRow> trace;
};

// (|v| - threshold)_+ v / |v|, with 0/0 = 0.
Vec prox_block(const Vec& v, double threshold);

// Euclidean projection onto {z : K^T z <= 0}, computed as v - K rho with rho from NNLS.
Vec project_cone(const Mat& K, const Vec& v);

SolveResult solve(const CglProblem& problem, const SolverOptions& options = {});

// [X; sqrt(delta) I], [y; 0]
CglProblem l2_extended(const CglProblem& problem, double delta);
double objective_l2(const CglProblem& problem, const Weights& w, double delta);
SolveResult solve_l2(const CglProblem& problem, double delta, const SolverOptions& options = {});

void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& trace);

}  // namespace relu_optset
