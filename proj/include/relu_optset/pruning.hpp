#pragma once

#include "relu_optset/core.hpp"
#include "relu_optset/reformulation.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace relu_optset {

struct PruneStep {
  int removed_block = -1;
  double t = 0.0;
  double beta_norm = 0.0;
  double objective_before = 0.0;
  double objective_after = 0.0;
};

struct PruneTrace {
  std::vector<PruneStep> steps;
  int initial_support = 0;
  int final_support = 0;
};

struct MinimalityResult {
  bool minimal = false;
  double margin = 0.0;     // sigma_min of the active fits {X_bi w_bi}
  double tolerance = 0.0;  // tau_rank
};

MinimalityResult is_minimal(const CglProblem& problem, const Weights& w);

// One step along a null direction of the active fits. Among entries tied for the largest |beta|
// the highest block index is removed, so lower-indexed blocks are kept. nullopt when minimal.
std::optional<std::pair<Weights, PruneStep>> prune_step(const CglProblem& problem, const Weights& w);

// Refuses (CertificateError) unless w is certified optimal at tol.
std::pair<Weights, PruneTrace> optimal_prune(const CglProblem& problem, const Weights& w,
                                             double tol = 1e-6);

enum class ScoreMethod { magnitude, gradient, random, ls_residual };
std::string to_string(ScoreMethod m);
ScoreMethod parse_score_method(const std::string& s);

Vec neuron_fit(const ReluNetwork& net, const Mat& Z, int i);
Vec score_neurons(const Mat& Z, const Vec& y, const ReluNetwork& net, ScoreMethod method,
                  std::uint64_t seed = 0);

struct PruneCurveRow {
  int round = 0;
  int active_width = 0;
  double train_mse = 0.0;
  double test_mse = 0.0;
  bool exact = false;
  std::string method;
};

struct ApproxPruneResult {
  ReluNetwork net;
  std::vector<PruneCurveRow> curve;
};

// ls_residual runs the correction algorithm (exact steps while the neuron fits are dependent,
// least-squares corrections afterwards). The other scores zero the lowest-scoring neuron.
ApproxPruneResult approximate_prune_relu(const Mat& Z, const Vec& y, const ReluNetwork& net,
                                         int target_width, ScoreMethod score, std::uint64_t seed = 0,
                                         const Mat* Z_test = nullptr, const Vec* y_test = nullptr);

void write_prune_csv(std::ostream& os, const std::vector<PruneCurveRow>& rows);

}  // namespace relu_optset
