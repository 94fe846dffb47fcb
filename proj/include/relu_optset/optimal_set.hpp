#pragma once

#include "relu_optset/core.hpp"
#include "relu_optset/reformulation.hpp"
#include "relu_optset/solver.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace relu_optset {

// Multipliers for a verified primal point. Active blocks: K rho = c - lambda w/|w| over the
// constraints tight at w; inactive blocks: NNLS min |K rho - c|. With min_norm, each block's
// multiplier is then replaced by the smallest-norm rho giving the same K rho.
DualCertificate recover_dual(const CglProblem& problem, const Weights& w, double tol = 1e-6,
                             bool min_norm = false);

// All solutions are w_bi = alpha_i v_bi (alpha >= 0) on the support S, zero elsewhere,
// with sum_i alpha_i X_bi v_bi equal to the optimal fit.
struct OptimalSetDescription {
  CglProblem problem;
  Weights w;
  DualCertificate rho;
  double tol = 1e-6;

  Vec y_hat;
  IndexSet equicorrelation;
  IndexSet active;
  IndexSet eligible;  // equicorrelated blocks whose v-vector respects the cone and slackness
  IndexSet support;
  bool subset_only = false;
  std::vector<Vec> v_vectors;  // indexed by block
  Mat generators;              // n x |S|, column k = X_b v_b for b = support[k]
  Vec alpha_w;                 // coordinates of w on the support
  Vec alpha_interior;          // a point with every support coordinate positive
  Mat eq_rows;                 // orthonormal rows: eq_rows alpha = eq_rhs describes the fit constraint
  Vec eq_rhs;

  Weights weights_from_alpha(const Vec& alpha) const;
  int support_size() const { return static_cast<int>(support.size()); }
};

OptimalSetDescription describe_set(const CglProblem& problem, const Weights& w,
                                   const DualCertificate& rho, double tol = 1e-6);

struct Membership {
  bool member = false;
  bool indeterminate_support = false;
  std::string note;
};

Membership membership(const OptimalSetDescription& desc, const Weights& w, double tol = 1e-6);
bool contains(const OptimalSetDescription& desc, const Weights& w, double tol = 1e-6);

std::vector<Weights> sample_solutions(const OptimalSetDescription& desc, int count,
                                      std::uint64_t seed);

enum class Verdict { unique, non_unique, unknown };
std::string to_string(Verdict v);

struct UniquenessCertificate {
  Verdict verdict = Verdict::unknown;
  double margin = 0.0;      // sigma_min of the generators over S
  double tolerance = 0.0;   // tau_rank used
  bool columns_independent = false;  // columns of X over the equicorrelation set
  std::optional<Weights> witness;
  std::string note;
};

UniquenessCertificate is_unique(const CglProblem& problem, const Weights& w, const DualCertificate& rho,
                                double tol = 1e-6);

enum class GgpMode { exact_small, sampled };

struct GgpResult {
  bool violation_found = false;
  std::string method;
  int grid_resolution = 0;
  int starts = 0;
  double best_residual = 0.0;
  IndexSet violating_subset;
  int violating_pivot = -1;
};

GgpResult ggp_check(const Mat& X, const BlockPartition& partition, GgpMode mode = GgpMode::exact_small,
                    std::uint64_t seed = 0);

// Signed-column general position: no min(n+1, p) signed columns with one in the affine hull of
// the rest. Exhaustive; throws CapabilityError past 1e6 membership tests.
bool lasso_general_position(const Mat& A);

// Selections inside the optimal set. Each throws SolverError if its QP/LP fails.
Weights min_norm(const OptimalSetDescription& desc);
Weights max_norm_approx(const OptimalSetDescription& desc);
Weights tune_over_set(const OptimalSetDescription& desc, const Mat& X_val, const Vec& y_val);

struct PathPoint {
  double lambda = 0.0;
  double objective = 0.0;
  double penalty = 0.0;
  Vec fit;
  double fit_norm = 0.0;
  IndexSet support;
  bool converged = false;
  double kkt_violation = 0.0;
  bool jump = false;  // fit jump between this point and the next
  std::string error;
};

struct PathReport {
  std::vector<PathPoint> points;
  std::vector<int> jumps;
};

// Flags k when |fit_k - fit_{k+1}| exceeds 10x the distance predicted by the neighbouring
// slopes (and an absolute floor of 1e-5 (1 + |y|)).
void flag_jumps(PathReport& report, double y_norm);

PathReport trace_path(const Mat& Z, const Vec& y, const PatternSet& patterns, Arch arch,
                      const std::vector<double>& lambda_grid, const SolverOptions& options = {});

// Single neuron f(x) = (x v)_+ on two points x1 < 0 < x2, objective 1/2 sum (f - y)^2 + lambda |v|.
struct OneNeuronData {
  double x1 = -100.0, y1 = 1.0, x2 = 1.0, y2 = 10.0;
};

struct OneNeuronSolution {
  double v = 0.0;
  double objective = 0.0;
  int branch = 0;  // -1, 0, +1
  bool tie = false;
};

OneNeuronSolution one_neuron_solve(double lambda, const OneNeuronData& data = {});
double one_neuron_objective(double v, double lambda, const OneNeuronData& data = {});
// Smallest lambda > 0 at which the negative and positive branches tie.
double one_neuron_breakpoint(const OneNeuronData& data = {});
PathReport one_neuron_path(const std::vector<double>& lambda_grid, const OneNeuronData& data = {});

void write_path_csv(std::ostream& os, const PathReport& report);

}  // namespace relu_optset
