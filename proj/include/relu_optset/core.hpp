#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

namespace relu_optset {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using IndexSet = std::vector<int>;  // sorted, duplicate free

// Ordered partition of the column indices {0..d-1} into non-empty groups.
class BlockPartition {
 public:
  BlockPartition() = default;
  explicit BlockPartition(std::vector<std::vector<int>> blocks);

  static BlockPartition contiguous(const std::vector<int>& widths);
  static BlockPartition uniform(int num_blocks, int width);
  static BlockPartition singletons(int d) { return uniform(d, 1); }

  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  int dim() const { return dim_; }
  int width(int i) const { return static_cast<int>(blocks_[i].size()); }
  const std::vector<int>& block(int i) const { return blocks_[i]; }
  const std::vector<std::vector<int>>& blocks() const { return blocks_; }

  Vec gather(const Vec& w, int i) const;
  void scatter(Vec& w, int i, const Vec& wb) const;
  Mat columns(const Mat& X, int i) const;

  // Restriction to a subset of blocks, renumbered contiguously.
  BlockPartition restrict_to(const IndexSet& keep) const;

  bool operator==(const BlockPartition& o) const { return blocks_ == o.blocks_; }

 private:
  std::vector<std::vector<int>> blocks_;
  int dim_ = 0;
};

// min_w 1/2 |Xw - y|^2 + lambda sum_i |w_bi|  s.t.  K_bi^T w_bi <= 0.
struct CglProblem {
  Mat X;
  Vec y;
  BlockPartition partition;
  std::vector<std::optional<Mat>> K;  // absent => unconstrained block
  double lambda = 0.0;

  int n() const { return static_cast<int>(X.rows()); }
  int d() const { return static_cast<int>(X.cols()); }
  int num_blocks() const { return partition.num_blocks(); }
  bool constrained(int i) const { return K[i].has_value(); }
  bool any_constrained() const;
  int num_constraints(int i) const { return K[i] ? static_cast<int>(K[i]->cols()) : 0; }

  // Throws ShapeError / InputError.
  void validate() const;
};

CglProblem make_problem(Mat X, Vec y, BlockPartition partition, double lambda,
                        std::vector<std::optional<Mat>> K = {});

// Problem restricted to a subset of blocks (used by sensitivity and pruning).
CglProblem restrict_problem(const CglProblem& problem, const IndexSet& blocks);

using Weights = Vec;

struct DualCertificate {
  std::vector<Vec> rho;  // rho[i] empty for unconstrained blocks

  static DualCertificate zeros(const CglProblem& problem);
  bool nonnegative(double tol = 1e-10) const;
};

struct KktReport {
  Vec residual;
  std::vector<Vec> correlations;
  std::vector<Vec> v_vectors;
  double stationarity_violation = 0.0;
  double feasibility_violation = 0.0;
  double slackness_violation = 0.0;
  IndexSet equicorrelation;
  IndexSet active;
  bool satisfied = false;
  double tol = 0.0;

  double max_violation() const {
    return std::max({stationarity_violation, feasibility_violation, slackness_violation});
  }
};

double penalty(const CglProblem& problem, const Weights& w);
double objective(const CglProblem& problem, const Weights& w);
KktReport kkt_report(const CglProblem& problem, const Weights& w, const DualCertificate& rho,
                     double tol = 1e-6);
IndexSet support_set(const CglProblem& problem, const std::vector<Weights>& solutions,
                     double tol = 1e-8);

// Blocks with |w_bi| above 1e-8 (1 + |w|).
IndexSet active_blocks(const CglProblem& problem, const Weights& w);
double active_threshold(const Weights& w);

// max_i |X_bi^T y|, the smallest lambda at which w = 0 solves an unconstrained problem.
double lambda_max(const CglProblem& problem);

// Best-effort multiplier fit for a primal point (NNLS per block); never throws.
DualCertificate fit_dual(const CglProblem& problem, const Weights& w, double tol);

}  // namespace relu_optset
