#pragma once

#include "relu_optset/core.hpp"

#include <string>

namespace relu_optset::numeric {

// tau = max(rows, cols) * sigma_max * 1e-12
double rank_tolerance(const Mat& M);
double rank_tolerance(const Vec& singular_values, Eigen::Index rows, Eigen::Index cols);
int numerical_rank(const Mat& M);
double sigma_min(const Mat& M);   // smallest of min(rows, cols) singular values; 0 if cols > rows
Vec null_vector(const Mat& M);    // right singular vector of the smallest singular value
Mat null_space(const Mat& M);     // orthonormal basis, possibly 0 columns
Mat row_space_basis(const Mat& M);  // orthonormal rows spanning the row space (r x cols)
double spectral_norm(const Mat& M);

// Estimate of |X|_2^2 by power iteration on X^T X.
double power_iteration_sq_norm(const Mat& X, int iters = 30, double tol = 1e-10);

struct NnlsResult {
  Vec x;
  double residual_norm = 0.0;
  bool converged = false;
};
// Lawson-Hanson active-set NNLS: min |Ax - b| s.t. x >= 0.
NnlsResult nnls(const Mat& A, const Vec& b, int max_iter = 0);

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };
std::string to_string(LpStatus s);

// Generic small dense LP. Rows are A x (sense) b, sense in {'<', '=', '>'}.
struct LinearProgram {
  Vec c;
  Mat A;
  Vec b;
  std::vector<char> sense;
  std::vector<bool> free_var;  // empty => all x >= 0
  bool maximize = false;
};

struct LpResult {
  LpStatus status = LpStatus::infeasible;
  Vec x;
  double value = 0.0;
  int iterations = 0;
};

// Two-phase dense simplex, Bland's lowest-index rule.
LpResult solve_lp(const LinearProgram& lp, int max_iter = 20000);

struct QpResult {
  Vec x;
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
  double kkt_residual = 0.0;
};

// min 1/2 x^T H x + f^T x  s.t.  A x = b, x >= 0, from a feasible x0.
// Primal active-set method; H must be positive definite on the null space of A.
QpResult active_set_qp(const Mat& H, const Vec& f, const Mat& A, const Vec& b, const Vec& x0,
                       int max_iter = 1000, double tol = 1e-10);

}  // namespace relu_optset::numeric
