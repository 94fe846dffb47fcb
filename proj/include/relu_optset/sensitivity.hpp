#pragma once

#include "relu_optset/core.hpp"
#include "relu_optset/solver.hpp"

#include <string>
#include <utility>
#include <vector>

namespace relu_optset {

// (I - u u^T) / |w_b| with u = w_b / |w_b|.
Mat projection_block(const Vec& wb);

// Restriction to the active blocks of a minimal w (CertificateError if w is not minimal).
CglProblem reduced_problem(const CglProblem& problem, const Weights& w);

struct ConstraintQualification {
  bool licq = true;
  bool scs = true;
  std::vector<std::pair<int, int>> active_constraints;  // (block, column of K_b), active blocks only
  DualCertificate witness;  // multipliers with rho_j >= 1e-8 on active rows when scs holds
};

ConstraintQualification check_cq(const CglProblem& problem, const Weights& w, const DualCertificate& rho,
                                 double tol = 1e-6);

struct SensitivityReport {
  IndexSet active_blocks;
  std::vector<int> active_coords;  // indices into w, in block order
  bool minimal = false;
  bool licq = false;
  bool scs = false;
  bool available = false;
  std::string reason;
  Vec jacobian_lambda;  // d w_A / d lambda
  Mat jacobian_y;       // |A| x n
  Mat D;
  double d_condition = 0.0;
  Mat hessian;          // X_A^T X_A + lambda M
  double hessian_min_eig = 0.0;
};

SensitivityReport jacobians(const CglProblem& problem, const Weights& w, const DualCertificate& rho,
                            double tol = 1e-6);

enum class FdTarget { lambda, y };

struct FdResult {
  Mat J;  // |A| x 1 (lambda) or |A| x n (y)
  std::vector<int> active_coords;
  std::vector<std::string> errors;
};

// Central differences through full re-solves at tolerance 1e-10, warm-started at w.
FdResult fd_jacobian(const CglProblem& problem, const Weights& w, FdTarget what, double h,
                     SolverOptions options = {});

}  // namespace relu_optset
