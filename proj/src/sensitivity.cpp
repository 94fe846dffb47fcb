#include "relu_optset/sensitivity.hpp"

#include "relu_optset/errors.hpp"
#include "relu_optset/numeric.hpp"
#include "relu_optset/pruning.hpp"

#include <cmath>

namespace relu_optset {

Mat projection_block(const Vec& wb) {
  double nw = wb.norm();
  if (nw == 0.0) throw InputError("projection_block: zero block");
  Vec u = wb / nw;
  Mat M = Mat::Identity(wb.size(), wb.size()) - u * u.transpose();
  if (wb.size() == 1) M.setZero();
  return M / nw;
}

CglProblem reduced_problem(const CglProblem& problem, const Weights& w) {
  if (!is_minimal(problem, w).minimal) throw CertificateError("reduced_problem: w is not minimal");
  return restrict_problem(problem, active_blocks(problem, w));
}

ConstraintQualification check_cq(const CglProblem& problem, const Weights& w, const DualCertificate& rho,
                                 double tol) {
  ConstraintQualification cq;
  cq.witness = rho;
  const IndexSet active = active_blocks(problem, w);
  const Vec c_full = problem.X.transpose() * (problem.y - problem.X * w);
  for (int b : active) {
    if (!problem.K[b]) continue;
    const Mat& K = *problem.K[b];
    Vec wb = problem.partition.gather(w, b);
    Vec g = K.transpose() * wb;
    std::vector<int> tight;
    for (int j = 0; j < K.cols(); ++j)
      if (g[j] >= -tol * (1.0 + K.col(j).norm() * wb.norm())) tight.push_back(j);
    if (tight.empty()) continue;
    Mat Kt(K.rows(), tight.size());
    for (size_t k = 0; k < tight.size(); ++k) {
      Kt.col(k) = K.col(tight[k]);
      cq.active_constraints.emplace_back(b, tight[k]);
    }
    if (numeric::numerical_rank(Kt) < static_cast<int>(tight.size())) cq.licq = false;
    // rho = eps 1 + r with r >= 0 from NNLS.
    const double eps = 1e-8;
    Vec target = problem.partition.gather(c_full, b) - problem.lambda * wb / wb.norm();
    auto res = numeric::nnls(Kt, target - eps * Kt * Vec::Ones(tight.size()));
    Vec r = Vec::Zero(K.cols());
    for (size_t k = 0; k < tight.size(); ++k) r[tight[k]] = eps + res.x[k];
    if (res.residual_norm > tol) cq.scs = false;
    else cq.witness.rho[b] = r;
  }
  return cq;
}

SensitivityReport jacobians(const CglProblem& problem, const Weights& w, const DualCertificate& rho, double tol) {
  SensitivityReport rep;
  rep.active_blocks = active_blocks(problem, w);
  for (int b : rep.active_blocks)
    for (int j : problem.partition.block(b)) rep.active_coords.push_back(j);
  rep.minimal = is_minimal(problem, w).minimal;
  ConstraintQualification cq = check_cq(problem, w, rho, tol);
  rep.licq = cq.licq;
  rep.scs = cq.scs;
  const int na = static_cast<int>(rep.active_coords.size());
  if (na == 0) {
    rep.reason = "no active blocks";
    return rep;
  }
  Mat XA(problem.n(), na);
  for (int k = 0; k < na; ++k) XA.col(k) = problem.X.col(rep.active_coords[k]);
  Mat M = Mat::Zero(na, na);
  Vec u(na);
  std::vector<std::pair<int, int>> cons;  // all constraints of active blocks
  int off = 0;
  std::vector<int> block_offset;
  for (int b : rep.active_blocks) {
    Vec wb = problem.partition.gather(w, b);
    int wd = static_cast<int>(wb.size());
    M.block(off, off, wd, wd) = projection_block(wb);
    u.segment(off, wd) = wb / wb.norm();
    block_offset.push_back(off);
    for (int j = 0; j < problem.num_constraints(b); ++j) cons.emplace_back(b, j);
    off += wd;
  }
  rep.hessian = XA.transpose() * XA + problem.lambda * M;
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (rep.hessian + rep.hessian.transpose()));
  rep.hessian_min_eig = es.eigenvalues().minCoeff();

  const int nc = static_cast<int>(cons.size());
  rep.D = Mat::Zero(na + nc, na + nc);
  rep.D.topLeftCorner(na, na) = rep.hessian;
  for (int k = 0; k < nc; ++k) {
    auto [b, j] = cons[k];
    size_t pos = std::find(rep.active_blocks.begin(), rep.active_blocks.end(), b) - rep.active_blocks.begin();
    int o = block_offset[pos];
    const Mat& K = *problem.K[b];
    Vec wb = problem.partition.gather(w, b);
    double rj = cq.witness.rho[b][j];
    rep.D.block(o, na + k, K.rows(), 1) = K.col(j);
    rep.D.block(na + k, o, 1, K.rows()) = rj * K.col(j).transpose();
    rep.D(na + k, na + k) = K.col(j).dot(wb);
  }
  Eigen::JacobiSVD<Mat> svd(rep.D);
  const Vec& s = svd.singularValues();
  rep.d_condition = s[s.size() - 1] > 0 ? s[0] / s[s.size() - 1] : std::numeric_limits<double>::infinity();

  if (!rep.minimal) rep.reason = "solution is not minimal";
  else if (!rep.licq) rep.reason = "LICQ fails";
  else if (!rep.scs) rep.reason = "strict complementary slackness not witnessed";
  else if (!std::isfinite(rep.d_condition) || rep.d_condition > 1e14)
    rep.reason = "D is singular (condition number " + std::to_string(rep.d_condition) + ")";
  if (!rep.reason.empty()) return rep;

  Eigen::PartialPivLU<Mat> lu(rep.D);
  Mat Dinv = lu.inverse();
  Mat lead = Dinv.topLeftCorner(na, na);
  rep.jacobian_lambda = -lead * u;
  rep.jacobian_y = lead * XA.transpose();
  rep.available = true;
  return rep;
}

FdResult fd_jacobian(const CglProblem& problem, const Weights& w, FdTarget what, double h, SolverOptions options) {
  if (!(h > 0)) throw InputError("fd_jacobian: h must be positive");
  FdResult res;
  IndexSet active = active_blocks(problem, w);
  for (int b : active)
    for (int j : problem.partition.block(b)) res.active_coords.push_back(j);
  const int na = static_cast<int>(res.active_coords.size());
  options.kkt_tol = 1e-10;
  options.initial = w;
  auto solve_at = [&](const CglProblem& p, int col, Vec& out) {
    SolveResult s = solve(p, options);
    if (!s.converged)
      res.errors.push_back("column " + std::to_string(col) + ": re-solve reached only " +
                           std::to_string(s.report.max_violation()));
    out.resize(na);
    for (int k = 0; k < na; ++k) out[k] = s.w[res.active_coords[k]];
  };
  const int cols = what == FdTarget::lambda ? 1 : problem.n();
  res.J.resize(na, cols);
  for (int c = 0; c < cols; ++c) {
    CglProblem plus = problem, minus = problem;
    if (what == FdTarget::lambda) {
      plus.lambda += h;
      minus.lambda -= h;
      if (minus.lambda < 0) throw InputError("fd_jacobian: lambda - h is negative");
    } else {
      plus.y[c] += h;
      minus.y[c] -= h;
    }
    Vec wp, wm;
    solve_at(plus, c, wp);
    solve_at(minus, c, wm);
    res.J.col(c) = (wp - wm) / (2.0 * h);
  }
  return res;
}

}  // namespace relu_optset
