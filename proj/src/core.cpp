#include "relu_optset/core.hpp"

#include "relu_optset/errors.hpp"
#include "relu_optset/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace relu_optset {

BlockPartition::BlockPartition(std::vector<std::vector<int>> blocks) : blocks_(std::move(blocks)) {
  int total = 0;
  for (const auto& b : blocks_) {
    if (b.empty()) throw ShapeError("block partition: empty block");
    total += static_cast<int>(b.size());
  }
  std::vector<char> seen(total, 0);
  for (const auto& b : blocks_) {
    for (int j : b) {
      if (j < 0 || j >= total || seen[j])
        throw ShapeError("block partition: blocks must be disjoint and cover 0..d-1");
      seen[j] = 1;
    }
  }
  dim_ = total;
}

BlockPartition BlockPartition::contiguous(const std::vector<int>& widths) {
  std::vector<std::vector<int>> blocks;
  int start = 0;
  for (int w : widths) {
    if (w <= 0) throw ShapeError("block partition: widths must be positive");
    std::vector<int> b(w);
    for (int k = 0; k < w; ++k) b[k] = start + k;
    start += w;
    blocks.push_back(std::move(b));
  }
  return BlockPartition(std::move(blocks));
}

BlockPartition BlockPartition::uniform(int num_blocks, int width) {
  return contiguous(std::vector<int>(num_blocks, width));
}

Vec BlockPartition::gather(const Vec& w, int i) const {
  const auto& b = blocks_[i];
  Vec out(b.size());
  for (size_t k = 0; k < b.size(); ++k) out[k] = w[b[k]];
  return out;
}

void BlockPartition::scatter(Vec& w, int i, const Vec& wb) const {
  const auto& b = blocks_[i];
  for (size_t k = 0; k < b.size(); ++k) w[b[k]] = wb[k];
}

Mat BlockPartition::columns(const Mat& X, int i) const {
  const auto& b = blocks_[i];
  Mat out(X.rows(), b.size());
  for (size_t k = 0; k < b.size(); ++k) out.col(k) = X.col(b[k]);
  return out;
}

BlockPartition BlockPartition::restrict_to(const IndexSet& keep) const {
  std::vector<int> widths;
  for (int i : keep) widths.push_back(width(i));
  if (widths.empty()) return BlockPartition();
  return contiguous(widths);
}

bool CglProblem::any_constrained() const {
  return std::any_of(K.begin(), K.end(), [](const auto& k) { return k.has_value(); });
}

void CglProblem::validate() const {
  if (X.rows() != y.size())
    throw ShapeError("problem: X has " + std::to_string(X.rows()) + " rows but y has " +
                     std::to_string(y.size()) + " entries");
  if (X.cols() != partition.dim())
    throw ShapeError("problem: X has " + std::to_string(X.cols()) +
                     " columns but the partition covers " + std::to_string(partition.dim()));
  if (static_cast<int>(K.size()) != partition.num_blocks())
    throw ShapeError("problem: constraint list length differs from block count");
  for (int i = 0; i < num_blocks(); ++i)
    if (K[i] && K[i]->rows() != partition.width(i))
      throw ShapeError("problem: constraint matrix of block " + std::to_string(i) +
                       " has wrong row count");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InputError("problem: lambda must be >= 0");
  if (!X.allFinite() || !y.allFinite()) throw InputError("problem: NaN or Inf in data");
  for (const auto& k : K)
    if (k && !k->allFinite()) throw InputError("problem: NaN or Inf in constraints");
}

CglProblem make_problem(Mat X, Vec y, BlockPartition partition, double lambda,
                        std::vector<std::optional<Mat>> K) {
  CglProblem p;
  p.X = std::move(X);
  p.y = std::move(y);
  p.partition = std::move(partition);
  p.lambda = lambda;
  p.K = K.empty() ? std::vector<std::optional<Mat>>(p.partition.num_blocks()) : std::move(K);
  p.validate();
  return p;
}

CglProblem restrict_problem(const CglProblem& problem, const IndexSet& blocks) {
  CglProblem r;
  int width = 0;
  for (int i : blocks) width += problem.partition.width(i);
  r.X.resize(problem.n(), width);
  int col = 0;
  for (int i : blocks) {
    int wi = problem.partition.width(i);
    r.X.middleCols(col, wi) = problem.partition.columns(problem.X, i);
    col += wi;
    r.K.push_back(problem.K[i]);
  }
  r.y = problem.y;
  r.partition = problem.partition.restrict_to(blocks);
  r.lambda = problem.lambda;
  return r;
}

DualCertificate DualCertificate::zeros(const CglProblem& problem) {
  DualCertificate d;
  d.rho.resize(problem.num_blocks());
  for (int i = 0; i < problem.num_blocks(); ++i)
    d.rho[i] = Vec::Zero(problem.num_constraints(i));
  return d;
}

bool DualCertificate::nonnegative(double tol) const {
  for (const auto& r : rho)
    if (r.size() && r.minCoeff() < -tol) return false;
  return true;
}

static void check_weights(const CglProblem& problem, const Weights& w) {
  if (w.size() != problem.d())
    throw ShapeError("weights have length " + std::to_string(w.size()) + ", expected " +
                     std::to_string(problem.d()));
}

double penalty(const CglProblem& problem, const Weights& w) {
  check_weights(problem, w);
  double s = 0.0;
  for (int i = 0; i < problem.num_blocks(); ++i) s += problem.partition.gather(w, i).norm();
  return s;
}

double objective(const CglProblem& problem, const Weights& w) {
  check_weights(problem, w);
  if (problem.X.rows() != problem.y.size()) throw ShapeError("objective: X and y disagree");
  return 0.5 * (problem.X * w - problem.y).squaredNorm() + problem.lambda * penalty(problem, w);
}

double active_threshold(const Weights& w) { return 1e-8 * (1.0 + w.norm()); }

IndexSet active_blocks(const CglProblem& problem, const Weights& w) {
  IndexSet a;
  double thr = active_threshold(w);
  for (int i = 0; i < problem.num_blocks(); ++i)
    if (problem.partition.gather(w, i).norm() > thr) a.push_back(i);
  return a;
}

KktReport kkt_report(const CglProblem& problem, const Weights& w, const DualCertificate& rho,
                     double tol) {
  check_weights(problem, w);
  if (!(tol > 0)) throw InputError("kkt_report: tol must be positive");
  if (static_cast<int>(rho.rho.size()) != problem.num_blocks())
    throw ShapeError("kkt_report: certificate has wrong block count");
  for (int i = 0; i < problem.num_blocks(); ++i)
    if (rho.rho[i].size() != problem.num_constraints(i))
      throw ShapeError("kkt_report: certificate block " + std::to_string(i) + " has wrong length");

  KktReport rep;
  rep.tol = tol;
  rep.residual = problem.y - problem.X * w;
  const Vec full_c = problem.X.transpose() * rep.residual;
  const double lam = problem.lambda;
  const double thr_active = active_threshold(w);
  const double thr_eq = tol * (1.0 + lam);
  for (int i = 0; i < problem.num_blocks(); ++i) {
    Vec c = problem.partition.gather(full_c, i);
    Vec wb = problem.partition.gather(w, i);
    Vec v = c;
    if (problem.K[i]) {
      const Mat& K = *problem.K[i];
      v -= K * rho.rho[i];
      Vec g = K.transpose() * wb;
      if (g.size()) {
        rep.feasibility_violation = std::max(rep.feasibility_violation, g.maxCoeff());
        rep.slackness_violation =
            std::max(rep.slackness_violation, rho.rho[i].cwiseProduct(g).cwiseAbs().maxCoeff());
        double neg = rho.rho[i].minCoeff();
        if (neg < 0) rep.feasibility_violation = std::max(rep.feasibility_violation, -neg);
      }
    }
    double wn = wb.norm();
    double vn = v.norm();
    double defect = wn > thr_active ? (v - lam * wb / wn).norm() : std::max(0.0, vn - lam);
    rep.stationarity_violation = std::max(rep.stationarity_violation, defect);
    if (std::abs(vn - lam) <= thr_eq) rep.equicorrelation.push_back(i);
    if (wn > thr_active) rep.active.push_back(i);
    rep.correlations.push_back(std::move(c));
    rep.v_vectors.push_back(std::move(v));
  }
  rep.satisfied = rep.stationarity_violation <= tol && rep.feasibility_violation <= tol &&
                  rep.slackness_violation <= tol;
  return rep;
}

IndexSet support_set(const CglProblem& problem, const std::vector<Weights>& solutions, double tol) {
  if (solutions.empty()) throw InputError("support_set: no solutions given");
  std::vector<char> in(problem.num_blocks(), 0);
  for (const auto& w : solutions) {
    check_weights(problem, w);
    double thr = std::max(tol, active_threshold(w));
    for (int i = 0; i < problem.num_blocks(); ++i)
      if (problem.partition.gather(w, i).norm() > thr) in[i] = 1;
  }
  IndexSet s;
  for (int i = 0; i < problem.num_blocks(); ++i)
    if (in[i]) s.push_back(i);
  return s;
}

double lambda_max(const CglProblem& problem) {
  Vec c = problem.X.transpose() * problem.y;
  double m = 0.0;
  for (int i = 0; i < problem.num_blocks(); ++i) m = std::max(m, problem.partition.gather(c, i).norm());
  return m;
}

DualCertificate fit_dual(const CglProblem& problem, const Weights& w, double tol) {
  DualCertificate d = DualCertificate::zeros(problem);
  const Vec full_c = problem.X.transpose() * (problem.y - problem.X * w);
  const double thr_active = active_threshold(w);
  for (int i = 0; i < problem.num_blocks(); ++i) {
    if (!problem.K[i]) continue;
    const Mat& K = *problem.K[i];
    Vec c = problem.partition.gather(full_c, i);
    Vec wb = problem.partition.gather(w, i);
    double wn = wb.norm();
    if (wn > thr_active) {
      // Only constraints that are tight at w may carry a multiplier.
      Vec g = K.transpose() * wb;
      std::vector<int> tight;
      for (int j = 0; j < K.cols(); ++j)
        if (g[j] >= -tol * (1.0 + K.col(j).norm() * wn)) tight.push_back(j);
      if (tight.empty()) continue;
      Mat Kt(K.rows(), tight.size());
      for (size_t k = 0; k < tight.size(); ++k) Kt.col(k) = K.col(tight[k]);
      auto res = numeric::nnls(Kt, c - problem.lambda * wb / wn);
      for (size_t k = 0; k < tight.size(); ++k) d.rho[i][tight[k]] = res.x[k];
    } else {
      d.rho[i] = numeric::nnls(K, c).x;
    }
  }
  return d;
}

}  // namespace relu_optset
