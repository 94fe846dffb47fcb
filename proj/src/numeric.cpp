#include "relu_optset/numeric.hpp"

#include "relu_optset/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace relu_optset::numeric {

namespace {

Eigen::JacobiSVD<Mat> full_svd(const Mat& M) {
  return Eigen::JacobiSVD<Mat>(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
}

int rank_from(const Vec& s, double tau) {
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s[i] > tau) ++r;
  return r;
}

}  // namespace

double rank_tolerance(const Vec& s, Eigen::Index rows, Eigen::Index cols) {
  double smax = s.size() ? s.maxCoeff() : 0.0;
  return static_cast<double>(std::max(rows, cols)) * smax * 1e-12;
}

double rank_tolerance(const Mat& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(M);
  return rank_tolerance(svd.singularValues(), M.rows(), M.cols());
}

int numerical_rank(const Mat& M) {
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(M);
  const Vec& s = svd.singularValues();
  if (s.maxCoeff() == 0.0) return 0;
  return rank_from(s, rank_tolerance(s, M.rows(), M.cols()));
}

double sigma_min(const Mat& M) {
  if (M.cols() == 0) return std::numeric_limits<double>::infinity();
  if (M.cols() > M.rows()) return 0.0;
  Eigen::JacobiSVD<Mat> svd(M);
  return svd.singularValues().minCoeff();
}

Vec null_vector(const Mat& M) {
  if (M.cols() == 0) return Vec();
  if (M.rows() == 0) {
    Vec e = Vec::Zero(M.cols());
    e[M.cols() - 1] = 1.0;
    return e;
  }
  auto svd = full_svd(M);
  return svd.matrixV().col(M.cols() - 1);
}

Mat null_space(const Mat& M) {
  if (M.rows() == 0) return Mat::Identity(M.cols(), M.cols());
  auto svd = full_svd(M);
  const Vec& s = svd.singularValues();
  int r = s.maxCoeff() == 0.0 ? 0 : rank_from(s, rank_tolerance(s, M.rows(), M.cols()));
  return svd.matrixV().rightCols(M.cols() - r);
}

Mat row_space_basis(const Mat& M) {
  if (M.rows() == 0 || M.cols() == 0) return Mat(0, M.cols());
  auto svd = full_svd(M);
  const Vec& s = svd.singularValues();
  int r = s.maxCoeff() == 0.0 ? 0 : rank_from(s, rank_tolerance(s, M.rows(), M.cols()));
  return svd.matrixV().leftCols(r).transpose();
}

double spectral_norm(const Mat& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(M);
  return svd.singularValues()[0];
}

double power_iteration_sq_norm(const Mat& X, int iters, double tol) {
  if (X.size() == 0) return 0.0;
  Vec v = Vec::Ones(X.cols()) / std::sqrt(static_cast<double>(X.cols()));
  double est = 0.0;
  for (int k = 0; k < iters; ++k) {
    Vec u = X.transpose() * (X * v);
    double nu = u.norm();
    if (nu == 0.0) {
      // Start vector in the null space; fall back to a coordinate sweep.
      v = Vec::Zero(X.cols());
      Eigen::Index j;
      X.colwise().norm().maxCoeff(&j);
      v[j] = 1.0;
      continue;
    }
    double next = (X * v).squaredNorm();
    v = u / nu;
    if (std::abs(next - est) <= tol * std::max(1.0, next)) {
      est = next;
      break;
    }
    est = next;
  }
  return std::max(est, (X * v).squaredNorm());
}

NnlsResult nnls(const Mat& A, const Vec& b, int max_iter) {
  const Eigen::Index n = A.cols();
  NnlsResult out;
  out.x = Vec::Zero(n);
  if (n == 0) {
    out.residual_norm = b.norm();
    out.converged = true;
    return out;
  }
  if (max_iter <= 0) max_iter = static_cast<int>(3 * n) + 10;
  const double tol = 10.0 * std::numeric_limits<double>::epsilon() *
                     A.cwiseAbs().colwise().sum().maxCoeff() *
                     static_cast<double>(std::max(A.rows(), A.cols()));
  std::vector<char> passive(n, 0);
  Vec& x = out.x;
  Vec w = A.transpose() * (b - A * x);

  auto solve_passive = [&](Vec& s) {
    std::vector<int> idx;
    for (Eigen::Index j = 0; j < n; ++j)
      if (passive[j]) idx.push_back(static_cast<int>(j));
    s = Vec::Zero(n);
    if (idx.empty()) return;
    Mat Ap(A.rows(), idx.size());
    for (size_t k = 0; k < idx.size(); ++k) Ap.col(k) = A.col(idx[k]);
    Vec sp = Ap.completeOrthogonalDecomposition().solve(b);
    for (size_t k = 0; k < idx.size(); ++k) s[idx[k]] = sp[k];
  };

  int outer = 0;
  for (; outer < max_iter; ++outer) {
    int j = -1;
    double best = tol;
    for (Eigen::Index k = 0; k < n; ++k)
      if (!passive[k] && w[k] > best) {
        best = w[k];
        j = static_cast<int>(k);
      }
    if (j < 0) break;
    passive[j] = 1;
    Vec s;
    solve_passive(s);
    int inner = 0;
    while (inner++ < 3 * n + 10) {
      double min_s = std::numeric_limits<double>::infinity();
      for (Eigen::Index k = 0; k < n; ++k)
        if (passive[k]) min_s = std::min(min_s, s[k]);
      if (min_s > 0) break;
      double alpha = std::numeric_limits<double>::infinity();
      for (Eigen::Index k = 0; k < n; ++k)
        if (passive[k] && s[k] <= 0) alpha = std::min(alpha, x[k] / (x[k] - s[k]));
      x += alpha * (s - x);
      for (Eigen::Index k = 0; k < n; ++k)
        if (passive[k] && x[k] <= tol) {
          passive[k] = 0;
          x[k] = 0.0;
        }
      solve_passive(s);
    }
    x = s;
    w = A.transpose() * (b - A * x);
  }
  out.converged = outer < max_iter;
  x = x.cwiseMax(0.0);
  out.residual_norm = (A * x - b).norm();
  return out;
}

std::string to_string(LpStatus s) {
  switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    case LpStatus::iteration_limit: return "iteration_limit";
  }
  return "unknown";
}

namespace {

struct Tableau {
  Mat T;  // m constraint rows, last row = reduced costs; last column = rhs
  std::vector<int> basis;

  Eigen::Index rows() const { return T.rows() - 1; }
  Eigen::Index rhs() const { return T.cols() - 1; }

  void pivot(Eigen::Index r, Eigen::Index c) {
    T.row(r) /= T(r, c);
    for (Eigen::Index i = 0; i < T.rows(); ++i)
      if (i != r && T(i, c) != 0.0) T.row(i) -= T(i, c) * T.row(r);
    basis[r] = static_cast<int>(c);
  }

  // Bland's rule on columns [0, ncols). Returns status.
  LpStatus run(Eigen::Index ncols, int max_iter, int& iters) {
    const double eps = 1e-10;
    while (iters < max_iter) {
      Eigen::Index enter = -1;
      double scale = 1.0 + T.row(rows()).head(ncols).cwiseAbs().maxCoeff();
      for (Eigen::Index j = 0; j < ncols; ++j)
        if (T(rows(), j) < -eps * scale) {
          enter = j;
          break;
        }
      if (enter < 0) return LpStatus::optimal;
      Eigen::Index leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < rows(); ++i) {
        double a = T(i, enter);
        if (a > eps) {
          double ratio = T(i, rhs()) / a;
          double tie = 1e-12 * (1.0 + std::abs(best));
          if (leave < 0 || ratio < best - tie) {
            best = ratio;
            leave = i;
          } else if (std::abs(ratio - best) <= tie && basis[i] < basis[leave]) {
            best = std::min(best, ratio);
            leave = i;
          }
        }
      }
      if (leave < 0) return LpStatus::unbounded;
      pivot(leave, enter);
      ++iters;
    }
    return LpStatus::iteration_limit;
  }
};

}  // namespace

LpResult solve_lp(const LinearProgram& lp, int max_iter) {
  const Eigen::Index nv = lp.c.size();
  const Eigen::Index m = lp.A.rows();
  if (lp.A.cols() != nv || lp.b.size() != m || static_cast<Eigen::Index>(lp.sense.size()) != m)
    throw ShapeError("solve_lp: inconsistent shapes");
  std::vector<bool> is_free = lp.free_var.empty() ? std::vector<bool>(nv, false) : lp.free_var;

  // Column layout: for each original variable, + part (and - part if free); then slacks.
  std::vector<Eigen::Index> pos_col(nv), neg_col(nv, -1);
  Eigen::Index ncol = 0;
  for (Eigen::Index k = 0; k < nv; ++k) {
    pos_col[k] = ncol++;
    if (is_free[k]) neg_col[k] = ncol++;
  }
  Eigen::Index nslack = 0;
  for (char s : lp.sense)
    if (s != '=') ++nslack;
  const Eigen::Index N = ncol + nslack;

  Mat A = Mat::Zero(m, N);
  Vec b = lp.b;
  Vec c = Vec::Zero(N);
  const double sgn = lp.maximize ? -1.0 : 1.0;
  for (Eigen::Index k = 0; k < nv; ++k) {
    A.col(pos_col[k]) = lp.A.col(k);
    c[pos_col[k]] = sgn * lp.c[k];
    if (neg_col[k] >= 0) {
      A.col(neg_col[k]) = -lp.A.col(k);
      c[neg_col[k]] = -sgn * lp.c[k];
    }
  }
  Eigen::Index sc = ncol;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (lp.sense[i] == '<') A(i, sc++) = 1.0;
    else if (lp.sense[i] == '>') A(i, sc++) = -1.0;
    else if (lp.sense[i] != '=') throw InputError("solve_lp: unknown constraint sense");
    if (b[i] < 0) {
      A.row(i) *= -1.0;
      b[i] = -b[i];
    }
  }

  // Phase 1 with one artificial per row.
  Tableau tab;
  tab.T = Mat::Zero(m + 1, N + m + 1);
  tab.T.topLeftCorner(m, N) = A;
  tab.T.block(0, N, m, m) = Mat::Identity(m, m);
  tab.T.topRightCorner(m, 1) = b;
  tab.basis.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) tab.basis[i] = static_cast<int>(N + i);
  for (Eigen::Index j = 0; j < N; ++j) tab.T(m, j) = -A.col(j).sum();
  tab.T(m, N + m) = -b.sum();

  LpResult res;
  int iters = 0;
  LpStatus st = tab.run(N, max_iter, iters);
  if (st == LpStatus::iteration_limit) {
    res.status = st;
    res.iterations = iters;
    return res;
  }
  const double feas_tol = 1e-9 * (1.0 + b.cwiseAbs().sum());
  if (-tab.T(m, N + m) > feas_tol) {
    res.status = LpStatus::infeasible;
    res.iterations = iters;
    return res;
  }
  // Drive remaining artificials out of the basis; drop redundant rows.
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (tab.basis[i] >= N) {
      Eigen::Index piv = -1;
      for (Eigen::Index j = 0; j < N; ++j)
        if (std::abs(tab.T(i, j)) > 1e-9) {
          piv = j;
          break;
        }
      if (piv >= 0) tab.pivot(i, piv);
    }
  }
  for (Eigen::Index i = 0; i < m; ++i)
    if (tab.basis[i] < N) keep.push_back(i);

  Tableau t2;
  const Eigen::Index m2 = static_cast<Eigen::Index>(keep.size());
  t2.T = Mat::Zero(m2 + 1, N + 1);
  for (Eigen::Index r = 0; r < m2; ++r) {
    t2.T.row(r).head(N) = tab.T.row(keep[r]).head(N);
    t2.T(r, N) = std::max(0.0, tab.T(keep[r], N + m));
    t2.basis.push_back(tab.basis[keep[r]]);
  }
  t2.T.row(m2).head(N) = c.transpose();
  for (Eigen::Index r = 0; r < m2; ++r) {
    double cb = c[t2.basis[r]];
    if (cb != 0.0) t2.T.row(m2) -= cb * t2.T.row(r);
  }
  st = t2.run(N, max_iter, iters);
  res.status = st;
  res.iterations = iters;
  if (st != LpStatus::optimal) return res;

  Vec z = Vec::Zero(N);
  for (Eigen::Index r = 0; r < m2; ++r) z[t2.basis[r]] = t2.T(r, N);
  res.x.resize(nv);
  for (Eigen::Index k = 0; k < nv; ++k)
    res.x[k] = z[pos_col[k]] - (neg_col[k] >= 0 ? z[neg_col[k]] : 0.0);
  res.value = lp.c.dot(res.x);
  return res;
}

QpResult active_set_qp(const Mat& H, const Vec& f, const Mat& A, const Vec& b, const Vec& x0,
                       int max_iter, double tol) {
  const Eigen::Index n = x0.size();
  if (H.rows() != n || H.cols() != n || f.size() != n || A.cols() != n || A.rows() != b.size())
    throw ShapeError("active_set_qp: inconsistent shapes");
  QpResult out;
  Vec x = x0.cwiseMax(0.0);
  std::vector<char> fixed(n, 0);
  for (Eigen::Index i = 0; i < n; ++i)
    if (x[i] <= 0.0) fixed[i] = 1;

  for (int it = 0; it < max_iter; ++it) {
    out.iterations = it + 1;
    std::vector<int> F, W;
    for (Eigen::Index i = 0; i < n; ++i) (fixed[i] ? W : F).push_back(static_cast<int>(i));
    Vec g = H * x + f;
    Vec p = Vec::Zero(n);
    if (!F.empty()) {
      Mat AF(A.rows(), F.size());
      Mat HFF(F.size(), F.size());
      Vec gF(F.size());
      for (size_t a = 0; a < F.size(); ++a) {
        AF.col(a) = A.col(F[a]);
        gF[a] = g[F[a]];
        for (size_t c2 = 0; c2 < F.size(); ++c2) HFF(a, c2) = H(F[a], F[c2]);
      }
      Mat Z = null_space(AF);
      if (Z.cols() > 0) {
        Mat R = Z.transpose() * HFF * Z;
        Vec q = R.ldlt().solve(-Z.transpose() * gF);
        Vec pF = Z * q;
        for (size_t a = 0; a < F.size(); ++a) p[F[a]] = pF[a];
      }
    }
    const double step_scale = tol * (1.0 + x.norm());
    if (p.norm() <= step_scale) {
      // Multipliers: g_F = A_F^T y, mu_W = g_W - A_W^T y.
      Vec yeq = Vec::Zero(A.rows());
      if (!F.empty() && A.rows() > 0) {
        Mat AFt(F.size(), A.rows());
        Vec gF(F.size());
        for (size_t a = 0; a < F.size(); ++a) {
          AFt.row(a) = A.col(F[a]).transpose();
          gF[a] = g[F[a]];
        }
        yeq = AFt.completeOrthogonalDecomposition().solve(gF);
      }
      Vec mu = g - A.transpose() * yeq;
      int worst = -1;
      double worst_val = -tol * (1.0 + g.cwiseAbs().maxCoeff());
      for (int i : W)
        if (mu[i] < worst_val) {
          worst_val = mu[i];
          worst = i;
        }
      if (worst < 0) {
        out.converged = true;
        out.kkt_residual = p.norm();
        break;
      }
      fixed[worst] = 0;
      continue;
    }
    double step = 1.0;
    int block = -1;
    for (int i : F)
      if (p[i] < 0) {
        double r = -x[i] / p[i];
        if (r < step) {
          step = r;
          block = i;
        }
      }
    x += step * p;
    if (block >= 0) {
      x[block] = 0.0;
      fixed[block] = 1;
    }
    x = x.cwiseMax(0.0);
  }
  out.x = x;
  out.value = 0.5 * x.dot(H * x) + f.dot(x);
  return out;
}

}  // namespace relu_optset::numeric
