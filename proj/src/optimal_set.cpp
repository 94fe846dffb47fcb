#include "relu_optset/optimal_set.hpp"

#include "relu_optset/errors.hpp"
#include "relu_optset/numeric.hpp"
#include "relu_optset/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>

namespace relu_optset {

DualCertificate recover_dual(const CglProblem& problem, const Weights& w, double tol, bool min_norm) {
  problem.validate();
  DualCertificate rho = fit_dual(problem, w, tol);
  if (min_norm) {
    for (int i = 0; i < problem.num_blocks(); ++i) {
      if (!problem.K[i] || rho.rho[i].size() == 0) continue;
      const Mat& K = *problem.K[i];
      // Among rho >= 0 with K rho fixed (and zero off the support allowed by slackness),
      // take the one of least norm.
      Vec target = K * rho.rho[i];
      Vec wb = problem.partition.gather(w, i);
      std::vector<int> cols;
      Vec g = K.transpose() * wb;
      for (int j = 0; j < K.cols(); ++j)
        if (g[j] >= -tol * (1.0 + K.col(j).norm() * wb.norm())) cols.push_back(j);
      if (cols.empty()) continue;
      Mat Kc(K.rows(), cols.size());
      Vec x0(cols.size());
      for (size_t k = 0; k < cols.size(); ++k) {
        Kc.col(k) = K.col(cols[k]);
        x0[k] = rho.rho[i][cols[k]];
      }
      Mat rows = numeric::row_space_basis(Kc);
      auto qp = numeric::active_set_qp(Mat::Identity(cols.size(), cols.size()), Vec::Zero(cols.size()), rows,
                                       rows * x0, x0);
      if (!qp.converged) continue;
      Vec r = Vec::Zero(K.cols());
      for (size_t k = 0; k < cols.size(); ++k) r[cols[k]] = qp.x[k];
      rho.rho[i] = r;
    }
  }
  KktReport rep = kkt_report(problem, w, rho, tol);
  if (!rep.satisfied)
    throw CertificateError("recover_dual: no multiplier certifies this point (stationarity " +
                           std::to_string(rep.stationarity_violation) + ", feasibility " +
                           std::to_string(rep.feasibility_violation) + ", slackness " +
                           std::to_string(rep.slackness_violation) + ")");
  return rho;
}

Weights OptimalSetDescription::weights_from_alpha(const Vec& alpha) const {
  Weights out = Weights::Zero(problem.d());
  for (size_t k = 0; k < support.size(); ++k)
    problem.partition.scatter(out, support[k], std::max(0.0, alpha[k]) * v_vectors[support[k]]);
  return out;
}

namespace {

struct Polytope {
  Mat G;
  Mat rows;
  Vec rhs;
};

Polytope make_polytope(const Mat& G, const Vec& alpha) {
  Polytope p;
  p.G = G;
  p.rows = numeric::row_space_basis(G);
  p.rhs = p.rows * alpha;
  return p;
}

numeric::LpResult maximize_over(const Polytope& poly, const Vec& c) {
  numeric::LinearProgram lp;
  lp.c = c;
  lp.A = poly.rows;
  lp.b = poly.rhs;
  lp.sense.assign(poly.rows.rows(), '=');
  lp.maximize = true;
  return numeric::solve_lp(lp);
}

}  // namespace

OptimalSetDescription describe_set(const CglProblem& problem, const Weights& w, const DualCertificate& rho,
                                   double tol) {
  problem.validate();
  if (!(problem.lambda > 0)) throw InputError("describe_set: requires lambda > 0");
  OptimalSetDescription desc;
  desc.problem = problem;
  desc.w = w;
  desc.rho = rho;
  desc.tol = tol;
  KktReport rep = kkt_report(problem, w, rho, tol);
  if (!rep.satisfied) throw CertificateError("describe_set: (w, rho) does not pass the KKT check");
  desc.y_hat = problem.X * w;
  desc.equicorrelation = rep.equicorrelation;
  desc.active = rep.active;
  desc.v_vectors = rep.v_vectors;

  // Blocks that may carry weight: cone-feasible v with zero complementary slack.
  for (int i : rep.equicorrelation) {
    bool ok = true;
    if (problem.K[i]) {
      const Mat& K = *problem.K[i];
      Vec g = K.transpose() * rep.v_vectors[i];
      double scale = tol * (1.0 + K.norm() * rep.v_vectors[i].norm());
      ok = (g.size() == 0 || g.maxCoeff() <= scale) && std::abs(rho.rho[i].dot(g)) <= scale;
    }
    if (ok || std::binary_search(rep.active.begin(), rep.active.end(), i)) desc.eligible.push_back(i);
  }
  for (int i : rep.active)
    if (!std::binary_search(desc.eligible.begin(), desc.eligible.end(), i)) {
      desc.eligible.push_back(i);
      std::sort(desc.eligible.begin(), desc.eligible.end());
    }

  const int ne = static_cast<int>(desc.eligible.size());
  Mat G(problem.n(), ne);
  Vec alpha(ne);
  for (int k = 0; k < ne; ++k) {
    int b = desc.eligible[k];
    const Vec& v = rep.v_vectors[b];
    G.col(k) = problem.partition.columns(problem.X, b) * v;
    alpha[k] = std::max(0.0, problem.partition.gather(w, b).dot(v) / v.squaredNorm());
  }
  Polytope poly = make_polytope(G, alpha);

  std::vector<char> in_support(ne, 0);
  for (int k = 0; k < ne; ++k)
    in_support[k] = std::binary_search(rep.active.begin(), rep.active.end(), desc.eligible[k]);
  std::vector<Vec> probes{alpha};
  for (int k = 0; k < ne; ++k) {
    if (in_support[k]) continue;
    Vec c = Vec::Zero(ne);
    c[k] = 1.0;
    auto lp = maximize_over(poly, c);
    if (lp.status != numeric::LpStatus::optimal) {
      desc.subset_only = true;
      continue;
    }
    if (lp.value > 1e-8) {
      in_support[k] = 1;
      probes.push_back(lp.x.cwiseMax(0.0));
    }
  }
  // Also make sure support members that are active in w get a positive probe coordinate.
  Vec interior = Vec::Zero(ne);
  for (const auto& p : probes) interior += p;
  interior /= static_cast<double>(probes.size());

  for (int k = 0; k < ne; ++k)
    if (in_support[k]) desc.support.push_back(desc.eligible[k]);
  const int ns = desc.support_size();
  desc.generators.resize(problem.n(), ns);
  desc.alpha_w.resize(ns);
  desc.alpha_interior.resize(ns);
  for (int k = 0, s = 0; k < ne; ++k) {
    if (!in_support[k]) continue;
    desc.generators.col(s) = G.col(k);
    desc.alpha_w[s] = alpha[k];
    desc.alpha_interior[s] = interior[k];
    ++s;
  }
  desc.eq_rows = numeric::row_space_basis(desc.generators);
  desc.eq_rhs = desc.eq_rows * desc.alpha_w;
  return desc;
}

Membership membership(const OptimalSetDescription& desc, const Weights& w, double tol) {
  Membership m;
  const auto& p = desc.problem;
  if (w.size() != p.d()) {
    m.note = "wrong length";
    return m;
  }
  const double lam = p.lambda;
  const double dir_scale = std::max(1.0, 1.0 / lam);
  const double off_thr = tol * (1.0 + w.norm());
  for (int i = 0; i < p.num_blocks(); ++i) {
    Vec wb = p.partition.gather(w, i);
    bool in_s = std::binary_search(desc.support.begin(), desc.support.end(), i);
    if (!in_s) {
      if (wb.norm() > off_thr) {
        bool could_be = desc.subset_only &&
                        std::binary_search(desc.eligible.begin(), desc.eligible.end(), i);
        m.indeterminate_support = could_be;
        m.note = "block " + std::to_string(i) + " is nonzero outside the support" +
                 (could_be ? " (indeterminate-support)" : "");
        return m;
      }
      continue;
    }
    const Vec& v = desc.v_vectors[i];
    double a = wb.dot(v) / v.squaredNorm();
    if (a < -tol) {
      m.note = "block " + std::to_string(i) + " has negative coefficient";
      return m;
    }
    if ((wb - a * v).norm() > tol * (1.0 + wb.norm()) * dir_scale) {
      m.note = "block " + std::to_string(i) + " is not aligned with its v-vector";
      return m;
    }
  }
  if ((p.X * w - desc.y_hat).norm() > tol * (1.0 + desc.y_hat.norm())) {
    m.note = "fit differs from the optimal fit";
    return m;
  }
  m.member = true;
  return m;
}

bool contains(const OptimalSetDescription& desc, const Weights& w, double tol) {
  return membership(desc, w, tol).member;
}

namespace {

Vec min_norm_alpha(const OptimalSetDescription& desc) {
  const int ns = desc.support_size();
  Vec h(ns);
  for (int k = 0; k < ns; ++k) h[k] = desc.v_vectors[desc.support[k]].squaredNorm();
  auto qp = numeric::active_set_qp(h.asDiagonal(), Vec::Zero(ns), desc.eq_rows, desc.eq_rhs, desc.alpha_w);
  if (!qp.converged) throw SolverError("min_norm: active-set QP did not converge");
  return qp.x;
}

}  // namespace

std::vector<Weights> sample_solutions(const OptimalSetDescription& desc, int count, std::uint64_t seed) {
  if (count < 0) throw InputError("sample_solutions: negative count");
  std::vector<Weights> out;
  const int ns = desc.support_size();
  Mat N = ns ? numeric::null_space(desc.eq_rows.rows() ? desc.eq_rows : Mat(0, ns)) : Mat(0, 0);
  if (ns == 0 || N.cols() == 0) {
    out.assign(count, desc.w);
    return out;
  }
  Vec alpha = 0.5 * (min_norm_alpha(desc) + desc.alpha_interior);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int thin = 5;
  for (int s = 0; s < count; ++s) {
    for (int step = 0; step < thin; ++step) {
      Vec xi(N.cols());
      for (Eigen::Index j = 0; j < xi.size(); ++j) xi[j] = g(rng);
      Vec dir = N * xi;
      dir /= dir.norm();
      double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
      for (int k = 0; k < ns; ++k) {
        if (dir[k] > 1e-14) lo = std::max(lo, -alpha[k] / dir[k]);
        else if (dir[k] < -1e-14) hi = std::min(hi, -alpha[k] / dir[k]);
      }
      if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) continue;
      alpha += (lo + (hi - lo) * u(rng)) * dir;
      alpha = alpha.cwiseMax(0.0);
    }
    out.push_back(desc.weights_from_alpha(alpha));
  }
  return out;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::unique: return "unique";
    case Verdict::non_unique: return "non_unique";
    case Verdict::unknown: return "unknown";
  }
  return "unknown";
}

UniquenessCertificate is_unique(const CglProblem& problem, const Weights& w, const DualCertificate& rho,
                                double tol) {
  UniquenessCertificate cert;
  OptimalSetDescription desc = describe_set(problem, w, rho, tol);
  Mat XE(problem.n(), 0);
  for (int b : desc.equicorrelation) {
    Mat cols = problem.partition.columns(problem.X, b);
    XE.conservativeResize(Eigen::NoChange, XE.cols() + cols.cols());
    XE.rightCols(cols.cols()) = cols;
  }
  cert.columns_independent =
      XE.cols() == 0 || (XE.cols() <= XE.rows() && numeric::sigma_min(XE) > numeric::rank_tolerance(XE));
  if (desc.support_size() == 0) {
    cert.verdict = desc.subset_only ? Verdict::unknown : Verdict::unique;
    cert.margin = std::numeric_limits<double>::infinity();
    cert.note = "empty support";
    return cert;
  }
  const Mat& G = desc.generators;
  cert.margin = numeric::sigma_min(G);
  cert.tolerance = numeric::rank_tolerance(G);
  if (cert.margin > cert.tolerance && G.cols() <= G.rows()) {
    cert.verdict = desc.subset_only ? Verdict::unknown : Verdict::unique;
    cert.note = desc.subset_only ? "generators independent but support only certified as a subset"
                                 : "generators over the support are linearly independent";
    return cert;
  }
  // Dependent generators: build a second solution.
  std::vector<Weights> candidates;
  if (auto step = prune_step(problem, w)) candidates.push_back(step->first);
  Weights interior = desc.weights_from_alpha(desc.alpha_interior);
  if (auto step = prune_step(problem, interior)) candidates.push_back(step->first);
  candidates.push_back(interior);
  candidates.push_back(max_norm_approx(desc));
  for (const auto& c : candidates) {
    if ((c - w).norm() < 1e-4) continue;
    if (!contains(desc, c, tol)) continue;
    cert.verdict = Verdict::non_unique;
    cert.witness = c;
    cert.note = "generators over the support are linearly dependent";
    return cert;
  }
  cert.verdict = Verdict::unknown;
  cert.note = "dependent generators but no distinct witness was found";
  return cert;
}

namespace {

// min over theta (sum theta = 1) of |target - P theta|
double affine_residual(const Mat& P, const Vec& target) {
  const Eigen::Index k = P.cols();
  if (k == 0) return target.norm();
  if (k == 1) return (target - P.col(0)).norm();
  // theta = e_0 + N z, N spans {sum = 0}
  Mat Nb = Mat::Zero(k, k - 1);
  for (Eigen::Index j = 0; j + 1 < k; ++j) {
    Nb(0, j) = -1.0;
    Nb(j + 1, j) = 1.0;
  }
  Mat PN = P * Nb;
  Vec r0 = target - P.col(0);
  Vec z = PN.completeOrthogonalDecomposition().solve(r0);
  return (r0 - PN * z).norm();
}

template <class F>
void for_each_subset(int p, int m, F f) {
  std::vector<int> idx(m);
  for (int i = 0; i < m; ++i) idx[i] = i;
  while (true) {
    f(idx);
    int i = m - 1;
    while (i >= 0 && idx[i] == p - m + i) --i;
    if (i < 0) return;
    ++idx[i];
    for (int j = i + 1; j < m; ++j) idx[j] = idx[j - 1] + 1;
  }
}

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double c = 1.0;
  for (int j = 1; j <= k; ++j) c = c * (n - k + j) / j;
  return c;
}

}  // namespace

bool lasso_general_position(const Mat& A) {
  const int n = static_cast<int>(A.rows());
  const int p = static_cast<int>(A.cols());
  if (p <= 1) return true;
  const int m = std::min(n + 1, p);
  const double checks = binomial(p, m) * std::pow(2.0, m - 1) * m;
  if (checks > 1e6)
    throw CapabilityError("lasso_general_position: " + std::to_string(checks) + " checks exceed the 1e6 budget");
  const double scale = A.cwiseAbs().maxCoeff();
  bool ok = true;
  for_each_subset(p, m, [&](const std::vector<int>& idx) {
    if (!ok) return;
    for (int piv = 0; piv < m && ok; ++piv) {
      for (long mask = 0; mask < (1L << (m - 1)) && ok; ++mask) {
        Mat P(n, m - 1);
        int c = 0, bit = 0;
        for (int k = 0; k < m; ++k) {
          if (k == piv) continue;
          double s = (mask >> bit++) & 1 ? -1.0 : 1.0;
          P.col(c++) = s * A.col(idx[k]);
        }
        if (affine_residual(P, A.col(idx[piv])) <= 1e-9 * (1.0 + scale)) ok = false;
      }
    }
  });
  return ok;
}

namespace {

// Minimize |X_j z_j - sum theta_i X_i z_i| over unit z and affine theta by Riemannian gradient steps.
double refine_ggp(const std::vector<Mat>& Xs, int piv, std::vector<Vec>& z, int iters) {
  const int m = static_cast<int>(Xs.size());
  auto residual = [&](std::vector<double>* theta_out) {
    Mat P(Xs[0].rows(), m - 1);
    int c = 0;
    for (int i = 0; i < m; ++i)
      if (i != piv) P.col(c++) = Xs[i] * z[i];
    Vec target = Xs[piv] * z[piv];
    const Eigen::Index k = P.cols();
    Vec theta(k);
    if (k == 1) theta[0] = 1.0;
    else {
      Mat Nb = Mat::Zero(k, k - 1);
      for (Eigen::Index j = 0; j + 1 < k; ++j) {
        Nb(0, j) = -1.0;
        Nb(j + 1, j) = 1.0;
      }
      Vec zz = (P * Nb).completeOrthogonalDecomposition().solve(target - P.col(0));
      theta = Nb * zz;
      theta[0] += 1.0;
    }
    if (theta_out) theta_out->assign(theta.data(), theta.data() + k);
    return Vec(target - P * theta);
  };
  double step = 0.5;
  std::vector<double> theta;
  Vec r = residual(&theta);
  double f = r.squaredNorm();
  for (int it = 0; it < iters && f > 1e-30; ++it) {
    std::vector<Vec> grad(m);
    int c = 0;
    for (int i = 0; i < m; ++i) {
      Vec gi = i == piv ? Vec(Xs[i].transpose() * r) : Vec(-theta[c++] * Xs[i].transpose() * r);
      gi -= z[i].dot(gi) * z[i];
      grad[i] = gi;
    }
    bool moved = false;
    for (int bt = 0; bt < 30; ++bt) {
      std::vector<Vec> zn = z;
      for (int i = 0; i < m; ++i) {
        if (zn[i].size() == 1) continue;
        zn[i] -= step * grad[i];
        zn[i] /= zn[i].norm();
      }
      std::swap(z, zn);
      std::vector<double> th;
      Vec rn = residual(&th);
      double fn = rn.squaredNorm();
      if (fn < f) {
        r = rn;
        f = fn;
        theta = th;
        step *= 1.5;
        moved = true;
        break;
      }
      std::swap(z, zn);
      step *= 0.5;
    }
    if (!moved) break;
  }
  return std::sqrt(f);
}

}  // namespace

GgpResult ggp_check(const Mat& X, const BlockPartition& partition, GgpMode mode, std::uint64_t seed) {
  if (X.cols() != partition.dim()) throw ShapeError("ggp_check: X and partition disagree");
  const int nb = partition.num_blocks();
  int max_width = 0;
  for (int i = 0; i < nb; ++i) max_width = std::max(max_width, partition.width(i));
  GgpResult res;
  if (mode == GgpMode::exact_small && (nb > 8 || max_width > 3))
    throw CapabilityError("ggp_check: exact_small mode requires at most 8 blocks of width at most 3");
  const int n = static_cast<int>(X.rows());
  const int m = std::min(n + 1, nb);
  std::vector<Mat> blocks(nb);
  for (int i = 0; i < nb; ++i) blocks[i] = partition.columns(X, i);
  const double scale = 1.0 + X.cwiseAbs().maxCoeff();
  const double thr = 1e-7 * scale;
  const int grid = mode == GgpMode::exact_small ? 24 : 0;
  const int random_starts = mode == GgpMode::exact_small ? 8 : 32;
  res.grid_resolution = grid;
  res.method = mode == GgpMode::exact_small
                   ? "grid over the pivot sphere (" + std::to_string(grid) +
                         " points per circle) plus random starts, each refined by Riemannian descent; "
                         "width-1 blocks enumerate signs exactly"
                   : "random starts refined by Riemannian descent";
  res.best_residual = std::numeric_limits<double>::infinity();
  if (m < 2) {
    res.method += "; fewer than two blocks, nothing to check";
    return res;
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  auto random_unit = [&](int w) {
    Vec z(w);
    for (int k = 0; k < w; ++k) z[k] = g(rng);
    return Vec(z / z.norm());
  };
  auto grid_points = [&](int w) {
    std::vector<Vec> pts;
    if (w == 1) {
      pts.push_back(Vec::Constant(1, 1.0));
      return pts;
    }
    if (w == 2) {
      for (int k = 0; k < grid; ++k) {
        double a = 2.0 * std::numbers::pi * k / grid;
        Vec z(2);
        z << std::cos(a), std::sin(a);
        pts.push_back(z);
      }
      return pts;
    }
    int count = grid * grid / 2;
    for (int k = 0; k < count; ++k) {  // Fibonacci sphere
      double zc = 1.0 - 2.0 * (k + 0.5) / count;
      double rr = std::sqrt(std::max(0.0, 1.0 - zc * zc));
      double a = std::numbers::pi * (3.0 - std::sqrt(5.0)) * k;
      Vec z(3);
      z << rr * std::cos(a), rr * std::sin(a), zc;
      pts.push_back(z);
    }
    return pts;
  };
  bool found = false;
  for_each_subset(nb, m, [&](const std::vector<int>& idx) {
    if (found) return;
    std::vector<Mat> Xs;
    std::vector<int> widths;
    for (int b : idx) {
      Xs.push_back(blocks[b]);
      widths.push_back(partition.width(b));
    }
    for (int piv = 0; piv < m && !found; ++piv) {
      // Signs of width-1 non-pivot blocks are enumerated; the pivot's sign is fixed by symmetry.
      std::vector<int> scalar;
      for (int k = 0; k < m; ++k)
        if (k != piv && widths[k] == 1) scalar.push_back(k);
      std::vector<Vec> starts_piv = mode == GgpMode::exact_small ? grid_points(widths[piv]) : std::vector<Vec>{};
      for (int s = 0; s < random_starts; ++s) starts_piv.push_back(random_unit(widths[piv]));
      for (long sm = 0; sm < (1L << scalar.size()) && !found; ++sm) {
        for (const auto& zp : starts_piv) {
          std::vector<Vec> z(m);
          for (int k = 0; k < m; ++k) z[k] = k == piv ? zp : random_unit(widths[k]);
          for (size_t q = 0; q < scalar.size(); ++q) z[scalar[q]] = Vec::Constant(1, (sm >> q) & 1 ? -1.0 : 1.0);
          if (widths[piv] == 1) z[piv] = Vec::Constant(1, 1.0);
          double r = refine_ggp(Xs, piv, z, 400);
          ++res.starts;
          res.best_residual = std::min(res.best_residual, r);
          if (r <= thr) {
            found = true;
            res.violating_subset = idx;
            res.violating_pivot = idx[piv];
            break;
          }
        }
      }
    }
  });
  res.violation_found = found;
  return res;
}

Weights min_norm(const OptimalSetDescription& desc) {
  if (desc.support_size() == 0) return desc.w;
  return desc.weights_from_alpha(min_norm_alpha(desc));
}

Weights max_norm_approx(const OptimalSetDescription& desc) {
  const int ns = desc.support_size();
  if (ns == 0) return desc.w;
  Polytope poly{desc.generators, desc.eq_rows, desc.eq_rhs};
  auto lp = maximize_over(poly, Vec::Ones(ns));
  if (lp.status != numeric::LpStatus::optimal)
    throw SolverError("max_norm_approx: LP ended with status " + numeric::to_string(lp.status));
  return desc.weights_from_alpha(lp.x);
}

Weights tune_over_set(const OptimalSetDescription& desc, const Mat& X_val, const Vec& y_val) {
  const auto& p = desc.problem;
  if (X_val.cols() != p.d() || X_val.rows() != y_val.size())
    throw ShapeError("tune_over_set: validation data has incompatible shape");
  const int ns = desc.support_size();
  if (ns == 0) return desc.w;
  Mat P(X_val.rows(), ns);
  for (int k = 0; k < ns; ++k) {
    int b = desc.support[k];
    P.col(k) = p.partition.columns(X_val, b) * desc.v_vectors[b];
  }
  Mat H = P.transpose() * P;
  H.diagonal().array() += 1e-10 * (1.0 + H.trace() / ns);
  auto qp = numeric::active_set_qp(H, -P.transpose() * y_val, desc.eq_rows, desc.eq_rhs, desc.alpha_w);
  if (!qp.converged) throw SolverError("tune_over_set: active-set QP did not converge");
  return desc.weights_from_alpha(qp.x);
}

void flag_jumps(PathReport& report, double y_norm) {
  auto& pts = report.points;
  report.jumps.clear();
  const size_t K = pts.size();
  for (auto& p : pts) p.jump = false;
  if (K < 3) return;
  std::vector<double> delta(K - 1), slope(K - 1);
  for (size_t k = 0; k + 1 < K; ++k) {
    delta[k] = (pts[k].fit - pts[k + 1].fit).norm();
    slope[k] = delta[k] / std::abs(pts[k].lambda - pts[k + 1].lambda);
  }
  const double floor = 1e-5 * (1.0 + y_norm);
  for (size_t k = 0; k + 1 < K; ++k) {
    double neighbour = 0.0;
    if (k > 0) neighbour = std::max(neighbour, slope[k - 1]);
    if (k + 2 < K) neighbour = std::max(neighbour, slope[k + 1]);
    double expected = neighbour * std::abs(pts[k].lambda - pts[k + 1].lambda);
    if (delta[k] > 10.0 * expected && delta[k] > floor) {
      pts[k].jump = true;
      report.jumps.push_back(static_cast<int>(k));
    }
  }
}

PathReport trace_path(const Mat& Z, const Vec& y, const PatternSet& patterns, Arch arch,
                      const std::vector<double>& lambda_grid, const SolverOptions& options) {
  for (size_t k = 1; k < lambda_grid.size(); ++k)
    if (!(lambda_grid[k] < lambda_grid[k - 1])) throw InputError("trace_path: grid must be strictly decreasing");
  PathReport rep;
  std::optional<Weights> warm;
  for (double lam : lambda_grid) {
    PathPoint pt;
    pt.lambda = lam;
    try {
      CglProblem prob = build_cgl(Z, y, patterns, lam, arch);
      SolverOptions opt = options;
      if (warm) opt.initial = warm;
      SolveResult res = solve(prob, opt);
      pt.objective = objective(prob, res.w);
      pt.penalty = penalty(prob, res.w);
      pt.fit = prob.X * res.w;
      pt.support = res.report.active;
      pt.converged = res.converged;
      pt.kkt_violation = res.report.max_violation();
      if (!res.converged) pt.error = "solver did not reach the KKT tolerance";
      warm = res.w;
    } catch (const std::exception& e) {
      pt.error = e.what();
      pt.fit = Vec::Zero(y.size());
    }
    pt.fit_norm = pt.fit.norm();
    rep.points.push_back(std::move(pt));
  }
  flag_jumps(rep, y.norm());
  return rep;
}

double one_neuron_objective(double v, double lambda, const OneNeuronData& d) {
  double f1 = std::max(0.0, d.x1 * v), f2 = std::max(0.0, d.x2 * v);
  return 0.5 * ((f1 - d.y1) * (f1 - d.y1) + (f2 - d.y2) * (f2 - d.y2)) + lambda * std::abs(v);
}

OneNeuronSolution one_neuron_solve(double lambda, const OneNeuronData& d) {
  if (!(d.x1 < 0 && d.x2 > 0)) throw InputError("one_neuron: need x1 < 0 < x2");
  std::vector<OneNeuronSolution> cands;
  cands.push_back({0.0, one_neuron_objective(0.0, lambda, d), 0, false});
  double vm = (d.x1 * d.y1 + lambda) / (d.x1 * d.x1);
  if (vm < 0) cands.push_back({vm, one_neuron_objective(vm, lambda, d), -1, false});
  double vp = (d.x2 * d.y2 - lambda) / (d.x2 * d.x2);
  if (vp > 0) cands.push_back({vp, one_neuron_objective(vp, lambda, d), +1, false});
  std::sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) { return a.objective < b.objective; });
  OneNeuronSolution best = cands[0];
  if (cands.size() > 1 && std::abs(cands[1].objective - best.objective) <= 1e-12 * (1.0 + best.objective))
    best.tie = true;
  return best;
}

double one_neuron_breakpoint(const OneNeuronData& d) {
  // F_+ - F_- = a lam^2 + b lam + c on the range where both branches exist.
  double a = -0.5 / (d.x2 * d.x2) + 0.5 / (d.x1 * d.x1);
  double b = d.y2 / d.x2 + d.y1 / d.x1;
  double c = 0.5 * d.y1 * d.y1 - 0.5 * d.y2 * d.y2;
  std::vector<double> roots;
  if (std::abs(a) < 1e-300) roots.push_back(-c / b);
  else {
    double disc = b * b - 4 * a * c;
    if (disc < 0) return std::numeric_limits<double>::quiet_NaN();
    double sq = std::sqrt(disc);
    // Numerically stable pair.
    double q = -0.5 * (b + (b >= 0 ? sq : -sq));
    roots.push_back(q / a);
    roots.push_back(c / q);
  }
  std::sort(roots.begin(), roots.end());
  for (double r : roots)
    if (r > 0) return r;
  return std::numeric_limits<double>::quiet_NaN();
}

PathReport one_neuron_path(const std::vector<double>& lambda_grid, const OneNeuronData& d) {
  for (size_t k = 1; k < lambda_grid.size(); ++k)
    if (!(lambda_grid[k] < lambda_grid[k - 1])) throw InputError("one_neuron_path: grid must be strictly decreasing");
  PathReport rep;
  for (double lam : lambda_grid) {
    auto s = one_neuron_solve(lam, d);
    PathPoint pt;
    pt.lambda = lam;
    pt.objective = s.objective;
    pt.penalty = std::abs(s.v);
    pt.fit = Vec(2);
    pt.fit << std::max(0.0, d.x1 * s.v), std::max(0.0, d.x2 * s.v);
    pt.fit_norm = pt.fit.norm();
    if (s.v != 0.0) pt.support = {0};
    pt.converged = true;
    rep.points.push_back(std::move(pt));
  }
  flag_jumps(rep, std::hypot(d.y1, d.y2));
  return rep;
}

void write_path_csv(std::ostream& os, const PathReport& report) {
  os << "lambda,objective,fit_norm,support_size,jump_flag\n";
  os.precision(17);
  for (const auto& p : report.points)
    os << p.lambda << ',' << p.objective << ',' << p.fit_norm << ',' << p.support.size() << ','
       << (p.jump ? 1 : 0) << '\n';
}

}  // namespace relu_optset
