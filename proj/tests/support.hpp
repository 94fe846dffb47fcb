#pragma once

// Generators and independent oracles shared by the unit tests and the acceptance binary.

#include "relu_optset/core.hpp"
#include "relu_optset/reformulation.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace testsupport {

using relu_optset::CglProblem;
using relu_optset::Mat;
using relu_optset::Vec;

inline Mat gaussian(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> N(0.0, 1.0);
  Mat M(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) M(i, j) = N(rng);
  return M;
}

inline Vec gaussian_vec(std::mt19937_64& rng, int n) { return gaussian(rng, n, 1).col(0); }

// Unconstrained group lasso with random widths in [1, max_width].
inline CglProblem random_group_lasso(std::mt19937_64& rng, int n, int blocks, int max_width, double lambda_frac) {
  std::uniform_int_distribution<int> W(1, max_width);
  std::vector<int> widths;
  int d = 0;
  for (int b = 0; b < blocks; ++b) {
    widths.push_back(W(rng));
    d += widths.back();
  }
  CglProblem p = relu_optset::make_problem(gaussian(rng, n, d), gaussian_vec(rng, n),
                                           relu_optset::BlockPartition::contiguous(widths), 1.0);
  p.lambda = lambda_frac * relu_optset::lambda_max(p);
  return p;
}

// Straight-line objective: loops only, no library helpers.
inline double objective_oracle(const CglProblem& p, const Vec& w) {
  double loss = 0.0;
  for (int i = 0; i < p.X.rows(); ++i) {
    double f = 0.0;
    for (int j = 0; j < p.X.cols(); ++j) f += p.X(i, j) * w[j];
    loss += (f - p.y[i]) * (f - p.y[i]);
  }
  double pen = 0.0;
  for (const auto& blk : p.partition.blocks()) {
    double s = 0.0;
    for (int j : blk) s += w[j] * w[j];
    pen += std::sqrt(s);
  }
  return 0.5 * loss + p.lambda * pen;
}

// Dykstra's alternating projections onto {z : K^T z <= 0}, one halfspace per column.
inline Vec dykstra_cone(const Mat& K, const Vec& v, int max_sweeps = 5000) {
  const int m = static_cast<int>(K.cols());
  Vec x = v;
  std::vector<Vec> inc(m, Vec::Zero(v.size()));
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    Vec start = x;
    for (int j = 0; j < m; ++j) {
      Vec z = x + inc[j];
      double kk = K.col(j).squaredNorm();
      double g = K.col(j).dot(z);
      Vec proj = (g > 0 && kk > 0) ? Vec(z - (g / kk) * K.col(j)) : z;
      inc[j] = z - proj;
      x = proj;
    }
    if ((x - start).norm() <= 1e-15 * (1.0 + x.norm())) break;
  }
  return x;
}

// Plain ISTA (no momentum) with an SVD step size and Dykstra cone projections.
inline Vec ista_oracle(const CglProblem& p, int iters) {
  Eigen::JacobiSVD<Mat> svd(p.X);
  const double L = std::max(1e-12, svd.singularValues()[0] * svd.singularValues()[0]);
  Vec w = Vec::Zero(p.d());
  for (int k = 0; k < iters; ++k) {
    Vec z = w - p.X.transpose() * (p.X * w - p.y) / L;
    Vec next(p.d());
    for (int b = 0; b < p.num_blocks(); ++b) {
      Vec zb = p.partition.gather(z, b);
      if (p.K[b]) zb = dykstra_cone(*p.K[b], zb);
      double nz = zb.norm();
      double th = p.lambda / L;
      p.partition.scatter(next, b, nz > th ? Vec((1.0 - th / nz) * zb) : Vec::Zero(zb.size()));
    }
    double change = (next - w).norm();
    w = next;
    if (change <= 1e-15 * (1.0 + w.norm())) break;
  }
  return w;
}

// Brute-force activation patterns of a rank <= 2 Z: a dense angle grid in the row space, every
// direction perpendicular to a row, and u = 0.
inline std::set<std::string> sweep_oracle(const Mat& Z, int grid = 20000) {
  std::set<std::string> out;
  auto add = [&](const Vec& u) {
    std::string s;
    double scale = Z.cwiseAbs().maxCoeff() * std::max(1.0, u.norm());
    for (int i = 0; i < Z.rows(); ++i) s += (Z.row(i).dot(u) >= -1e-12 * scale) ? '1' : '0';
    out.insert(s);
  };
  add(Vec::Zero(Z.cols()));
  Eigen::JacobiSVD<Mat> svd(Z, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  int r = 0;
  for (int k = 0; k < sv.size(); ++k)
    if (sv[k] > 1e-10 * sv[0]) ++r;
  if (r == 0) return out;
  Vec e1 = svd.matrixV().col(0);
  Vec e2 = r > 1 ? Vec(svd.matrixV().col(1)) : Vec::Zero(Z.cols());
  if (r == 1) {
    add(e1);
    add(-e1);
    return out;
  }
  const double pi = std::acos(-1.0);
  for (int k = 0; k < grid; ++k) {
    double a = 2 * pi * (k + 0.5) / grid;
    add(std::cos(a) * e1 + std::sin(a) * e2);
  }
  for (int i = 0; i < Z.rows(); ++i) {
    double a = Z.row(i).dot(e1), b = Z.row(i).dot(e2);
    if (a == 0 && b == 0) continue;
    Vec perp = -b * e1 + a * e2;
    add(perp);
    add(-perp);
  }
  return out;
}

inline double binom(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Gradient descent on a width-m ReLU network with scalar input, biases unpenalized:
// 1/2 |f(z) - y|^2 + (lambda/2)(|w1|^2 + |w2|^2). Returns the best objective over the restarts.
inline double nonconvex_1d_oracle(const Vec& Z, const Vec& y, double lambda, int m, int steps, int restarts,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  const int n = static_cast<int>(Z.size());
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Vec w1(m), b1(m), w2(m);
    for (int k = 0; k < m; ++k) {
      w1[k] = N(rng);
      b1[k] = N(rng) * (Z.maxCoeff() - Z.minCoeff());
      w2[k] = N(rng);
    }
    double b2 = y.mean();
    double lr = 1e-3;
    auto eval = [&](Vec* gw1, Vec* gb1, Vec* gw2, double* gb2) {
      Vec f = Vec::Constant(n, b2);
      Mat H(n, m);
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < m; ++k) {
          H(i, k) = w1[k] * Z[i] + b1[k];
          if (H(i, k) > 0) f[i] += w2[k] * H(i, k);
        }
      Vec res = f - y;
      double obj = 0.5 * res.squaredNorm() + 0.5 * lambda * (w1.squaredNorm() + w2.squaredNorm());
      if (gw1) {
        gw1->setZero(m);
        gb1->setZero(m);
        gw2->setZero(m);
        *gb2 = res.sum();
        for (int i = 0; i < n; ++i)
          for (int k = 0; k < m; ++k)
            if (H(i, k) > 0) {
              (*gw2)[k] += res[i] * H(i, k);
              (*gw1)[k] += res[i] * w2[k] * Z[i];
              (*gb1)[k] += res[i] * w2[k];
            }
        *gw1 += lambda * w1;
        *gw2 += lambda * w2;
      }
      return obj;
    };
    Vec gw1, gb1, gw2;
    double gb2 = 0.0;
    double obj = eval(&gw1, &gb1, &gw2, &gb2);
    for (int s = 0; s < steps; ++s) {
      Vec o1 = w1, ob1 = b1, o2 = w2;
      double ob2 = b2;
      w1 -= lr * gw1;
      b1 -= lr * gb1;
      w2 -= lr * gw2;
      b2 -= lr * gb2;
      Vec n1, nb1, n2;
      double nb2 = 0.0;
      double next = eval(&n1, &nb1, &n2, &nb2);
      if (next <= obj) {
        obj = next;
        gw1 = n1;
        gb1 = nb1;
        gw2 = n2;
        gb2 = nb2;
        lr = std::min(lr * 1.05, 1.0);
      } else {
        w1 = o1;
        b1 = ob1;
        w2 = o2;
        b2 = ob2;
        lr *= 0.5;
      }
    }
    best = std::min(best, obj);
  }
  return best;
}

// Lasso over a dense dictionary of kinks c (grid step h over [min Z - 1, max Z + 1], data points
// included) with features (z - c)_+ and (c - z)_+, intercept profiled out, solved by cyclic
// coordinate descent. Each neuron (w1 z + b1)_+ w2 with kink c contributes coefficient |w1| w2 at
// cost lambda |w1 w2| after rebalancing, so this is the width-unbounded network problem with
// kinks restricted to the grid.
inline double kink_grid_oracle(const Vec& Z, const Vec& y, double lambda, int per_gap, int sweeps) {
  std::vector<double> kinks;
  const double lo = Z.minCoeff() - 1.0, hi = Z.maxCoeff() + 1.0;
  std::vector<double> knots{lo};
  for (int i = 0; i < Z.size(); ++i) knots.push_back(Z[i]);
  knots.push_back(hi);
  std::sort(knots.begin(), knots.end());
  for (size_t k = 0; k + 1 < knots.size(); ++k)
    for (int s = 0; s < per_gap; ++s) kinks.push_back(knots[k] + (knots[k + 1] - knots[k]) * s / per_gap);
  kinks.push_back(hi);
  const int n = static_cast<int>(Z.size()), p = 2 * static_cast<int>(kinks.size());
  Mat F(n, p);
  for (size_t k = 0; k < kinks.size(); ++k)
    for (int i = 0; i < n; ++i) {
      F(i, 2 * k) = std::max(0.0, Z[i] - kinks[k]);
      F(i, 2 * k + 1) = std::max(0.0, kinks[k] - Z[i]);
    }
  Vec mean = F.colwise().mean().transpose();
  Mat Fc = F.rowwise() - mean.transpose();
  Vec yc = y.array() - y.mean();
  Vec a = Vec::Zero(p), r = yc;
  Vec sq = Fc.colwise().squaredNorm().transpose();
  for (int t = 0; t < sweeps; ++t) {
    double moved = 0.0;
    for (int j = 0; j < p; ++j) {
      if (sq[j] == 0.0) continue;
      double rho = Fc.col(j).dot(r) + sq[j] * a[j];
      double nj = (rho > lambda ? rho - lambda : rho < -lambda ? rho + lambda : 0.0) / sq[j];
      if (nj != a[j]) {
        r -= (nj - a[j]) * Fc.col(j);
        moved = std::max(moved, std::abs(nj - a[j]));
        a[j] = nj;
      }
    }
    if (moved < 1e-15) break;
  }
  return 0.5 * r.squaredNorm() + lambda * a.lpNorm<1>();
}

}  // namespace testsupport
