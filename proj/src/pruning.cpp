#include "relu_optset/pruning.hpp"

#include "relu_optset/errors.hpp"
#include "relu_optset/numeric.hpp"
#include "relu_optset/optimal_set.hpp"

#include <cmath>
#include <ostream>
#include <random>

namespace relu_optset {

namespace {

Mat active_fits(const CglProblem& problem, const Weights& w, const IndexSet& active) {
  Mat F(problem.n(), active.size());
  for (size_t k = 0; k < active.size(); ++k)
    F.col(k) = problem.partition.columns(problem.X, active[k]) * problem.partition.gather(w, active[k]);
  return F;
}

// Position of the entry to remove: largest |beta|, ties resolved towards the highest index.
Eigen::Index removal_index(const Vec& beta) {
  double mx = beta.cwiseAbs().maxCoeff();
  Eigen::Index idx = 0;
  for (Eigen::Index k = 0; k < beta.size(); ++k)
    if (std::abs(beta[k]) >= mx * (1.0 - 1e-9)) idx = k;
  return idx;
}

}  // namespace

MinimalityResult is_minimal(const CglProblem& problem, const Weights& w) {
  IndexSet active = active_blocks(problem, w);
  MinimalityResult r;
  if (active.empty()) {
    r.minimal = true;
    r.margin = std::numeric_limits<double>::infinity();
    return r;
  }
  Mat F = active_fits(problem, w, active);
  r.margin = numeric::sigma_min(F);
  r.tolerance = numeric::rank_tolerance(F);
  r.minimal = r.margin > r.tolerance && F.cols() <= F.rows();
  return r;
}

std::optional<std::pair<Weights, PruneStep>> prune_step(const CglProblem& problem, const Weights& w) {
  IndexSet active = active_blocks(problem, w);
  if (active.empty()) return std::nullopt;
  // Any n+1 fits in R^n are dependent, so a larger active set is cut to its first n+1 blocks.
  if (static_cast<int>(active.size()) > problem.n() + 1) active.resize(problem.n() + 1);
  Mat F = active_fits(problem, w, active);
  if (numeric::sigma_min(F) > numeric::rank_tolerance(F) && F.cols() <= F.rows()) return std::nullopt;
  Vec beta = numeric::null_vector(F);
  Eigen::Index r = removal_index(beta);
  if (beta[r] < 0) beta = -beta;
  const double t = 1.0 / beta[r];
  Weights out = w;
  for (size_t k = 0; k < active.size(); ++k) {
    double factor = static_cast<Eigen::Index>(k) == r ? 0.0 : std::clamp(1.0 - t * beta[k], 0.0, 2.0);
    problem.partition.scatter(out, active[k], factor * problem.partition.gather(w, active[k]));
  }
  PruneStep step;
  step.removed_block = active[r];
  step.t = t;
  step.beta_norm = beta.norm();
  step.objective_before = objective(problem, w);
  step.objective_after = objective(problem, out);
  return std::make_pair(out, step);
}

std::pair<Weights, PruneTrace> optimal_prune(const CglProblem& problem, const Weights& w, double tol) {
  DualCertificate rho = recover_dual(problem, w, tol);
  (void)rho;
  PruneTrace trace;
  trace.initial_support = static_cast<int>(active_blocks(problem, w).size());
  Weights cur = w;
  for (int guard = 0; guard <= problem.num_blocks(); ++guard) {
    auto step = prune_step(problem, cur);
    if (!step) break;
    cur = step->first;
    trace.steps.push_back(step->second);
  }
  trace.final_support = static_cast<int>(active_blocks(problem, cur).size());
  return {cur, trace};
}

std::string to_string(ScoreMethod m) {
  switch (m) {
    case ScoreMethod::magnitude: return "magnitude";
    case ScoreMethod::gradient: return "gradient";
    case ScoreMethod::random: return "random";
    case ScoreMethod::ls_residual: return "ls_residual";
  }
  return "magnitude";
}

ScoreMethod parse_score_method(const std::string& s) {
  for (auto m : {ScoreMethod::magnitude, ScoreMethod::gradient, ScoreMethod::random, ScoreMethod::ls_residual})
    if (to_string(m) == s) return m;
  throw ParseError("unknown score method '" + s + "'");
}

Vec neuron_fit(const ReluNetwork& net, const Mat& Z, int i) {
  Vec pre = Z * net.W1.row(i).transpose();
  if (net.bias1) pre.array() += (*net.bias1)[i];
  if (net.gates) {
    Mask gate = activation_mask(Z, net.gates->row(i).transpose());
    for (Eigen::Index k = 0; k < pre.size(); ++k)
      if (!gate[k]) pre[k] = 0.0;
    return net.w2[i] * pre;
  }
  return net.w2[i] * pre.cwiseMax(0.0);
}

namespace {

bool neuron_alive(const ReluNetwork& net, int i) {
  return net.W1.row(i).norm() * std::abs(net.w2[i]) > 0.0;
}

double ls_residual(const Mat& Q, Eigen::Index j) {
  if (Q.cols() <= 1) return Q.col(j).norm();
  Mat others(Q.rows(), Q.cols() - 1);
  Eigen::Index c = 0;
  for (Eigen::Index k = 0; k < Q.cols(); ++k)
    if (k != j) others.col(c++) = Q.col(k);
  Vec beta = others.completeOrthogonalDecomposition().solve(Q.col(j));
  return (others * beta - Q.col(j)).norm();
}

double mse(const ReluNetwork& net, const Mat& Z, const Vec& y) {
  if (Z.rows() == 0) return 0.0;
  return (predict(net, Z) - y).squaredNorm() / static_cast<double>(Z.rows());
}

void scale_neuron(ReluNetwork& net, int i, double factor) {
  double s = std::sqrt(std::max(0.0, factor));
  net.W1.row(i) *= s;
  net.w2[i] *= s;
  if (net.bias1) (*net.bias1)[i] *= s;
}

}  // namespace

Vec score_neurons(const Mat& Z, const Vec& y, const ReluNetwork& net, ScoreMethod method, std::uint64_t seed) {
  const int m = net.width();
  if (m == 0) throw InputError("score_neurons: empty network");
  Vec s(m);
  switch (method) {
    case ScoreMethod::magnitude:
      for (int i = 0; i < m; ++i) s[i] = net.W1.row(i).norm() * std::abs(net.w2[i]);
      break;
    case ScoreMethod::gradient: {
      Vec r = predict(net, Z) - y;
      for (int i = 0; i < m; ++i) {
        Vec pre = Z * net.W1.row(i).transpose();
        if (net.bias1) pre.array() += (*net.bias1)[i];
        Vec act(pre.size()), gate(pre.size());
        Mask gm;
        if (net.gates) gm = activation_mask(Z, net.gates->row(i).transpose());
        for (Eigen::Index k = 0; k < pre.size(); ++k) {
          bool on = net.gates ? gm[k] != 0 : pre[k] > 0;
          gate[k] = on ? 1.0 : 0.0;
          act[k] = on ? pre[k] : 0.0;
        }
        Vec G1 = net.w2[i] * Z.transpose() * r.cwiseProduct(gate);
        double g2 = act.dot(r);
        s[i] = net.W1.row(i).transpose().cwiseProduct(G1).norm() * std::abs(net.w2[i] * g2);
      }
      break;
    }
    case ScoreMethod::random: {
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (int i = 0; i < m; ++i) s[i] = u(rng);
      break;
    }
    case ScoreMethod::ls_residual: {
      Mat Q(Z.rows(), m);
      for (int i = 0; i < m; ++i) Q.col(i) = neuron_fit(net, Z, i);
      for (int i = 0; i < m; ++i) s[i] = ls_residual(Q, i);
      break;
    }
  }
  return s;
}

ApproxPruneResult approximate_prune_relu(const Mat& Z, const Vec& y, const ReluNetwork& net, int target_width,
                                         ScoreMethod score, std::uint64_t seed, const Mat* Z_test,
                                         const Vec* y_test) {
  if (target_width < 0) throw InputError("approximate_prune_relu: negative target width");
  ApproxPruneResult res;
  res.net = net;
  ReluNetwork& cur = res.net;
  auto record = [&](int round, bool exact) {
    PruneCurveRow row;
    row.round = round;
    row.active_width = cur.active_width();
    row.train_mse = mse(cur, Z, y);
    row.test_mse = (Z_test && y_test) ? mse(cur, *Z_test, *y_test) : 0.0;
    row.exact = exact;
    row.method = to_string(score);
    res.curve.push_back(row);
  };
  if (target_width > cur.active_width())
    throw InputError("approximate_prune_relu: target width exceeds the active width");
  record(0, true);
  std::uint64_t round_seed = seed;
  for (int round = 1; cur.active_width() > target_width; ++round) {
    std::vector<int> alive;
    for (int i = 0; i < cur.width(); ++i)
      if (neuron_alive(cur, i)) alive.push_back(i);
    bool exact = false;
    if (score != ScoreMethod::ls_residual) {
      Vec s = score_neurons(Z, y, cur, score, round_seed++);
      int victim = alive[0];
      for (int i : alive)
        if (s[i] < s[victim]) victim = i;
      scale_neuron(cur, victim, 0.0);
      cur.W1.row(victim).setZero();
      cur.w2[victim] = 0.0;
      record(round, false);
      continue;
    }
    Mat Q(Z.rows(), alive.size());
    for (size_t k = 0; k < alive.size(); ++k) Q.col(k) = neuron_fit(cur, Z, alive[k]);
    Vec beta;
    Eigen::Index victim = -1;
    if (numeric::sigma_min(Q) <= numeric::rank_tolerance(Q) || Q.cols() > Q.rows()) {
      beta = numeric::null_vector(Q);
      exact = true;
    } else {
      Eigen::Index j = 0;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index k = 0; k < Q.cols(); ++k) {
        double r = ls_residual(Q, k);
        if (r < best) {
          best = r;
          j = k;
        }
      }
      victim = j;
      beta = Vec::Zero(Q.cols());
      beta[j] = -1.0;
      if (Q.cols() > 1) {
        Mat others(Q.rows(), Q.cols() - 1);
        Eigen::Index c = 0;
        for (Eigen::Index k = 0; k < Q.cols(); ++k)
          if (k != j) others.col(c++) = Q.col(k);
        Vec bt = others.completeOrthogonalDecomposition().solve(Q.col(j));
        c = 0;
        for (Eigen::Index k = 0; k < Q.cols(); ++k)
          if (k != j) beta[k] = bt[c++];
      }
    }
    // Least-squares rounds remove the chosen neuron with t = 1.
    Eigen::Index r = victim >= 0 ? victim : removal_index(beta);
    if (beta[r] < 0) beta = -beta;
    const double t = 1.0 / beta[r];
    for (size_t k = 0; k < alive.size(); ++k) {
      if (static_cast<Eigen::Index>(k) == r) {
        cur.W1.row(alive[k]).setZero();
        cur.w2[alive[k]] = 0.0;
        if (cur.bias1) (*cur.bias1)[alive[k]] = 0.0;
      } else {
        scale_neuron(cur, alive[k], 1.0 - t * beta[k]);
      }
    }
    record(round, exact);
  }
  return res;
}

void write_prune_csv(std::ostream& os, const std::vector<PruneCurveRow>& rows) {
  os << "round,active_width,train_mse,test_mse,method\n";
  os.precision(17);
  for (const auto& r : rows)
    os << r.round << ',' << r.active_width << ',' << r.train_mse << ',' << r.test_mse << ',' << r.method << '\n';
}

}  // namespace relu_optset
