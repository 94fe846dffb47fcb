#include "relu_optset/errors.hpp"
#include "relu_optset/fixtures.hpp"
#include "relu_optset/optimal_set.hpp"
#include "relu_optset/pruning.hpp"
#include "relu_optset/solver.hpp"

#include "support.hpp"

#include <doctest.h>

#include <sstream>

using namespace relu_optset;

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

SolverOptions tight() {
  SolverOptions o;
  o.kkt_tol = 1e-10;
  return o;
}

// Blocks X_b = B Q_b with Q_b orthogonal: every block sees the same correlation norm, so all
// blocks are equicorrelated and their fits share one direction.
CglProblem group_dependent(std::uint64_t seed, int blocks) {
  std::mt19937_64 rng(seed);
  const int n = 6;
  Mat B = testsupport::gaussian(rng, n, 2);
  Mat X(n, 2 * blocks);
  for (int b = 0; b < blocks; ++b) {
    Eigen::HouseholderQR<Mat> qr(testsupport::gaussian(rng, 2, 2));
    Mat Q = qr.householderQ();
    X.middleCols(2 * b, 2) = B * Q;
  }
  CglProblem p = make_problem(X, testsupport::gaussian_vec(rng, n), BlockPartition::uniform(blocks, 2), 1.0);
  p.lambda = 0.3 * lambda_max(p);
  return p;
}

ReluNetwork random_net(std::mt19937_64& rng, int m, int d) {
  ReluNetwork net;
  net.W1 = testsupport::gaussian(rng, m, d);
  net.w2 = testsupport::gaussian_vec(rng, m);
  return net;
}

double train_change(const ReluNetwork& a, const ReluNetwork& b, const Mat& Z) {
  return (predict(a, Z) - predict(b, Z)).norm();
}

}  // namespace

TEST_CASE("prune_step on the duplicate instance") {
  CglProblem p = fixtures::duplicate_instance();
  auto step = prune_step(p, vec2(0.75, 0.75));
  REQUIRE(step.has_value());
  CHECK(step->first.isApprox(vec2(1.5, 0.0), 1e-12));
  CHECK(step->second.removed_block == 1);
  CHECK(step->second.objective_after == doctest::Approx(step->second.objective_before).epsilon(1e-12));
  CHECK_FALSE(prune_step(p, step->first).has_value());
}

TEST_CASE("is_minimal examples") {
  CglProblem p = fixtures::duplicate_instance();
  CHECK(is_minimal(p, Vec::Zero(2)).minimal);
  CHECK_FALSE(is_minimal(p, vec2(0.75, 0.75)).minimal);
  CHECK(is_minimal(p, vec2(1.5, 0.0)).minimal);
}

TEST_CASE("optimal_prune leaves a minimal solution unchanged") {
  std::mt19937_64 rng(3);
  CglProblem p = testsupport::random_group_lasso(rng, 12, 4, 2, 0.3);
  SolveResult r = solve(p, tight());
  REQUIRE(is_minimal(p, r.w).minimal);
  auto [w, trace] = optimal_prune(p, r.w);
  CHECK(w == r.w);
  CHECK(trace.steps.empty());
  CHECK(trace.final_support == trace.initial_support);
}

TEST_CASE("optimal_prune refuses a non-optimal point") {
  CglProblem p = fixtures::duplicate_instance();
  CHECK_THROWS_AS(optimal_prune(p, vec2(3.0, 0.0)), CertificateError);
}

TEST_CASE("optimal_prune keeps optimality on constrained instances") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    auto inst = fixtures::random_instance(seed, Arch::relu);
    SolveResult r = solve(inst.problem, tight());
    REQUIRE(r.converged);
    DualCertificate rho = recover_dual(inst.problem, r.w, 1e-6);
    double pen0 = penalty(inst.problem, r.w);
    Weights cur = r.w;
    while (auto step = prune_step(inst.problem, cur)) {
      cur = step->first;
      CHECK(kkt_report(inst.problem, cur, rho, 1e-6).satisfied);
      CHECK(penalty(inst.problem, cur) == doctest::Approx(pen0).epsilon(1e-8));
    }
    CHECK(is_minimal(inst.problem, cur).minimal);
    auto [w, trace] = optimal_prune(inst.problem, r.w);
    CHECK(is_minimal(inst.problem, w).minimal);
    CHECK(trace.final_support <= trace.initial_support);
  }
}

TEST_CASE("pruning factors lie in [0, 2]") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CglProblem p = group_dependent(seed, 5);
    SolveResult r = solve(p, tight());
    auto d = describe_set(p, r.w, r.rho);
    for (const auto& start : sample_solutions(d, 4, seed)) {
      Weights cur = start;
      while (auto step = prune_step(p, cur)) {
        for (int b = 0; b < p.num_blocks(); ++b) {
          Vec before = p.partition.gather(cur, b), after = p.partition.gather(step->first, b);
          if (before.norm() == 0.0) {
            CHECK(after.norm() == 0.0);
            continue;
          }
          double f = after.norm() / before.norm();
          CHECK(f >= 0.0);
          CHECK(f <= 2.0 + 1e-12);
          CHECK((after - f * before).norm() <= 1e-12 * (1.0 + before.norm()));
        }
        cur = step->first;
      }
    }
  }
}

TEST_CASE("group-dependent instances prune to supports of equal size") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CglProblem p = group_dependent(seed, 5);
    SolveResult r = solve(p, tight());
    REQUIRE(r.converged);
    auto d = describe_set(p, r.w, r.rho);
    std::vector<Weights> starts = sample_solutions(d, 6, seed);
    starts.push_back(r.w);
    std::set<int> sizes;
    for (const auto& s : starts) {
      auto [w, trace] = optimal_prune(p, s);
      CHECK(is_minimal(p, w).minimal);
      CHECK(objective(p, w) == doctest::Approx(objective(p, r.w)).epsilon(1e-8));
      Mat F(p.n(), 0);
      for (int b : active_blocks(p, w)) {
        F.conservativeResize(Eigen::NoChange, F.cols() + 1);
        F.col(F.cols() - 1) = p.partition.columns(p.X, b) * p.partition.gather(w, b);
      }
      CHECK(F.cols() == F.fullPivLu().rank());
      sizes.insert(trace.final_support);
    }
    CHECK(sizes.size() == 1);
  }
}

TEST_CASE("score_neurons examples") {
  std::mt19937_64 rng(9);
  Mat Z = testsupport::gaussian(rng, 8, 3);
  Vec y = testsupport::gaussian_vec(rng, 8);
  ReluNetwork net = random_net(rng, 4, 3);
  net.W1.row(1).setZero();
  net.w2[1] = 0.0;
  net.w2[2] = 0.0;
  Vec mag = score_neurons(Z, y, net, ScoreMethod::magnitude);
  CHECK(mag[1] == 0.0);
  CHECK((mag.array() >= 0).all());
  Vec grad = score_neurons(Z, y, net, ScoreMethod::gradient);
  CHECK(grad[2] == 0.0);
  CHECK((grad.array() >= 0).all());
  CHECK(score_neurons(Z, y, net, ScoreMethod::random, 4) == score_neurons(Z, y, net, ScoreMethod::random, 4));
  CHECK_THROWS_AS(parse_score_method("taylor"), ParseError);
  CHECK(parse_score_method("ls_residual") == ScoreMethod::ls_residual);
}

TEST_CASE("gradient score matches finite differences of the loss") {
  std::mt19937_64 rng(10);
  Mat Z = testsupport::gaussian(rng, 10, 2);
  Vec y = testsupport::gaussian_vec(rng, 10);
  ReluNetwork net = random_net(rng, 3, 2);
  Vec s = score_neurons(Z, y, net, ScoreMethod::gradient);
  auto loss = [&](const ReluNetwork& n) { return 0.5 * (predict(n, Z) - y).squaredNorm(); };
  const double h = 1e-6;
  for (int i = 0; i < 3; ++i) {
    Vec G1(2);
    for (int j = 0; j < 2; ++j) {
      ReluNetwork a = net, b = net;
      a.W1(i, j) += h;
      b.W1(i, j) -= h;
      G1[j] = (loss(a) - loss(b)) / (2 * h);
    }
    ReluNetwork a = net, b = net;
    a.w2[i] += h;
    b.w2[i] -= h;
    double g2 = (loss(a) - loss(b)) / (2 * h);
    double expected = net.W1.row(i).transpose().cwiseProduct(G1).norm() * std::abs(net.w2[i] * g2);
    CHECK(s[i] == doctest::Approx(expected).epsilon(1e-5));
  }
}

TEST_CASE("duplicate neuron is removed exactly") {
  std::mt19937_64 rng(11);
  Mat Z = testsupport::gaussian(rng, 10, 2);
  Vec y = testsupport::gaussian_vec(rng, 10);
  ReluNetwork net = random_net(rng, 3, 2);
  net.W1.row(2) = net.W1.row(0);
  net.w2[2] = net.w2[0];
  auto res = approximate_prune_relu(Z, y, net, 2, ScoreMethod::ls_residual);
  CHECK(res.net.active_width() == 2);
  CHECK(train_change(net, res.net, Z) <= 1e-8);
  REQUIRE(res.curve.size() == 2);
  CHECK(res.curve[1].exact);

  auto mag = approximate_prune_relu(Z, y, net, 2, ScoreMethod::magnitude);
  CHECK(res.curve[1].train_mse <= mag.curve[1].train_mse + 1e-12);
}

TEST_CASE("least-squares round changes the fit by the victim's residual") {
  int checked = 0;
  for (std::uint64_t seed = 1; seed <= 20 && checked < 5; ++seed) {
    std::mt19937_64 rng(seed);
    Mat Z = testsupport::gaussian(rng, 12, 3);
    Vec y = testsupport::gaussian_vec(rng, 12);
    ReluNetwork net = random_net(rng, 3, 3);
    Mat Q(12, 3);
    for (int i = 0; i < 3; ++i) Q.col(i) = neuron_fit(net, Z, i);
    // Normal-equation oracle for each neuron's residual against the others.
    double best = 1e300;
    Vec best_beta;
    for (int j = 0; j < 3; ++j) {
      Mat A(12, 2);
      int c = 0;
      for (int k = 0; k < 3; ++k)
        if (k != j) A.col(c++) = Q.col(k);
      Vec beta = (A.transpose() * A).ldlt().solve(A.transpose() * Q.col(j));
      double res = (A * beta - Q.col(j)).norm();
      if (res < best) best = res, best_beta = beta;
    }
    if ((best_beta.array() < -1.0).any()) continue;
    auto out = approximate_prune_relu(Z, y, net, 2, ScoreMethod::ls_residual);
    CHECK_FALSE(out.curve[1].exact);
    CHECK(train_change(net, out.net, Z) == doctest::Approx(best).epsilon(1e-8));
    ++checked;
  }
  CHECK(checked >= 3);
}

TEST_CASE("pruning to width zero gives the zero network") {
  std::mt19937_64 rng(13);
  Mat Z = testsupport::gaussian(rng, 8, 2);
  Vec y = testsupport::gaussian_vec(rng, 8);
  ReluNetwork net = random_net(rng, 4, 2);
  for (auto m : {ScoreMethod::magnitude, ScoreMethod::gradient, ScoreMethod::random, ScoreMethod::ls_residual}) {
    auto res = approximate_prune_relu(Z, y, net, 0, m, 1);
    CHECK(predict(res.net, Z).isZero(0.0));
    CHECK(res.curve.back().active_width == 0);
    CHECK(res.curve.size() == 5);
  }
  CHECK_THROWS_AS(approximate_prune_relu(Z, y, net, 5, ScoreMethod::magnitude), InputError);
}

TEST_CASE("prune csv header") {
  std::ostringstream os;
  write_prune_csv(os, {});
  CHECK(os.str() == "round,active_width,train_mse,test_mse,method\n");
}
