#include "relu_optset/core.hpp"
#include "relu_optset/errors.hpp"
#include "relu_optset/fixtures.hpp"
#include "relu_optset/solver.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace relu_optset;

TEST_CASE("partition rejects overlap, gaps and empty blocks") {
  CHECK_THROWS_AS(BlockPartition({{0, 1}, {1, 2}}), ShapeError);
  CHECK_THROWS_AS(BlockPartition({{0}, {2}}), ShapeError);
  CHECK_THROWS_AS(BlockPartition({{0}, {}}), ShapeError);
  BlockPartition p({{2, 0}, {1}});
  CHECK(p.dim() == 3);
  CHECK(p.num_blocks() == 2);
  CHECK(BlockPartition::contiguous({2, 1, 3}).block(2) == std::vector<int>{3, 4, 5});
}

TEST_CASE("problem validation") {
  Mat X = Mat::Ones(2, 3);
  Vec y = Vec::Ones(2);
  CHECK_THROWS_AS(make_problem(X, y, BlockPartition::singletons(2), 1.0), ShapeError);
  CHECK_THROWS_AS(make_problem(X, Vec::Ones(3), BlockPartition::singletons(3), 1.0), ShapeError);
  CHECK_THROWS_AS(make_problem(X, y, BlockPartition::singletons(3), -1.0), InputError);
  std::vector<std::optional<Mat>> K(2);
  K[0] = Mat::Ones(1, 4);  // block 0 has width 2
  CHECK_THROWS_AS(make_problem(X, y, BlockPartition({{0, 1}, {2}}), 1.0, K), ShapeError);
  Mat Xn = X;
  Xn(0, 0) = std::nan("");
  CHECK_THROWS_AS(make_problem(Xn, y, BlockPartition::singletons(3), 1.0), InputError);
}

TEST_CASE("objective examples") {
  SUBCASE("zero weights give half the squared target norm") {
    CglProblem p = make_problem(Mat::Ones(2, 2), Vec::Ones(2), BlockPartition::singletons(2), 3.0);
    CHECK(objective(p, Vec::Zero(2)) == doctest::Approx(1.0));
  }
  SUBCASE("row-space interpolant of the min-norm fixture") {
    CglProblem p = fixtures::min_norm_interp(1.0);
    Vec w = Vec::Constant(3, 1.0 / 3.0);
    CHECK(std::abs(objective(p, w) - (1.0 + std::sqrt(2.0)) / 3.0) < 1e-12);
  }
  SUBCASE("matches a straight-line evaluator") {
    std::mt19937_64 rng(11);
    CglProblem p = make_problem(testsupport::gaussian(rng, 8, 5), testsupport::gaussian_vec(rng, 8),
                                BlockPartition::contiguous({2, 1, 2}), 0.7);
    for (int t = 0; t < 20; ++t) {
      Vec w = testsupport::gaussian_vec(rng, 5);
      CHECK(std::abs(objective(p, w) - testsupport::objective_oracle(p, w)) <= 1e-12 * (1 + objective(p, w)));
    }
  }
}

TEST_CASE("kkt_report examples") {
  SUBCASE("least squares at lambda = 0") {
    std::mt19937_64 rng(5);
    Mat X = testsupport::gaussian(rng, 6, 3);
    Vec y = testsupport::gaussian_vec(rng, 6);
    CglProblem p = make_problem(X, y, BlockPartition::contiguous({2, 1}), 0.0);
    Vec w = X.colPivHouseholderQr().solve(y);
    KktReport r = kkt_report(p, w, DualCertificate::zeros(p), 1e-8);
    CHECK(r.stationarity_violation < 1e-10);
    CHECK(r.feasibility_violation == 0.0);
    CHECK(r.slackness_violation == 0.0);
    CHECK(r.satisfied);
  }
  SUBCASE("duplicate columns at the symmetric point") {
    CglProblem p = fixtures::duplicate_instance(1.0);
    Vec w(2);
    w << 0.75, 0.75;
    KktReport r = kkt_report(p, w, DualCertificate::zeros(p));
    CHECK(r.satisfied);
    CHECK(r.equicorrelation == IndexSet{0, 1});
    CHECK(r.active == IndexSet{0, 1});
  }
  SUBCASE("a non-optimal point fails") {
    CglProblem p = fixtures::duplicate_instance(1.0);
    Vec w(2);
    w << 1.0, 0.0;
    CHECK_FALSE(kkt_report(p, w, DualCertificate::zeros(p)).satisfied);
  }
  SUBCASE("negative multipliers are reported as feasibility violations") {
    Mat X(1, 1);
    X << 1.0;
    Vec y(1);
    y << -1.0;
    std::vector<std::optional<Mat>> K(1);
    K[0] = Mat::Constant(1, 1, -1.0);
    CglProblem p = make_problem(X, y, BlockPartition::singletons(1), 0.5, K);
    DualCertificate rho = DualCertificate::zeros(p);
    rho.rho[0][0] = -0.2;
    CHECK_FALSE(rho.nonnegative());
    CHECK_FALSE(kkt_report(p, Vec::Zero(1), rho).satisfied);
    rho.rho[0][0] = 0.5;
    CHECK(kkt_report(p, Vec::Zero(1), rho).satisfied);
  }
}

TEST_CASE("support_set examples") {
  CglProblem p = fixtures::duplicate_instance(1.0);
  Vec a(2), b(2);
  a << 1.5, 0.0;
  b << 0.0, 1.5;
  CHECK(support_set(p, {a}) == IndexSet{0});
  CHECK(support_set(p, {a, b}) == IndexSet{0, 1});
  CHECK(support_set(p, {Vec::Zero(2)}).empty());
  CHECK_THROWS_AS(support_set(p, {Vec::Zero(3)}), ShapeError);
}

TEST_CASE("block views roundtrip") {
  std::mt19937_64 rng(3);
  BlockPartition part({{3, 0}, {4, 1, 5}, {2}});
  for (int t = 0; t < 10; ++t) {
    Vec w = testsupport::gaussian_vec(rng, 6);
    Vec back = Vec::Constant(6, 99.0);
    for (int b = 0; b < part.num_blocks(); ++b) part.scatter(back, b, part.gather(w, b));
    CHECK(back == w);
  }
}

TEST_CASE("invariants over verified solutions of random group lasso instances") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    CAPTURE(seed);
    std::mt19937_64 rng(seed);
    // Fewer rows than columns, so solutions need not be unique.
    CglProblem p = testsupport::random_group_lasso(rng, 5, 5, 2, 0.3);
    SolverOptions a, b;
    a.kkt_tol = b.kkt_tol = 1e-10;
    b.random_init = true;
    b.seed = seed + 100;
    SolveResult ra = solve(p, a), rb = solve(p, b);
    REQUIRE(ra.converged);
    REQUIRE(rb.converged);
    CHECK((p.X * ra.w - p.X * rb.w).norm() <= 1e-6 * (1 + p.y.norm()));
    CHECK(std::abs(penalty(p, ra.w) - penalty(p, rb.w)) <= 1e-6);
    for (const auto* r : {&ra, &rb}) {
      const auto& E = r->report.equicorrelation;
      for (int i : r->report.active) CHECK(std::binary_search(E.begin(), E.end(), i));
    }
    // Bounded by the group norm of the minimum-norm least-squares solution.
    Vec wbar = p.X.completeOrthogonalDecomposition().solve(p.y);
    CHECK(penalty(p, ra.w) <= penalty(p, wbar) + 1e-9);
  }
}

TEST_CASE("lambda_max shuts the solution down") {
  std::mt19937_64 rng(8);
  CglProblem p = testsupport::random_group_lasso(rng, 6, 3, 2, 1.0);
  CHECK(solve(p).w.isZero(0.0));
  p.lambda *= 0.9;
  CHECK_FALSE(solve(p).w.isZero(0.0));
}
