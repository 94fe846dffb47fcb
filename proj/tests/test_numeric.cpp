#include "relu_optset/numeric.hpp"

#include "support.hpp"

#include <doctest.h>

using namespace relu_optset;
namespace nm = relu_optset::numeric;

TEST_CASE("rank helpers") {
  Mat M(3, 3);
  M << 1, 2, 3, 2, 4, 6, 0, 1, 1;
  CHECK(nm::numerical_rank(M) == 2);
  CHECK((M * nm::null_vector(M)).norm() < 1e-12);
  CHECK(nm::null_space(M).cols() == 1);
  CHECK(nm::sigma_min(Mat::Ones(2, 3)) == 0.0);
  Mat R = nm::row_space_basis(M);
  CHECK(R.rows() == 2);
  CHECK((R * R.transpose() - Mat::Identity(2, 2)).norm() < 1e-12);
}

TEST_CASE("power iteration estimates the squared spectral norm") {
  std::mt19937_64 rng(2);
  Mat X = testsupport::gaussian(rng, 7, 4);
  double s = nm::spectral_norm(X);
  CHECK(nm::power_iteration_sq_norm(X) == doctest::Approx(s * s).epsilon(1e-6));
}

TEST_CASE("nnls against the scalar case and random KKT checks") {
  Mat A = Mat::Constant(1, 1, -1.0);
  Vec b = Vec::Constant(1, -0.3);
  auto r = nm::nnls(A, b);
  CHECK(r.x[0] == doctest::Approx(0.3));
  CHECK(r.residual_norm < 1e-14);
  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    Mat G = testsupport::gaussian(rng, 6, 4);
    Vec h = testsupport::gaussian_vec(rng, 6);
    auto s = nm::nnls(G, h);
    Vec grad = G.transpose() * (G * s.x - h);
    for (int j = 0; j < 4; ++j) {
      CHECK(s.x[j] >= 0.0);
      CHECK(grad[j] >= -1e-10);
      CHECK(std::abs(s.x[j] * grad[j]) < 1e-10);
    }
  }
}

TEST_CASE("simplex on small LPs") {
  nm::LinearProgram lp;
  lp.c = Vec::Ones(2);
  lp.A = Mat::Ones(1, 2);
  lp.b = Vec::Constant(1, 1.5);
  lp.sense = {'='};
  lp.maximize = true;
  auto r = nm::solve_lp(lp);
  REQUIRE(r.status == nm::LpStatus::optimal);
  CHECK(r.value == doctest::Approx(1.5));

  lp.c << 1.0, 0.0;
  r = nm::solve_lp(lp);
  CHECK(r.x[0] == doctest::Approx(1.5));

  nm::LinearProgram inf;
  inf.c = Vec::Ones(1);
  inf.A = Mat::Ones(2, 1);
  inf.b = Vec(2);
  inf.b << 1.0, 2.0;
  inf.sense = {'<', '>'};
  CHECK(nm::solve_lp(inf).status == nm::LpStatus::infeasible);

  nm::LinearProgram unb;
  unb.c = Vec::Ones(1);
  unb.A = Mat::Ones(1, 1);
  unb.b = Vec::Ones(1);
  unb.sense = {'>'};
  unb.maximize = true;
  CHECK(nm::solve_lp(unb).status == nm::LpStatus::unbounded);
}

TEST_CASE("active-set QP matches the symmetric split") {
  Mat H = Mat::Identity(2, 2);
  Mat A = Mat::Ones(1, 2);
  Vec b = Vec::Constant(1, 1.5);
  Vec x0(2);
  x0 << 1.5, 0.0;
  auto r = nm::active_set_qp(H, Vec::Zero(2), A, b, x0);
  REQUIRE(r.converged);
  CHECK(r.x[0] == doctest::Approx(0.75));
  CHECK(r.x[1] == doctest::Approx(0.75));
  // A linear term pushing against x1 makes the bound active.
  Vec f(2);
  f << 0.0, 5.0;
  r = nm::active_set_qp(H, f, A, b, x0);
  CHECK(r.x[1] == doctest::Approx(0.0));
  CHECK(r.x[0] == doctest::Approx(1.5));
}
