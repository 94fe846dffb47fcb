#include "relu_optset/fixtures.hpp"

#include <random>

namespace relu_optset::fixtures {

CglProblem duplicate_instance(double lambda) {
  Mat X(2, 2);
  X << 1, 1, 1, 1;
  Vec y(2);
  y << 2, 2;
  return make_problem(X, y, BlockPartition::singletons(2), lambda);
}

CglProblem min_norm_interp(double lambda) {
  Mat X(2, 3);
  X << 1, 2, 0, 1, 0, 2;
  Vec y = Vec::Ones(2);
  return make_problem(X, y, BlockPartition({{0, 1}, {2}}), lambda);
}

Dataset one_neuron_dataset() {
  Dataset ds;
  ds.Z.resize(2, 1);
  ds.Z << -100.0, 1.0;
  ds.y.resize(2);
  ds.y << 1.0, 10.0;
  ds.feature_names = {"x"};
  ds.target_name = "y";
  return ds;
}

RandomInstance random_instance(std::uint64_t seed, Arch arch) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> nd(4, 20), dd(1, 5);
  std::uniform_real_distribution<double> frac(0.05, 0.5);
  RandomInstance inst;
  const int n = nd(rng);
  const int d = dd(rng);
  Dataset ds = gaussian_dataset(n, d, rng(), 0.1);
  inst.Z = ds.Z;
  inst.y = ds.y;
  inst.arch = arch;
  inst.patterns = enumerate_patterns(inst.Z, PatternMode::sampled(7, rng()));
  inst.problem = build_cgl(inst.Z, inst.y, inst.patterns, 1.0, arch);
  inst.problem.lambda = frac(rng) * lambda_max(inst.problem);
  if (inst.problem.lambda <= 0) inst.problem.lambda = 0.1;
  return inst;
}

TuningInstance degenerate_tuning_instance(std::uint64_t seed, double lambda) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  const int n_train = 8, n_eval = 40;
  auto draw = [&](int rows, int cols) {
    Mat M(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int k = 0; k < cols; ++k) M(i, k) = N(rng);
    return M;
  };
  // Blocks 0,1 and 2,3 share their training columns.
  Mat base = draw(n_train, 2);
  Mat X(n_train, 4);
  X << base.col(0), base.col(0), base.col(1), base.col(1);
  Vec y = 1.5 * base.col(0) - 1.0 * base.col(1);
  for (int i = 0; i < n_train; ++i) y[i] += 0.05 * N(rng);

  Vec teacher(4);
  teacher << 1.2, 0.3, -0.2, -0.8;
  TuningInstance t;
  t.problem = make_problem(X, y, BlockPartition::singletons(4), lambda);
  t.X_val = draw(n_eval, 4);
  t.X_test = draw(n_eval, 4);
  t.y_val = t.X_val * teacher;
  t.y_test = t.X_test * teacher;
  for (int i = 0; i < n_eval; ++i) {
    t.y_val[i] += 0.05 * N(rng);
    t.y_test[i] += 0.05 * N(rng);
  }
  return t;
}

}  // namespace relu_optset::fixtures
