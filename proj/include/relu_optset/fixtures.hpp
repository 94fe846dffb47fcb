#pragma once

#include "relu_optset/core.hpp"
#include "relu_optset/dataset.hpp"
#include "relu_optset/reformulation.hpp"

#include <cstdint>

namespace relu_optset::fixtures {

// X = [[1,1],[1,1]], y = (2,2), singleton blocks. Optimal set at lambda = 1 is the segment
// from (1.5, 0) to (0, 1.5).
CglProblem duplicate_instance(double lambda = 1.0);

// X = [[1,2,0],[1,0,2]], y = (1,1), blocks {0,1} and {2}.
CglProblem min_norm_interp(double lambda);

// Two points (-100, 1), (1, 10) fitted by a single gated neuron per sign.
Dataset one_neuron_dataset();

struct RandomInstance {
  Mat Z;
  Vec y;
  Arch arch = Arch::gated;
  PatternSet patterns;
  CglProblem problem;
};

// n in [4, 20], d in [1, 5], at most 8 sampled patterns, lambda a random fraction of lambda_max.
RandomInstance random_instance(std::uint64_t seed, Arch arch);

// Training design with duplicated blocks, so the optimal set is a non-trivial polytope, while the
// validation and test designs tell the duplicates apart.
struct TuningInstance {
  CglProblem problem;
  Mat X_val, X_test;
  Vec y_val, y_test;
};

TuningInstance degenerate_tuning_instance(std::uint64_t seed, double lambda = 0.5);

}  // namespace relu_optset::fixtures
