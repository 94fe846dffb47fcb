#pragma once

#include "relu_optset/core.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace relu_optset {

enum class Arch { relu, gated };
std::string to_string(Arch a);
Arch parse_arch(const std::string& s);

using Mask = std::vector<std::uint8_t>;
std::string mask_to_string(const Mask& m);
Mask mask_from_string(const std::string& s);

// 1(Zu >= 0) with a relative tie tolerance of 1e-12 for rows orthogonal to u.
Mask activation_mask(const Mat& Z, const Vec& u);

struct PatternMode {
  enum class Kind { exhaustive, sampled } kind = Kind::exhaustive;
  int count = 0;
  std::uint64_t seed = 0;

  static PatternMode exhaustive() { return {}; }
  static PatternMode sampled(int count, std::uint64_t seed) { return {Kind::sampled, count, seed}; }
};

struct PatternSet {
  std::vector<Mask> masks;
  std::vector<Vec> witnesses;      // activation_mask(Z, witnesses[i]) == masks[i]
  std::vector<bool> open_cell;     // some u has every row strictly signed
  PatternMode provenance;
  int rank_of_Z = 0;
  int n = 0;
  int d = 0;

  int size() const { return static_cast<int>(masks.size()); }
  int open_cell_count() const;
  // 2 sum_{k<r} C(n-1, k): the region count of a central arrangement in general position.
  double growth_bound() const;
  Vec diag(int i) const;
};

PatternSet enumerate_patterns(const Mat& Z, const PatternMode& mode = PatternMode::exhaustive());

// Mask realizability: maximize t s.t. Z_i u >= 0 on rows in the mask, Z_i u <= -t elsewhere,
// |u|_inf <= 1, t <= 1. Returns the witness u when t exceeds 1e-9 (or no rows are off).
std::optional<Vec> realize_mask(const Mat& Z, const Mask& mask);
bool is_open_cell(const Mat& Z, const Mask& mask);

// gated: p unconstrained blocks with design D_i Z.
// relu: 2p blocks; block i has design D_i Z, block p+i has design -D_i Z;
// both share K = -Z^T (2 D_i - I).
CglProblem build_cgl(const Mat& Z, const Vec& y, const PatternSet& patterns, double lambda, Arch arch);
Mat cone_matrix(const Mat& Z, const Mask& mask);

// nnz(D_i) >= p d for every pattern: the sample-size premise for almost-sure p-uniqueness.
bool nnz_premise(const PatternSet& patterns);

// Block design of build_cgl on new inputs, with each pattern's witness acting as its gate.
Mat design_on(const Mat& Z_new, const PatternSet& patterns, Arch arch);

struct ReluNetwork {
  Mat W1;                       // m x d, rows are neurons
  Vec w2;                       // m
  std::optional<Mat> gates;     // m x d (gated networks)
  std::optional<Vec> bias1;     // m (1-D reduction networks)
  std::optional<double> bias2;

  int width() const { return static_cast<int>(W1.rows()); }
  int active_width(double tol = 0.0) const;
};

Vec predict(const ReluNetwork& net, const Mat& Z);
// 1/2 |f(Z) - y|^2 + (lambda/2)(|W1|_F^2 + |w2|^2); biases and gates unpenalized.
double relu_objective(const ReluNetwork& net, const Mat& Z, const Vec& y, double lambda);

struct ConvexWeights {
  std::vector<Vec> v;  // positive copies, one per pattern
  std::vector<Vec> u;  // negative copies (empty for gated)
};

ConvexWeights split_weights(const CglProblem& problem, const Weights& w, Arch arch);
Weights join_weights(const ConvexWeights& cw, Arch arch);

ReluNetwork convex_to_relu(const std::vector<Vec>& v, const std::vector<Vec>& u);
// Gated image: gate_i is the pattern's witness, W1_i = v_i/sqrt|v_i|, w2_i = sqrt|v_i|.
ReluNetwork convex_to_gated(const std::vector<Vec>& v, const PatternSet& patterns);
ConvexWeights relu_to_convex(const ReluNetwork& net, const Mat& Z, const PatternSet& patterns,
                             double tol = 1e-10);

// Sort neurons by (assigned pattern, sign) and merge collinear same-sign neurons.
ReluNetwork canonical_network(const ReluNetwork& net, const Mat& Z, const PatternSet& patterns);

struct OneDLasso {
  Vec Z;          // sorted breakpoints
  Vec y;
  Mat A;          // n x 2(n-1)
  Vec a_mean;     // column means of A
  double y_mean = 0.0;
  CglProblem problem;  // centred design, singleton blocks: the intercept is profiled out

  double intercept(const Vec& v) const { return y_mean - a_mean.dot(v); }
  // 1/2 |Av + b 1 - y|^2 + lambda |v|_1
  double objective(const Vec& v, double b) const;
};

OneDLasso one_d_lasso_build(const Vec& Z, const Vec& y, double lambda = 0.0);
Mat one_d_lasso_design(const Vec& Z);
ReluNetwork one_d_lasso_to_network(const Vec& v, double b, const Vec& Z);

}  // namespace relu_optset
