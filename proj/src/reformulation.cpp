#include "relu_optset/reformulation.hpp"

#include "relu_optset/errors.hpp"
#include "relu_optset/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

namespace relu_optset {

std::string to_string(Arch a) { return a == Arch::relu ? "relu" : "gated"; }

Arch parse_arch(const std::string& s) {
  if (s == "relu") return Arch::relu;
  if (s == "gated") return Arch::gated;
  throw ParseError("unknown architecture '" + s + "'");
}

std::string mask_to_string(const Mask& m) {
  std::string s(m.size(), '0');
  for (size_t i = 0; i < m.size(); ++i)
    if (m[i]) s[i] = '1';
  return s;
}

Mask mask_from_string(const std::string& s) {
  Mask m(s.size());
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '0' && s[i] != '1') throw ParseError("mask bitstring may only contain 0 and 1");
    m[i] = s[i] == '1';
  }
  return m;
}

Mask activation_mask(const Mat& Z, const Vec& u) {
  Mask m(Z.rows());
  const double un = u.norm();
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    double s = Z.row(i).dot(u);
    m[i] = s >= -1e-12 * Z.row(i).norm() * un;
  }
  return m;
}

int PatternSet::open_cell_count() const {
  return static_cast<int>(std::count(open_cell.begin(), open_cell.end(), true));
}

double PatternSet::growth_bound() const {
  if (rank_of_Z == 0) return 1.0;
  double total = 0.0;
  for (int k = 0; k < rank_of_Z; ++k) {
    double c = 1.0;  // C(n-1, k)
    for (int j = 1; j <= k; ++j) c = c * (n - 1 - k + j) / j;
    if (k > n - 1) c = 0.0;
    total += c;
  }
  return 2.0 * total;
}

Vec PatternSet::diag(int i) const {
  Vec v(n);
  for (int k = 0; k < n; ++k) v[k] = masks[i][k];
  return v;
}

namespace {

// Rows of Z normalized; zero rows flagged.
struct NormalizedRows {
  Mat z;
  std::vector<bool> zero;
};

NormalizedRows normalize_rows(const Mat& Z) {
  NormalizedRows r{Z, std::vector<bool>(Z.rows(), false)};
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    double nz = Z.row(i).norm();
    if (nz == 0.0) r.zero[i] = true;
    else r.z.row(i) /= nz;
  }
  return r;
}

// Maximize t subject to sign constraints on the first `rows` rows.
// strict_on: also require z_i u >= t on rows in the mask.
std::optional<std::pair<Vec, double>> margin_lp(const NormalizedRows& nr, const Mask& mask,
                                                 Eigen::Index rows, bool strict_on) {
  const Eigen::Index d = nr.z.cols();
  std::vector<Eigen::Index> use;
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (nr.zero[i]) {
      if (!mask[i] || strict_on) return std::nullopt;
      continue;
    }
    use.push_back(i);
  }
  const Eigen::Index m = static_cast<Eigen::Index>(use.size()) + 2 * d + 1;
  numeric::LinearProgram lp;
  lp.c = Vec::Zero(d + 1);
  lp.c[d] = 1.0;
  lp.maximize = true;
  lp.A = Mat::Zero(m, d + 1);
  lp.b = Vec::Zero(m);
  lp.sense.assign(m, '<');
  lp.free_var.assign(d + 1, true);
  lp.free_var[d] = false;
  Eigen::Index r = 0;
  for (Eigen::Index i : use) {
    if (mask[i]) {
      lp.A.row(r).head(d) = -nr.z.row(i);
      if (strict_on) lp.A(r, d) = 1.0;
    } else {
      lp.A.row(r).head(d) = nr.z.row(i);
      lp.A(r, d) = 1.0;
    }
    ++r;
  }
  for (Eigen::Index j = 0; j < d; ++j) {
    lp.A(r, j) = 1.0;
    lp.b[r++] = 1.0;
    lp.A(r, j) = -1.0;
    lp.b[r++] = 1.0;
  }
  lp.A(r, d) = 1.0;
  lp.b[r] = 1.0;
  auto res = numeric::solve_lp(lp);
  if (res.status != numeric::LpStatus::optimal) return std::nullopt;
  return std::make_pair(Vec(res.x.head(d)), res.x[d]);
}

bool prefix_matches(const Mat& Z, const Vec& u, const Mask& mask, Eigen::Index rows) {
  Mask m = activation_mask(Z.topRows(rows), u);
  return std::equal(m.begin(), m.end(), mask.begin());
}

}  // namespace

std::optional<Vec> realize_mask(const Mat& Z, const Mask& mask) {
  if (static_cast<Eigen::Index>(mask.size()) != Z.rows()) throw ShapeError("mask length differs from n");
  bool any_off = std::any_of(mask.begin(), mask.end(), [](auto b) { return !b; });
  if (!any_off) return Vec::Zero(Z.cols());
  auto nr = normalize_rows(Z);
  auto res = margin_lp(nr, mask, Z.rows(), false);
  if (!res || res->second <= 1e-9) return std::nullopt;
  if (activation_mask(Z, res->first) != mask) return std::nullopt;
  return res->first;
}

bool is_open_cell(const Mat& Z, const Mask& mask) {
  auto nr = normalize_rows(Z);
  auto res = margin_lp(nr, mask, Z.rows(), true);
  return res && res->second > 1e-9;
}

namespace {

void sweep_low_rank(const Mat& Z, const Mat& V, std::map<std::string, Vec>& out) {
  // V: d x r orthonormal basis of the row space, r <= 2.
  const Eigen::Index r = V.cols();
  auto add = [&](const Vec& ur) {
    Vec u = V * ur;
    Mask m = activation_mask(Z, u);
    out.emplace(mask_to_string(m), u);
  };
  add(Vec::Zero(r));
  if (r == 0) return;
  if (r == 1) {
    add(Vec::Constant(1, 1.0));
    add(Vec::Constant(1, -1.0));
    return;
  }
  Mat Zr = Z * V;
  std::vector<std::pair<double, Vec>> crit;
  for (Eigen::Index i = 0; i < Zr.rows(); ++i) {
    Vec z = Zr.row(i).transpose();
    if (z.norm() <= 1e-14 * (1.0 + Zr.norm())) continue;
    Vec p(2);
    p << -z[1], z[0];
    crit.emplace_back(std::atan2(p[1], p[0]), p);
    crit.emplace_back(std::atan2(-p[1], -p[0]), Vec(-p));
  }
  if (crit.empty()) return;
  std::sort(crit.begin(), crit.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (size_t k = 0; k < crit.size(); ++k) {
    add(crit[k].second / crit[k].second.norm());
    double a0 = crit[k].first;
    double a1 = k + 1 < crit.size() ? crit[k + 1].first : crit[0].first + 2.0 * std::numbers::pi;
    if (a1 - a0 <= 0.0) continue;
    double mid = 0.5 * (a0 + a1);
    Vec u(2);
    u << std::cos(mid), std::sin(mid);
    add(u);
  }
}

void incremental(const Mat& Z, std::map<std::string, Vec>& out) {
  const Eigen::Index n = Z.rows();
  auto nr = normalize_rows(Z);
  std::vector<std::pair<Mask, Vec>> cur{{Mask(n, 1), Vec::Zero(Z.cols())}};
  for (Eigen::Index k = 0; k < n; ++k) {
    std::vector<std::pair<Mask, Vec>> next;
    for (auto& [mask, u] : cur) {
      Mask m = mask;
      std::uint8_t own = activation_mask(Z.row(k), u)[0];
      m[k] = own;
      next.emplace_back(m, u);
      m[k] = !own;
      if (nr.zero[k] && !m[k]) continue;
      auto res = margin_lp(nr, m, k + 1, false);
      bool any_off = std::any_of(m.begin(), m.begin() + k + 1, [](auto b) { return !b; });
      if (!res || (any_off && res->second <= 1e-9)) continue;
      if (!prefix_matches(Z, res->first, m, k + 1)) continue;
      next.emplace_back(m, res->first);
    }
    cur = std::move(next);
  }
  for (auto& [mask, u] : cur) out.emplace(mask_to_string(mask), u);
}

}  // namespace

PatternSet enumerate_patterns(const Mat& Z, const PatternMode& mode) {
  if (!Z.allFinite()) throw InputError("enumerate_patterns: NaN or Inf in Z");
  PatternSet ps;
  ps.n = static_cast<int>(Z.rows());
  ps.d = static_cast<int>(Z.cols());
  ps.provenance = mode;
  ps.rank_of_Z = numeric::numerical_rank(Z);
  std::map<std::string, Vec> found;
  if (mode.kind == PatternMode::Kind::exhaustive) {
    if (!(Z.rows() <= 20 || Z.cols() <= 3))
      throw CapabilityError("exhaustive pattern enumeration requires n <= 20 or d <= 3 (got n = " +
                            std::to_string(Z.rows()) + ", d = " + std::to_string(Z.cols()) + ")");
    if (ps.rank_of_Z <= 2) {
      Mat V = numeric::row_space_basis(Z).transpose();
      sweep_low_rank(Z, V, found);
    } else {
      incremental(Z, found);
    }
  } else {
    if (mode.count < 0) throw InputError("enumerate_patterns: negative sample count");
    found.emplace(mask_to_string(Mask(Z.rows(), 1)), Vec::Zero(Z.cols()));
    std::mt19937_64 rng(mode.seed);
    std::normal_distribution<double> g;
    for (int c = 0; c < mode.count; ++c) {
      Vec u(Z.cols());
      for (Eigen::Index j = 0; j < u.size(); ++j) u[j] = g(rng);
      found.emplace(mask_to_string(activation_mask(Z, u)), u);
    }
  }
  for (auto& [s, u] : found) {
    Mask m = mask_from_string(s);
    ps.open_cell.push_back(is_open_cell(Z, m));
    ps.masks.push_back(std::move(m));
    ps.witnesses.push_back(u);
  }
  return ps;
}

Mat cone_matrix(const Mat& Z, const Mask& mask) {
  Mat K(Z.cols(), Z.rows());
  for (Eigen::Index i = 0; i < Z.rows(); ++i)
    K.col(i) = -(mask[i] ? 1.0 : -1.0) * Z.row(i).transpose();
  return K;
}

CglProblem build_cgl(const Mat& Z, const Vec& y, const PatternSet& patterns, double lambda, Arch arch) {
  if (patterns.masks.empty()) throw InputError("build_cgl: empty pattern set");
  if (Z.rows() != y.size()) throw ShapeError("build_cgl: Z and y row counts differ");
  if (patterns.n != Z.rows()) throw ShapeError("build_cgl: patterns were built for a different n");
  const int p = patterns.size();
  const int d = static_cast<int>(Z.cols());
  const int nb = arch == Arch::relu ? 2 * p : p;
  Mat X(Z.rows(), static_cast<Eigen::Index>(nb) * d);
  std::vector<std::optional<Mat>> K(nb);
  for (int i = 0; i < p; ++i) {
    Mat DZ = patterns.diag(i).asDiagonal() * Z;
    X.middleCols(static_cast<Eigen::Index>(i) * d, d) = DZ;
    if (arch == Arch::relu) {
      X.middleCols(static_cast<Eigen::Index>(p + i) * d, d) = -DZ;
      Mat Kc = cone_matrix(Z, patterns.masks[i]);
      K[i] = Kc;
      K[p + i] = Kc;
    }
  }
  return make_problem(std::move(X), y, BlockPartition::uniform(nb, d), lambda, std::move(K));
}

bool nnz_premise(const PatternSet& patterns) {
  const long need = static_cast<long>(patterns.size()) * patterns.d;
  for (const auto& m : patterns.masks)
    if (std::count(m.begin(), m.end(), 1) < need) return false;
  return true;
}

Mat design_on(const Mat& Z_new, const PatternSet& patterns, Arch arch) {
  if (Z_new.cols() != patterns.d) throw ShapeError("design_on: feature dimension mismatch");
  const int p = patterns.size();
  const int d = patterns.d;
  const int nb = arch == Arch::relu ? 2 * p : p;
  Mat X(Z_new.rows(), static_cast<Eigen::Index>(nb) * d);
  for (int i = 0; i < p; ++i) {
    Mask m = activation_mask(Z_new, patterns.witnesses[i]);
    Vec gate(m.size());
    for (size_t k = 0; k < m.size(); ++k) gate[k] = m[k];
    Mat DZ = gate.asDiagonal() * Z_new;
    X.middleCols(static_cast<Eigen::Index>(i) * d, d) = DZ;
    if (arch == Arch::relu) X.middleCols(static_cast<Eigen::Index>(p + i) * d, d) = -DZ;
  }
  return X;
}

int ReluNetwork::active_width(double tol) const {
  int c = 0;
  for (int i = 0; i < width(); ++i)
    if (W1.row(i).norm() * std::abs(w2[i]) > tol) ++c;
  return c;
}

Vec predict(const ReluNetwork& net, const Mat& Z) {
  if (net.width() > 0 && net.W1.cols() != Z.cols()) throw ShapeError("predict: feature dimension mismatch");
  if (net.w2.size() != net.width()) throw ShapeError("predict: w2 length differs from width");
  Vec out = Vec::Zero(Z.rows());
  for (int i = 0; i < net.width(); ++i) {
    Vec pre = Z * net.W1.row(i).transpose();
    if (net.bias1) pre.array() += (*net.bias1)[i];
    if (net.gates) {
      Mask gate = activation_mask(Z, net.gates->row(i).transpose());
      for (Eigen::Index k = 0; k < pre.size(); ++k)
        if (!gate[k]) pre[k] = 0.0;
      out += net.w2[i] * pre;
    } else {
      out += net.w2[i] * pre.cwiseMax(0.0);
    }
  }
  if (net.bias2) out.array() += *net.bias2;
  return out;
}

double relu_objective(const ReluNetwork& net, const Mat& Z, const Vec& y, double lambda) {
  return 0.5 * (predict(net, Z) - y).squaredNorm() +
         0.5 * lambda * (net.W1.squaredNorm() + net.w2.squaredNorm());
}

ConvexWeights split_weights(const CglProblem& problem, const Weights& w, Arch arch) {
  ConvexWeights cw;
  const int nb = problem.num_blocks();
  const int p = arch == Arch::relu ? nb / 2 : nb;
  for (int i = 0; i < p; ++i) cw.v.push_back(problem.partition.gather(w, i));
  if (arch == Arch::relu)
    for (int i = 0; i < p; ++i) cw.u.push_back(problem.partition.gather(w, p + i));
  return cw;
}

Weights join_weights(const ConvexWeights& cw, Arch arch) {
  Eigen::Index total = 0;
  for (const auto& b : cw.v) total += b.size();
  if (arch == Arch::relu)
    for (const auto& b : cw.u) total += b.size();
  Weights w(total);
  Eigen::Index off = 0;
  for (const auto& b : cw.v) {
    w.segment(off, b.size()) = b;
    off += b.size();
  }
  if (arch == Arch::relu)
    for (const auto& b : cw.u) {
      w.segment(off, b.size()) = b;
      off += b.size();
    }
  return w;
}

namespace {

void set_neuron(ReluNetwork& net, int row, const Vec& weight, double sign) {
  double nv = weight.norm();
  if (nv == 0.0) {
    net.W1.row(row).setZero();
    net.w2[row] = 0.0;
    return;
  }
  double s = std::sqrt(nv);
  net.W1.row(row) = weight.transpose() / s;
  net.w2[row] = sign * s;
}

}  // namespace

ReluNetwork convex_to_relu(const std::vector<Vec>& v, const std::vector<Vec>& u) {
  ReluNetwork net;
  Eigen::Index d = !v.empty() ? v[0].size() : (!u.empty() ? u[0].size() : 0);
  const int m = static_cast<int>(v.size() + u.size());
  net.W1 = Mat::Zero(m, d);
  net.w2 = Vec::Zero(m);
  int row = 0;
  for (const auto& b : v) {
    if (b.size() != d) throw ShapeError("convex_to_relu: blocks must share width d");
    set_neuron(net, row++, b, 1.0);
  }
  for (const auto& b : u) {
    if (b.size() != d) throw ShapeError("convex_to_relu: blocks must share width d");
    set_neuron(net, row++, b, -1.0);
  }
  return net;
}

ReluNetwork convex_to_gated(const std::vector<Vec>& v, const PatternSet& patterns) {
  if (static_cast<int>(v.size()) != patterns.size())
    throw ShapeError("convex_to_gated: one block per pattern expected");
  ReluNetwork net = convex_to_relu(v, {});
  Mat gates(v.size(), patterns.d);
  for (int i = 0; i < patterns.size(); ++i) gates.row(i) = patterns.witnesses[i].transpose();
  net.gates = gates;
  return net;
}

namespace {

int sparsest_pattern(const Vec& w1, const Mat& Z, const PatternSet& patterns, double tol) {
  Vec s = Z * w1;
  int best = -1;
  long best_nnz = 0;
  for (int j = 0; j < patterns.size(); ++j) {
    const Mask& m = patterns.masks[j];
    bool ok = true;
    for (Eigen::Index k = 0; k < Z.rows() && ok; ++k) {
      double slack = tol * (1.0 + Z.row(k).norm() * w1.norm());
      ok = m[k] ? s[k] >= -slack : s[k] <= slack;
    }
    if (!ok) continue;
    long nnz = std::count(m.begin(), m.end(), 1);
    if (best < 0 || nnz < best_nnz) {
      best = j;
      best_nnz = nnz;
    }
  }
  return best;
}

}  // namespace

ConvexWeights relu_to_convex(const ReluNetwork& net, const Mat& Z, const PatternSet& patterns,
                             double tol) {
  if (net.gates) throw InputError("relu_to_convex: gated networks are not supported");
  if (net.bias1 || net.bias2) throw InputError("relu_to_convex: biased networks are not supported");
  ConvexWeights cw;
  cw.v.assign(patterns.size(), Vec::Zero(Z.cols()));
  cw.u.assign(patterns.size(), Vec::Zero(Z.cols()));
  for (int i = 0; i < net.width(); ++i) {
    Vec w1 = net.W1.row(i).transpose();
    double a = std::abs(net.w2[i]);
    if (w1.norm() == 0.0 || a == 0.0) continue;
    int j = sparsest_pattern(w1, Z, patterns, tol);
    if (j < 0)
      throw MappingError("relu_to_convex: neuron " + std::to_string(i) +
                         " conforms to no pattern in the supplied set");
    (net.w2[i] > 0 ? cw.v : cw.u)[j] += a * w1;
  }
  return cw;
}

ReluNetwork canonical_network(const ReluNetwork& net, const Mat& Z, const PatternSet& patterns) {
  ConvexWeights cw = relu_to_convex(net, Z, patterns);
  return convex_to_relu(cw.v, cw.u);
}

double OneDLasso::objective(const Vec& v, double b) const {
  return 0.5 * (A * v + Vec::Constant(A.rows(), b) - y).squaredNorm() +
         problem.lambda * v.lpNorm<1>();
}

Mat one_d_lasso_design(const Vec& Z) {
  const Eigen::Index n = Z.size();
  if (n < 2) throw InputError("one_d_lasso: need at least two points");
  for (Eigen::Index i = 1; i < n; ++i) {
    if (Z[i] == Z[i - 1]) throw InputError("one_d_lasso: duplicate value in Z");
    if (Z[i] < Z[i - 1]) throw InputError("one_d_lasso: Z must be sorted increasingly");
  }
  Mat A = Mat::Zero(n, 2 * (n - 1));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j + 1 < n; ++j) {
      A(i, j) = std::max(0.0, Z[i] - Z[j]);
      A(i, n - 1 + j) = std::max(0.0, Z[n - 1 - j] - Z[i]);
    }
  return A;
}

OneDLasso one_d_lasso_build(const Vec& Z, const Vec& y, double lambda) {
  if (Z.size() != y.size()) throw ShapeError("one_d_lasso: Z and y lengths differ");
  OneDLasso L;
  L.Z = Z;
  L.y = y;
  L.A = one_d_lasso_design(Z);
  L.a_mean = L.A.colwise().mean().transpose();
  L.y_mean = y.mean();
  Mat Xc = L.A.rowwise() - L.a_mean.transpose();
  Vec yc = y.array() - L.y_mean;
  L.problem = make_problem(Xc, yc, BlockPartition::singletons(static_cast<int>(L.A.cols())), lambda);
  return L;
}

ReluNetwork one_d_lasso_to_network(const Vec& v, double b, const Vec& Z) {
  const Eigen::Index n = Z.size();
  if (v.size() != 2 * (n - 1)) throw ShapeError("one_d_lasso_to_network: v must have length 2(n-1)");
  one_d_lasso_design(Z);  // validates Z
  ReluNetwork net;
  const Eigen::Index m = v.size();
  net.W1 = Mat::Zero(m, 1);
  net.w2 = Vec::Zero(m);
  net.bias1 = Vec::Zero(m);
  net.bias2 = b;
  for (Eigen::Index k = 0; k < m; ++k) {
    double s = std::sqrt(std::abs(v[k]));
    if (s == 0.0) continue;
    double sign = v[k] > 0 ? 1.0 : -1.0;
    net.w2[k] = sign * s;
    if (k < n - 1) {
      net.W1(k, 0) = s;
      (*net.bias1)[k] = -Z[k] * s;
    } else {
      Eigen::Index j = k - (n - 1);
      net.W1(k, 0) = -s;
      (*net.bias1)[k] = Z[n - 1 - j] * s;
    }
  }
  // The construction is pinned by this equality.
  Vec lhs = predict(net, Z);
  Vec rhs = one_d_lasso_design(Z) * v + Vec::Constant(n, b);
  if ((lhs - rhs).norm() > 1e-10 * (1.0 + rhs.norm()))
    throw MappingError("one_d_lasso_to_network: network predictions differ from A v + b");
  return net;
}

}  // namespace relu_optset
