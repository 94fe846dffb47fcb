#include "relu_optset/solver.hpp"

#include "relu_optset/errors.hpp"
#include "relu_optset/numeric.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <random>

namespace relu_optset {

std::string to_string(StepRule r) { return r == StepRule::fixed ? "fixed" : "backtracking"; }

std::string to_string(SolverMethod m) {
  switch (m) {
    case SolverMethod::automatic: return "automatic";
    case SolverMethod::proximal_gradient: return "proximal_gradient";
    case SolverMethod::augmented_lagrangian: return "augmented_lagrangian";
    case SolverMethod::projected_proximal: return "projected_proximal";
  }
  return "automatic";
}

StepRule parse_step_rule(const std::string& s) {
  if (s == "fixed") return StepRule::fixed;
  if (s == "backtracking") return StepRule::backtracking;
  throw ParseError("unknown step rule '" + s + "'");
}

SolverMethod parse_solver_method(const std::string& s) {
  for (auto m : {SolverMethod::automatic, SolverMethod::proximal_gradient,
                 SolverMethod::augmented_lagrangian, SolverMethod::projected_proximal})
    if (to_string(m) == s) return m;
  throw ParseError("unknown solver method '" + s + "'");
}

void SolverOptions::validate() const {
  if (max_iters <= 0) throw InputError("solver options: max_iters must be positive");
  if (!(kkt_tol > 0)) throw InputError("solver options: kkt_tol must be positive");
  if (!(al_penalty_init > 0)) throw InputError("solver options: al_penalty_init must be positive");
  if (!(al_penalty_growth > 1)) throw InputError("solver options: al_penalty_growth must exceed 1");
}

Vec prox_block(const Vec& v, double threshold) {
  double nv = v.norm();
  if (nv <= threshold || nv == 0.0) return Vec::Zero(v.size());
  return (1.0 - threshold / nv) * v;
}

Vec project_cone(const Mat& K, const Vec& v) {
  auto r = numeric::nnls(K, v);
  return v - K * r.x;
}

namespace {

// Smooth part h(w) and its gradient; the nonsmooth part is handled by `prox`.
struct Model {
  const CglProblem& p;
  // Augmented Lagrangian state; sigma = 0 disables the penalty term.
  std::vector<Vec> mu;
  double sigma = 0.0;
  bool project = false;  // prox includes the cone projection

  Vec multipliers_at(int i, const Vec& wb) const {
    return (mu[i] + sigma * p.K[i]->transpose() * wb).cwiseMax(0.0);
  }

  double smooth(const Weights& w, Vec* grad) const {
    Vec r = p.X * w - p.y;
    double h = 0.5 * r.squaredNorm();
    if (grad) *grad = p.X.transpose() * r;
    if (sigma > 0) {
      for (int i = 0; i < p.num_blocks(); ++i) {
        if (!p.K[i]) continue;
        Vec wb = p.partition.gather(w, i);
        Vec m = multipliers_at(i, wb);
        h += (m.squaredNorm() - mu[i].squaredNorm()) / (2.0 * sigma);
        if (grad) {
          Vec gb = p.partition.gather(*grad, i) + *p.K[i] * m;
          p.partition.scatter(*grad, i, gb);
        }
      }
    }
    return h;
  }

  double total(const Weights& w) const { return smooth(w, nullptr) + p.lambda * penalty(p, w); }

  Weights prox(const Weights& z, double step) const {
    Weights out(z.size());
    for (int i = 0; i < p.num_blocks(); ++i) {
      Vec zb = p.partition.gather(z, i);
      if (project && p.K[i]) zb = project_cone(*p.K[i], zb);
      p.partition.scatter(out, i, prox_block(zb, step * p.lambda));
    }
    return out;
  }

  DualCertificate certificate(const Weights& w, double tol) const {
    if (sigma > 0) {
      DualCertificate d = DualCertificate::zeros(p);
      for (int i = 0; i < p.num_blocks(); ++i)
        if (p.K[i]) d.rho[i] = multipliers_at(i, p.partition.gather(w, i));
      return d;
    }
    if (project) return fit_dual(p, w, tol);
    return DualCertificate::zeros(p);
  }
};

struct Fista {
  const Model& model;
  const SolverOptions& opt;
  double L;
  std::vector<TraceRow>* trace;
  int* iter_counter;

  // Runs until the KKT report (with the model's certificate) satisfies `done`.
  template <class Done>
  Weights run(Weights x, int budget, Done done, KktReport& last, DualCertificate& last_rho) {
    Vec grad;
    double F = model.total(x);
    Weights y = x;
    double t = 1.0;
    for (int k = 0; k < budget; ++k) {
      ++*iter_counter;
      double hy = model.smooth(y, &grad);
      Weights xn = model.prox(y - grad / L, 1.0 / L);
      if (opt.step_rule == StepRule::backtracking) {
        for (int bt = 0; bt < 60; ++bt) {
          Vec d = xn - y;
          if (model.smooth(xn, nullptr) <= hy + grad.dot(d) + 0.5 * L * d.squaredNorm() + 1e-14 * (1 + std::abs(hy)))
            break;
          L *= 2.0;
          xn = model.prox(y - grad / L, 1.0 / L);
        }
      }
      double Fn = model.total(xn);
      const double slack = 1e-12 * (1.0 + std::abs(F));
      if (Fn > F + slack) {
        // Momentum restart: plain proximal step from the last accepted point.
        y = x;
        t = 1.0;
        for (int bt = 0; bt < 60; ++bt) {
          hy = model.smooth(x, &grad);
          xn = model.prox(x - grad / L, 1.0 / L);
          Fn = model.total(xn);
          if (Fn <= F + slack) break;
          L *= 2.0;
        }
        if (Fn > F + slack) {
          xn = x;
          Fn = F;
        }
      }
      double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      y = xn + ((t - 1.0) / tn) * (xn - x);
      x = std::move(xn);
      t = tn;
      F = Fn;

      bool check = !model.project || (k % 10 == 9) || k + 1 == budget;
      if (check || trace) {
        last_rho = model.certificate(x, opt.kkt_tol);
        last = kkt_report(model.p, x, last_rho, opt.kkt_tol);
        if (trace)
          trace->push_back({*iter_counter, objective(model.p, x), last.max_violation()});
        if (done(last)) return x;
      }
    }
    last_rho = model.certificate(x, opt.kkt_tol);
    last = kkt_report(model.p, x, last_rho, opt.kkt_tol);
    return x;
  }
};

Weights initial_point(const CglProblem& problem, const SolverOptions& opt) {
  if (opt.initial) {
    if (opt.initial->size() != problem.d()) throw ShapeError("solve: warm start has wrong length");
    return *opt.initial;
  }
  Weights w = Weights::Zero(problem.d());
  if (opt.random_init) {
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> g;
    for (Eigen::Index j = 0; j < w.size(); ++j) w[j] = g(rng);
    for (int i = 0; i < problem.num_blocks(); ++i)
      if (problem.K[i])
        problem.partition.scatter(w, i, project_cone(*problem.K[i], problem.partition.gather(w, i)));
  }
  return w;
}

double lipschitz(const CglProblem& p) {
  double L = 1.02 * numeric::power_iteration_sq_norm(p.X);
  return L > 0 ? L : 1.0;
}

void keep_better(SolveResult& res, const CglProblem& p, const Weights& w, double tol) {
  // Compare the running certificate against an NNLS-recovered one.
  DualCertificate alt = fit_dual(p, w, tol);
  KktReport alt_rep = kkt_report(p, w, alt, tol);
  if (alt_rep.max_violation() < res.report.max_violation()) {
    res.rho = std::move(alt);
    res.report = std::move(alt_rep);
  }
}

SolveResult run_projected(const CglProblem& p, const SolverOptions& opt, Weights w0, int budget,
                          SolveResult res) {
  Model model{p, {}, 0.0, true};
  for (int i = 0; i < p.num_blocks(); ++i)
    if (p.K[i]) p.partition.scatter(w0, i, project_cone(*p.K[i], p.partition.gather(w0, i)));
  Fista f{model, opt, lipschitz(p), opt.record_trace ? &res.trace : nullptr, &res.iterations};
  res.w = f.run(w0, budget, [](const KktReport& r) { return r.satisfied; }, res.report, res.rho);
  res.method_used = SolverMethod::projected_proximal;
  return res;
}

SolveResult run_al(const CglProblem& p, const SolverOptions& opt, Weights w) {
  SolveResult res;
  Model model{p, {}, opt.al_penalty_init, false};
  model.mu.resize(p.num_blocks());
  double kmax = 0.0;
  for (int i = 0; i < p.num_blocks(); ++i) {
    model.mu[i] = Vec::Zero(p.num_constraints(i));
    if (p.K[i]) kmax = std::max(kmax, std::pow(numeric::spectral_norm(*p.K[i]), 2));
  }
  const double LX = lipschitz(p);
  double prev_viol = std::numeric_limits<double>::infinity();
  // First round: loose inner tolerance; rounds are capped so multipliers get updated.
  double inner_tol = std::max(opt.kkt_tol, 1e-2);
  res.method_used = SolverMethod::augmented_lagrangian;
  Weights best = w;
  DualCertificate best_rho = DualCertificate::zeros(p);
  KktReport best_rep = kkt_report(p, w, best_rho, opt.kkt_tol);
  while (res.iterations < opt.max_iters) {
    Fista f{model, opt, LX + model.sigma * kmax, opt.record_trace ? &res.trace : nullptr,
            &res.iterations};
    KktReport rep;
    DualCertificate rho;
    const double itol = inner_tol;
    w = f.run(w, std::min(opt.max_iters - res.iterations, 5000),
              [itol](const KktReport& r) { return r.stationarity_violation <= itol; }, rep, rho);
    model.mu = rho.rho;
    if (rep.max_violation() < best_rep.max_violation()) {
      best = w;
      best_rho = rho;
      best_rep = rep;
    }
    if (rep.satisfied) break;
    double viol = std::max(rep.feasibility_violation, rep.slackness_violation);
    if (viol > 0.5 * prev_viol) model.sigma *= opt.al_penalty_growth;
    prev_viol = viol;
    inner_tol = std::max(opt.kkt_tol, 0.1 * viol);
  }
  res.w = best;
  res.rho = best_rho;
  res.report = best_rep;
  return res;
}

}  // namespace

SolveResult solve(const CglProblem& problem, const SolverOptions& options) {
  problem.validate();
  options.validate();
  Weights w0 = initial_point(problem, options);
  SolverMethod method = options.method;
  if (method == SolverMethod::automatic)
    method = problem.any_constrained() ? SolverMethod::augmented_lagrangian
                                       : SolverMethod::proximal_gradient;
  if (method == SolverMethod::proximal_gradient && problem.any_constrained())
    throw InputError("solve: proximal_gradient requires an unconstrained problem");

  SolveResult res;
  if (method == SolverMethod::proximal_gradient) {
    Model model{problem, {}, 0.0, false};
    Fista f{model, options, lipschitz(problem), options.record_trace ? &res.trace : nullptr,
            &res.iterations};
    res.w = f.run(w0, options.max_iters, [](const KktReport& r) { return r.satisfied; },
                  res.report, res.rho);
    res.method_used = method;
  } else if (method == SolverMethod::augmented_lagrangian) {
    res = run_al(problem, options, w0);
    keep_better(res, problem, res.w, options.kkt_tol);
    if (!res.report.satisfied) {
      // Polish from the AL point with the exact cone prox.
      SolveResult pol;
      pol.iterations = res.iterations;
      pol = run_projected(problem, options, res.w, std::max(1, options.max_iters / 4), std::move(pol));
      keep_better(pol, problem, pol.w, options.kkt_tol);
      if (pol.report.max_violation() < res.report.max_violation()) {
        pol.method_used = SolverMethod::augmented_lagrangian;
        pol.trace.insert(pol.trace.begin(), res.trace.begin(), res.trace.end());
        res = std::move(pol);
      }
    }
  } else {
    res = run_projected(problem, options, w0, options.max_iters, std::move(res));
    keep_better(res, problem, res.w, options.kkt_tol);
  }
  res.converged = res.report.satisfied;
  return res;
}

CglProblem l2_extended(const CglProblem& problem, double delta) {
  if (!(delta > 0)) throw InputError("l2 penalty: delta must be positive");
  CglProblem e = problem;
  const int n = problem.n(), d = problem.d();
  e.X = Mat::Zero(n + d, d);
  e.X.topRows(n) = problem.X;
  e.X.bottomRows(d) = std::sqrt(delta) * Mat::Identity(d, d);
  e.y = Vec::Zero(n + d);
  e.y.head(n) = problem.y;
  return e;
}

double objective_l2(const CglProblem& problem, const Weights& w, double delta) {
  return objective(problem, w) + 0.5 * delta * w.squaredNorm();
}

SolveResult solve_l2(const CglProblem& problem, double delta, const SolverOptions& options) {
  problem.validate();
  return solve(l2_extended(problem, delta), options);
}

void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& trace) {
  os << "iter,objective,kkt_violation\n";
  os.precision(17);
  for (const auto& r : trace) os << r.iter << ',' << r.objective << ',' << r.kkt_violation << '\n';
}

}  // namespace relu_optset
