#include "stlf/convex_solver.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>

namespace stlf {

namespace {

struct MeritEval {
  double value = 0.0;
  Vec grad;
};

// PHR augmented Lagrangian:
//   L(z) = f(z) + sum_i (rho/2) * [max(0, g_i(z) + lambda_i/rho)^2 - (lambda_i/rho)^2]
MeritEval eval_merit(const gp::ConvexProgram& prog, const Vec& z, const Vec& lambda, double rho,
                     Mat* hess) {
  MeritEval out;
  out.grad = Vec::Zero(z.size());
  if (hess) hess->setZero();

  out.value = prog.objective.value(z);
  prog.objective.accumulate(z, 1.0, out.grad, hess);

  for (std::size_t i = 0; i < prog.constraints.size(); ++i) {
    const double g = prog.constraints[i].value(z);
    const double s = g + lambda[static_cast<int>(i)] / rho;
    if (s > 0.0) {
      out.value += 0.5 * rho * s * s;
      // d/dz = rho * s * grad g ; Hessian: rho * (grad g grad g^T) + rho * s * hess g
      Vec cg = Vec::Zero(z.size());
      prog.constraints[i].accumulate(z, rho * s, cg, hess);
      if (hess) {
        // accumulate() added rho*s*hess(g); add the Gauss-Newton rho * gg^T part.
        Vec g1 = Vec::Zero(z.size());
        prog.constraints[i].accumulate(z, 1.0, g1, nullptr);
        const auto sup = prog.constraints[i].support();
        for (int v1 : sup)
          for (int v2 : sup) (*hess)(v1, v2) += rho * g1[v1] * g1[v2];
      }
      out.grad += cg;
    }
    out.value -= 0.5 * lambda[static_cast<int>(i)] * lambda[static_cast<int>(i)] / rho;
  }
  return out;
}

double merit_value_only(const gp::ConvexProgram& prog, const Vec& z, const Vec& lambda,
                        double rho) {
  double v = prog.objective.value(z);
  for (std::size_t i = 0; i < prog.constraints.size(); ++i) {
    const double g = prog.constraints[i].value(z);
    const double s = g + lambda[static_cast<int>(i)] / rho;
    if (s > 0.0) v += 0.5 * rho * s * s;
    v -= 0.5 * lambda[static_cast<int>(i)] * lambda[static_cast<int>(i)] / rho;
  }
  return v;
}

double max_violation(const gp::ConvexProgram& prog, const Vec& z) {
  double v = 0.0;
  for (const auto& c : prog.constraints) v = std::max(v, c.value(z));
  return v;
}

// Damped Newton with Armijo backtracking on the merit; returns iterations used.
int newton_minimize(const gp::ConvexProgram& prog, Vec& z, const Vec& lambda, double rho,
                    double grad_tol, int max_iters) {
  const int n = static_cast<int>(z.size());
  Mat hess(n, n);
  int used = 0;
  for (; used < max_iters; ++used) {
    MeritEval m = eval_merit(prog, z, lambda, rho, &hess);
    if (m.grad.lpNorm<Eigen::Infinity>() <= grad_tol) break;

    double tau = 1e-10 * std::max(1.0, hess.diagonal().maxCoeff());
    Vec step;
    for (int attempt = 0; attempt < 60; ++attempt) {
      Eigen::LDLT<Mat> ldlt(hess + tau * Mat::Identity(n, n));
      if (ldlt.info() == Eigen::Success) {
        step = ldlt.solve(-m.grad);
        if (step.allFinite() && m.grad.dot(step) < 0.0) break;
      }
      tau = std::max(tau * 10.0, 1e-12);
      step.resize(0);
    }
    if (step.size() == 0) break;  // hopeless Hessian; bail with current iterate

    // Armijo backtracking.
    const double slope = m.grad.dot(step);
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      const Vec cand = z + t * step;
      const double v = merit_value_only(prog, cand, lambda, rho);
      if (std::isfinite(v) && v <= m.value + 1e-4 * t * slope) {
        z = cand;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
  }
  return used;
}

}  // namespace

SubproblemResult solve_subproblem(const gp::ConvexProgram& prog, const Vec& warm_start,
                                  const SubproblemConfig& cfg) {
  if (warm_start.size() != prog.num_vars)
    throw DomainError("solve_subproblem: warm start dimension mismatch");
  if (!warm_start.allFinite()) throw DomainError("solve_subproblem: warm start not finite");

  const int m = static_cast<int>(prog.constraints.size());
  Vec z = warm_start;
  Vec lambda = Vec::Zero(m);
  double rho = 10.0;
  double prev_viol = std::numeric_limits<double>::infinity();
  double inner_tol = std::max(1e-3, cfg.stat_tol);

  SubproblemResult best;
  best.z = z;
  best.max_violation = max_violation(prog, z);
  best.objective = prog.objective.value(z);

  int total_newton = 0;
  for (int round = 0; round < cfg.max_inner_iters; ++round) {
    total_newton += newton_minimize(prog, z, lambda, rho, inner_tol, 200);

    const double viol = max_violation(prog, z);
    const double obj = prog.objective.value(z);
    if (viol < best.max_violation ||
        (viol <= cfg.feas_tol && best.max_violation <= cfg.feas_tol && obj < best.objective)) {
      best.z = z;
      best.max_violation = viol;
      best.objective = obj;
    }

    if (viol <= cfg.feas_tol && inner_tol <= cfg.stat_tol) {
      MeritEval m_final = eval_merit(prog, z, lambda, rho, nullptr);
      const double stat = m_final.grad.lpNorm<Eigen::Infinity>();
      if (stat <= cfg.stat_tol) {
        SubproblemResult out;
        out.z = z;
        out.objective = prog.objective.value(z);
        out.max_violation = viol;
        out.stationarity = stat;
        out.newton_iters = total_newton;
        out.multiplier_updates = round;
        return out;
      }
    }

    for (int i = 0; i < m; ++i)
      lambda[i] = std::max(0.0, lambda[i] + rho * prog.constraints[i].value(z));
    if (viol > 0.25 * prev_viol && viol > cfg.feas_tol) rho = std::min(rho * 8.0, 1e12);
    prev_viol = viol;
    inner_tol = std::max(cfg.stat_tol, inner_tol * 0.2);
  }

  throw SubproblemFailure("solve_subproblem: iteration cap reached without feasibility", best.z);
}

}  // namespace stlf
