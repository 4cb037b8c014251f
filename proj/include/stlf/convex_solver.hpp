#pragma once

#include "stlf/common.hpp"
#include "stlf/gp.hpp"

namespace stlf {

struct SubproblemConfig {
  double feas_tol = 1e-8;   // max allowed constraint value (log space)
  double stat_tol = 1e-7;   // gradient norm of the augmented-Lagrangian merit
  int max_inner_iters = 60; // multiplier-update rounds
};

struct SubproblemResult {
  Vec z;
  double objective = 0.0;       // objective LSE value at z
  double max_violation = 0.0;   // max_i max(0, g_i(z))
  double stationarity = 0.0;    // merit gradient infinity norm
  int newton_iters = 0;
  int multiplier_updates = 0;
};

// Raised when the iteration cap is reached without a feasible point; carries
// the best iterate found so far.
class SubproblemFailure : public Error {
 public:
  SubproblemFailure(const std::string& msg, Vec best) : Error(msg), best_iterate(std::move(best)) {}
  Vec best_iterate;
};

// Minimizes prog.objective subject to prog.constraints <= 0 with a
// Powell-Hestenes-Rockafellar augmented Lagrangian; inner iterations are
// damped Newton steps with Armijo backtracking. Deterministic given inputs.
SubproblemResult solve_subproblem(const gp::ConvexProgram& prog, const Vec& warm_start,
                                  const SubproblemConfig& cfg);

}  // namespace stlf
