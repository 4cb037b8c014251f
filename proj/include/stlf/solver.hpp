#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "stlf/bounds.hpp"
#include "stlf/common.hpp"
#include "stlf/convex_solver.hpp"
#include "stlf/gp.hpp"

namespace stlf {

struct SolverConfig {
  double phi_s = 1.0;
  double phi_t = 50.0;
  double phi_e = 1.0;
  double eps_E = 1e-3;   // energy activation constant in alpha / (alpha + eps_E)
  double eps_C = 1e-2;   // equality-constraint squeeze half-width
  double eps_lo = 1e-6;  // strict-positivity floor for all GP variables
  double outer_tol = 1e-4;
  int max_outer_iters = 50;
  SubproblemConfig subproblem;
  bool coupling_mode = false;
  std::uint64_t rng_seed = 0;  // reserved; the solver itself is deterministic
  double alpha_min = 1e-3;     // link-activation threshold for transmission counting
};

// One SCA iterate. alpha/chi_t diagonals are fixed at zero (self links are
// excluded from the program); chi_c_tilde is the shifted equality-squeeze
// variable chi_C - eps_C, kept positive so all coefficients stay positive.
struct IterateState {
  Vec psi;
  Mat alpha;
  Vec chi_s;
  Mat chi_t;
  Mat chi_c_tilde;
  std::vector<Mat> chi_hat;  // coupling mode only: chi_hat[i](j, k)
  double objective_value = 0.0;
  int outer_iter = 0;
};

struct TraceEntry {
  int outer_iter = 0;
  double objective = 0.0;
  double max_constraint_violation = 0.0;
  Vec psi;
};

struct LinkPlan {
  std::vector<bool> psi_binary;  // true = target
  Mat alpha;                     // nonzero only on (source, target) links
  std::vector<std::pair<int, int>> active_links;
  std::vector<double> objective_trace;  // relaxed-phase objective per outer iteration
  std::vector<TraceEntry> trace;
  std::vector<double> refine_trace;  // fixed-psi re-solve phase
  IterateState relaxed;              // final relaxed iterate before rounding

  int num_sources() const;
  int num_targets() const;
  std::vector<int> sources() const;
  std::vector<int> targets() const;
};

// Condensed GP subproblem around `prev` (strictly positive). Denominator
// posynomials are replaced by their AG-mean monomial bounds at prev.
gp::GpSubproblem build_subproblem(const BoundTerms& bounds, const Mat& K,
                                  const IterateState& prev, const SolverConfig& cfg);

// Default feasible-ish start: psi = 0.5, alpha = 0.5/N, auxiliaries with 10%
// slack on their defining inequalities.
IterateState default_init(const BoundTerms& bounds, const SolverConfig& cfg);

// The relaxed SCA phase alone: iterates condensed subproblems until the
// relative objective change drops below outer_tol. Appends per-iteration
// entries to `trace` when given.
IterateState solve_relaxed(const BoundTerms& bounds, const Mat& K, const SolverConfig& cfg,
                           const std::optional<IterateState>& init = std::nullopt,
                           std::vector<TraceEntry>* trace = nullptr);

// Full solver: SCA to convergence, threshold rounding of psi at 0.5, one
// fixed-psi re-solve of alpha over source rows, exact column renormalization.
LinkPlan solve(const BoundTerms& bounds, const Mat& K, const SolverConfig& cfg,
               const std::optional<IterateState>& init = std::nullopt);

// Link weights for a fixed source/target classification (the solver's own
// refinement step; also used to build the phi_e = 0 normalization reference).
Mat resolve_alpha_fixed_psi(const BoundTerms& bounds, const Mat& K, const SolverConfig& cfg,
                            const std::vector<bool>& psi_binary, const Mat& warm_alpha,
                            std::vector<double>* refine_trace = nullptr);

// resolve_alpha_fixed_psi plus link thresholding and exact renormalization.
LinkPlan make_plan_fixed_psi(const BoundTerms& bounds, const Mat& K, const SolverConfig& cfg,
                             const std::vector<bool>& psi_binary, const Mat& warm_alpha);

// Objective of the original problem at a binary classification and weight
// matrix; used by metrics and by exhaustive-search checks.
double original_objective(const BoundTerms& bounds, const Mat& K, const SolverConfig& cfg,
                          const std::vector<bool>& psi, const Mat& alpha);

// Energy part of the objective only: sum K_ij * a / (a + eps_E).
double plan_energy(const Mat& K, const Mat& alpha, double eps_E);

}  // namespace stlf
