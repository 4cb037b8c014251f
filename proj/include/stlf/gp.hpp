#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "stlf/common.hpp"

namespace stlf::gp {

// One monomial c * prod_k y[var_k]^expo_k over strictly positive variables.
// Exponents are stored sparsely; most terms touch only a few variables.
struct Term {
  double coeff = 1.0;
  std::vector<std::pair<int, double>> powers;

  Term() = default;
  Term(double c, std::vector<std::pair<int, double>> p) : coeff(c), powers(std::move(p)) {}

  double eval(const Vec& y) const;
  double log_eval(const Vec& log_y) const;  // log c + sum e_k * log y_k
};

struct Posynomial {
  std::vector<Term> terms;

  Posynomial() = default;
  explicit Posynomial(Term t) { terms.push_back(std::move(t)); }

  Posynomial& add(Term t) {
    terms.push_back(std::move(t));
    return *this;
  }
  double eval(const Vec& y) const;
  bool is_monomial() const { return terms.size() == 1; }
};

// Arithmetic-geometric mean condensation at a strictly positive point:
// returns the monomial g_hat with g_hat <= g everywhere and g_hat = g at the
// point. Term weights are computed in log space for stability.
Term ag_condense(const Posynomial& posynomial, const Vec& point);

// One monomial's log form: beta . z + b.
struct LogTerm {
  double log_coeff = 0.0;
  std::vector<std::pair<int, double>> expo;
};

// f(z) = log sum_m exp(beta_m . z + b_m); convex by construction.
struct LseExpr {
  std::vector<LogTerm> terms;

  double value(const Vec& z) const;
  // Adds gradient (and optionally Hessian) of `weight * f` at z.
  void accumulate(const Vec& z, double weight, Vec& grad, Mat* hess) const;
  std::vector<int> support() const;
};

struct ConvexProgram {
  int num_vars = 0;
  LseExpr objective;
  std::vector<LseExpr> constraints;  // each value(z) <= 0
};

// One SCA iteration's condensed problem: minimize a posynomial objective
// subject to posynomial constraints, each required <= 1.
struct GpSubproblem {
  int num_vars = 0;
  Posynomial objective;
  std::vector<Posynomial> inequality_constraints;
  std::map<std::string, int> variable_index;
  Vec expansion_point;
};

// Log change of variables z = log y; exponent rows carry over unchanged.
ConvexProgram log_transform(const GpSubproblem& sub);

}  // namespace stlf::gp
