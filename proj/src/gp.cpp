#include "stlf/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace stlf::gp {

double Term::eval(const Vec& y) const {
  double v = coeff;
  for (const auto& [var, e] : powers) v *= std::pow(y[var], e);
  return v;
}

double Term::log_eval(const Vec& log_y) const {
  double v = std::log(coeff);
  for (const auto& [var, e] : powers) v += e * log_y[var];
  return v;
}

double Posynomial::eval(const Vec& y) const {
  double v = 0.0;
  for (const Term& t : terms) v += t.eval(y);
  return v;
}

Term ag_condense(const Posynomial& posynomial, const Vec& point) {
  if (posynomial.terms.empty()) throw DomainError("ag_condense: empty posynomial");
  for (const Term& t : posynomial.terms) {
    if (!(t.coeff > 0.0)) throw DomainError("ag_condense: nonpositive coefficient");
    for (const auto& [var, e] : t.powers) {
      (void)e;
      if (var < 0 || var >= point.size() || !(point[var] > 0.0))
        throw DomainError("ag_condense: expansion point must be strictly positive");
    }
  }
  if (posynomial.is_monomial()) return posynomial.terms.front();

  const Vec log_point = point.array().log().matrix();
  const int m = static_cast<int>(posynomial.terms.size());
  Vec log_u(m);
  for (int k = 0; k < m; ++k) log_u[k] = posynomial.terms[k].log_eval(log_point);
  const double mx = log_u.maxCoeff();
  Vec w = (log_u.array() - mx).exp().matrix();
  w /= w.sum();  // AG weights a_k = u_k(z) / g(z)

  Term out;
  double log_coeff = 0.0;
  std::map<int, double> expo;
  for (int k = 0; k < m; ++k) {
    const double a = w[k];
    if (a <= 0.0) continue;  // vanished term contributes nothing in the limit
    log_coeff += a * (std::log(posynomial.terms[k].coeff) - std::log(a));
    for (const auto& [var, e] : posynomial.terms[k].powers) expo[var] += a * e;
  }
  out.coeff = std::exp(log_coeff);
  out.powers.assign(expo.begin(), expo.end());
  return out;
}

double LseExpr::value(const Vec& z) const {
  double mx = -std::numeric_limits<double>::infinity();
  std::vector<double> a(terms.size());
  for (std::size_t k = 0; k < terms.size(); ++k) {
    double v = terms[k].log_coeff;
    for (const auto& [var, e] : terms[k].expo) v += e * z[var];
    a[k] = v;
    mx = std::max(mx, v);
  }
  double s = 0.0;
  for (double v : a) s += std::exp(v - mx);
  return mx + std::log(s);
}

void LseExpr::accumulate(const Vec& z, double weight, Vec& grad, Mat* hess) const {
  // softmax weights over the terms
  std::vector<double> a(terms.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < terms.size(); ++k) {
    double v = terms[k].log_coeff;
    for (const auto& [var, e] : terms[k].expo) v += e * z[var];
    a[k] = v;
    mx = std::max(mx, v);
  }
  double s = 0.0;
  for (double& v : a) {
    v = std::exp(v - mx);
    s += v;
  }
  for (double& v : a) v /= s;

  // grad += weight * B^T p ; hess += weight * (B^T diag(p) B - (B^T p)(B^T p)^T)
  std::set<int> sup;
  Vec bp = Vec::Zero(z.size());
  for (std::size_t k = 0; k < terms.size(); ++k)
    for (const auto& [var, e] : terms[k].expo) {
      bp[var] += a[k] * e;
      sup.insert(var);
    }
  grad += weight * bp;

  if (hess) {
    for (std::size_t k = 0; k < terms.size(); ++k) {
      const auto& row = terms[k].expo;
      for (const auto& [v1, e1] : row)
        for (const auto& [v2, e2] : row) (*hess)(v1, v2) += weight * a[k] * e1 * e2;
    }
    for (int v1 : sup)
      for (int v2 : sup) (*hess)(v1, v2) -= weight * bp[v1] * bp[v2];
  }
}

std::vector<int> LseExpr::support() const {
  std::set<int> s;
  for (const auto& t : terms)
    for (const auto& [var, e] : t.expo) {
      (void)e;
      s.insert(var);
    }
  return {s.begin(), s.end()};
}

ConvexProgram log_transform(const GpSubproblem& sub) {
  auto to_lse = [](const Posynomial& p) {
    LseExpr e;
    e.terms.reserve(p.terms.size());
    for (const Term& t : p.terms) {
      if (!(t.coeff > 0.0)) throw DomainError("log_transform: nonpositive coefficient");
      LogTerm lt;
      lt.log_coeff = std::log(t.coeff);
      lt.expo = t.powers;
      e.terms.push_back(std::move(lt));
    }
    return e;
  };

  ConvexProgram prog;
  prog.num_vars = sub.num_vars;
  prog.objective = to_lse(sub.objective);
  prog.constraints.reserve(sub.inequality_constraints.size());
  for (const Posynomial& c : sub.inequality_constraints) prog.constraints.push_back(to_lse(c));
  return prog;
}

}  // namespace stlf::gp
