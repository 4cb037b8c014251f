#include "stlf/solver.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

namespace stlf {

namespace {

using gp::Posynomial;
using gp::Term;

// Flat variable layout. Link variables (alpha, chi_t, chi_hat) exist only on
// candidate-source rows; self links are excluded. Order: psi, alpha, chi_s,
// chi_t, chi_c (full N x N), then chi_hat in coupling mode.
class Layout {
 public:
  Layout(const std::vector<bool>& candidates, bool coupling)
      : cand_(candidates), n_(static_cast<int>(candidates.size())), coupling_(coupling) {
    rank_.assign(n_, -1);
    for (int i = 0; i < n_; ++i)
      if (cand_[i]) rank_[i] = nc_++;
    links_ = nc_ * (n_ - 1);
    chi_hat_base_ = n_ + 2 * links_ + n_ + n_ * n_;
  }

  int n() const { return n_; }
  int num_candidates() const { return nc_; }
  bool is_candidate(int i) const { return cand_[i]; }
  bool coupling() const { return coupling_; }

  int psi(int i) const { return i; }
  int alpha(int i, int j) const { return n_ + link(i, j); }
  int chi_s(int i) const { return n_ + links_ + i; }
  int chi_t(int i, int j) const { return n_ + links_ + n_ + link(i, j); }
  int chi_c(int i, int j) const { return n_ + 2 * links_ + n_ + i * n_ + j; }
  int chi_hat(int i, int j, int k) const {
    // i, k candidates, k != i; j any device.
    const int ck = rank_[k] < rank_[i] ? rank_[k] : rank_[k] - 1;
    return chi_hat_base_ + (rank_[i] * n_ + j) * (nc_ - 1) + ck;
  }
  int total() const {
    return coupling_ ? chi_hat_base_ + nc_ * n_ * (nc_ - 1) : chi_hat_base_;
  }

 private:
  int link(int i, int j) const { return rank_[i] * (n_ - 1) + (j < i ? j : j - 1); }

  std::vector<bool> cand_;
  int n_ = 0;
  int nc_ = 0;
  bool coupling_ = false;
  int links_ = 0;
  int chi_hat_base_ = 0;
  std::vector<int> rank_;
};

Vec flatten(const IterateState& s, const Layout& lay) {
  const int n = lay.n();
  Vec x = Vec::Ones(lay.total());
  for (int i = 0; i < n; ++i) {
    x[lay.psi(i)] = s.psi[i];
    x[lay.chi_s(i)] = s.chi_s[i];
    for (int j = 0; j < n; ++j) {
      x[lay.chi_c(i, j)] = s.chi_c_tilde(i, j);
      if (i != j && lay.is_candidate(i)) {
        x[lay.alpha(i, j)] = s.alpha(i, j);
        x[lay.chi_t(i, j)] = s.chi_t(i, j);
      }
    }
  }
  if (lay.coupling())
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          if (lay.is_candidate(i) && lay.is_candidate(k) && k != i)
            x[lay.chi_hat(i, j, k)] = s.chi_hat[i](j, k);
  return x;
}

IterateState unflatten(const Vec& x, const Layout& lay, double eps_lo) {
  const int n = lay.n();
  IterateState s;
  s.psi.resize(n);
  s.alpha = Mat::Zero(n, n);
  s.chi_s.resize(n);
  s.chi_t = Mat::Zero(n, n);
  s.chi_c_tilde.resize(n, n);
  auto clamp = [eps_lo](double v) { return std::max(v, eps_lo); };
  for (int i = 0; i < n; ++i) {
    s.psi[i] = clamp(x[lay.psi(i)]);
    s.chi_s[i] = clamp(x[lay.chi_s(i)]);
    for (int j = 0; j < n; ++j) {
      s.chi_c_tilde(i, j) = clamp(x[lay.chi_c(i, j)]);
      if (i != j && lay.is_candidate(i)) {
        s.alpha(i, j) = clamp(x[lay.alpha(i, j)]);
        s.chi_t(i, j) = clamp(x[lay.chi_t(i, j)]);
      }
    }
  }
  if (lay.coupling()) {
    s.chi_hat.assign(n, Mat::Zero(n, n));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          if (lay.is_candidate(i) && lay.is_candidate(k) && k != i)
            s.chi_hat[i](j, k) = clamp(x[lay.chi_hat(i, j, k)]);
  }
  return s;
}

Term reciprocal(const Term& t) {
  Term out;
  out.coeff = 1.0 / t.coeff;
  out.powers = t.powers;
  for (auto& [var, e] : out.powers) e = -e;
  return out;
}

// num * (1 / den) for monomials; merges exponent lists.
Term divide(const Term& num, const Term& den) {
  Term out = reciprocal(den);
  out.coeff *= num.coeff;
  for (const auto& [var, e] : num.powers) {
    bool merged = false;
    for (auto& [v2, e2] : out.powers)
      if (v2 == var) {
        e2 += e;
        merged = true;
        break;
      }
    if (!merged) out.powers.emplace_back(var, e);
  }
  out.powers.erase(std::remove_if(out.powers.begin(), out.powers.end(),
                                  [](const auto& p) { return p.second == 0.0; }),
                   out.powers.end());
  return out;
}

Posynomial times_monomial(const Posynomial& p, const Term& m) {
  Posynomial out;
  for (const Term& t : p.terms) out.add(divide(t, reciprocal(m)));
  return out;
}

double coupling_value(const BoundTerms& bounds, int i, int j, int k) {
  // Disagreement of source hypotheses k and i on device j's data, floored to
  // keep the G monomial well defined.
  return std::max(bounds.coupling_disagreement[static_cast<std::size_t>(j)](k, i), 1e-9);
}

void add_box_constraints(std::vector<Posynomial>& cons, int var, double lo, double hi) {
  if (hi > 0.0) cons.push_back(Posynomial(Term{1.0 / hi, {{var, 1.0}}}));
  cons.push_back(Posynomial(Term{lo, {{var, -1.0}}}));
}

std::string idx1(const char* base, int i) {
  return std::string(base) + "[" + std::to_string(i) + "]";
}
std::string idx2(const char* base, int i, int j) {
  return std::string(base) + "[" + std::to_string(i) + "," + std::to_string(j) + "]";
}

void validate_config(const SolverConfig& cfg) {
  if (!(cfg.eps_lo > 0.0 && cfg.eps_lo < cfg.eps_C))
    throw ConfigError("solver: requires 0 < eps_lo < eps_C");
  if (!(cfg.eps_E > 0.0)) throw ConfigError("solver: eps_E must be positive");
  if (!(cfg.outer_tol > 0.0)) throw ConfigError("solver: outer_tol must be positive");
  if (cfg.phi_s < 0.0 || cfg.phi_t < 0.0 || cfg.phi_e < 0.0)
    throw ConfigError("solver: phi weights must be nonnegative");
  if (cfg.max_outer_iters < 1) throw ConfigError("solver: max_outer_iters must be >= 1");
}

std::vector<bool> candidates_of(const BoundTerms& bounds) {
  if (!bounds.candidate_sources.empty()) return bounds.candidate_sources;
  return std::vector<bool>(static_cast<std::size_t>(bounds.size()), true);
}

void validate_inputs(const BoundTerms& bounds, const Mat& K, const SolverConfig& cfg) {
  const int n = bounds.size();
  if (n < 2) throw DomainError("solver: need at least two devices");
  if (K.rows() != n || K.cols() != n) throw DomainError("solver: K dimension mismatch");
  if (bounds.T_hat.rows() != n || bounds.T_hat.cols() != n)
    throw DomainError("solver: T_hat dimension mismatch");
  const std::vector<bool> cand = candidates_of(bounds);
  int num_candidates = 0;
  for (int i = 0; i < n; ++i) {
    if (!(bounds.S[i] > 0.0)) throw DomainError("solver: S entries must be positive");
    if (cand[i]) {
      ++num_candidates;
      for (int j = 0; j < n; ++j)
        if (i != j && !(bounds.T_hat(i, j) > 0.0))
          throw DomainError("solver: T_hat entries must be positive");
    }
  }
  if (num_candidates == 0) throw DomainError("solver: no candidate sources");
  if (cfg.coupling_mode && static_cast<int>(bounds.coupling_disagreement.size()) != n)
    throw ConfigError("solver: coupling mode requires bounds.coupling_disagreement");
}

// Devices that can feed column j.
std::vector<int> feeders_of(const std::vector<bool>& cand, int j) {
  std::vector<int> out;
  for (int k = 0; k < static_cast<int>(cand.size()); ++k)
    if (cand[k] && k != j) out.push_back(k);
  return out;
}

}  // namespace

int LinkPlan::num_sources() const {
  int c = 0;
  for (bool t : psi_binary)
    if (!t) ++c;
  return c;
}

int LinkPlan::num_targets() const { return static_cast<int>(psi_binary.size()) - num_sources(); }

std::vector<int> LinkPlan::sources() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < psi_binary.size(); ++i)
    if (!psi_binary[i]) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> LinkPlan::targets() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < psi_binary.size(); ++i)
    if (psi_binary[i]) out.push_back(static_cast<int>(i));
  return out;
}

IterateState default_init(const BoundTerms& bounds, const SolverConfig& cfg) {
  const int n = bounds.size();
  const std::vector<bool> cand = candidates_of(bounds);
  IterateState s;
  s.psi = Vec::Constant(n, 0.5);
  s.alpha = Mat::Zero(n, n);
  s.chi_s.resize(n);
  s.chi_t = Mat::Zero(n, n);
  s.chi_c_tilde = Mat::Constant(n, n, cfg.eps_lo);
  for (int i = 0; i < n; ++i) {
    s.chi_s[i] = std::max(1.1 * 0.5 * bounds.S[i], cfg.eps_lo);
    if (!cand[i]) continue;
    for (int j = 0; j < n; ++j)
      if (i != j) {
        s.alpha(i, j) = 0.5 / n;
        s.chi_t(i, j) = std::max(1.1 * 0.25 * (0.5 / n) * bounds.T_hat(i, j), cfg.eps_lo);
      }
  }
  if (cfg.coupling_mode) {
    s.chi_hat.assign(n, Mat::Zero(n, n));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          if (cand[i] && cand[k] && k != i)
            s.chi_hat[i](j, k) =
                std::max(1.1 * 0.25 * (0.5 / n) * coupling_value(bounds, i, j, k), cfg.eps_lo);
  }
  return s;
}

gp::GpSubproblem build_subproblem(const BoundTerms& bounds, const Mat& K,
                                  const IterateState& prev, const SolverConfig& cfg) {
  validate_config(cfg);
  validate_inputs(bounds, K, cfg);
  const int n = bounds.size();
  const std::vector<bool> cand = candidates_of(bounds);
  const Layout lay(cand, cfg.coupling_mode);
  const Vec x0 = flatten(prev, lay);
  if (!(x0.minCoeff() > 0.0))
    throw DomainError("build_subproblem: expansion point must be strictly positive");

  gp::GpSubproblem sub;
  sub.num_vars = lay.total();
  sub.expansion_point = x0;

  for (int i = 0; i < n; ++i) {
    sub.variable_index[idx1("psi", i)] = lay.psi(i);
    sub.variable_index[idx1("chi_s", i)] = lay.chi_s(i);
    for (int j = 0; j < n; ++j) {
      sub.variable_index[idx2("chi_c", i, j)] = lay.chi_c(i, j);
      if (i != j && cand[i]) {
        sub.variable_index[idx2("alpha", i, j)] = lay.alpha(i, j);
        sub.variable_index[idx2("chi_t", i, j)] = lay.chi_t(i, j);
        if (cfg.coupling_mode)
          for (int k = 0; k < n; ++k)
            if (cand[k] && k != i)
              sub.variable_index[idx2("chi_hat", i, j) + "[" + std::to_string(k) + "]"] =
                  lay.chi_hat(i, j, k);
      }
    }
  }

  // Objective: phi_s sum chi_s + phi_t sum chi_t + phi_e sum K a / J_hat + sum chi_c.
  for (int i = 0; i < n; ++i) {
    if (cfg.phi_s > 0.0) sub.objective.add(Term{cfg.phi_s, {{lay.chi_s(i), 1.0}}});
    for (int j = 0; j < n; ++j) {
      sub.objective.add(Term{1.0, {{lay.chi_c(i, j), 1.0}}});
      if (i == j || !cand[i]) continue;
      if (cfg.phi_t > 0.0) sub.objective.add(Term{cfg.phi_t, {{lay.chi_t(i, j), 1.0}}});
      if (cfg.phi_e > 0.0 && K(i, j) > 0.0) {
        Posynomial j_posy;
        j_posy.add(Term{1.0, {{lay.alpha(i, j), 1.0}}});
        j_posy.add(Term{cfg.eps_E, {}});
        const Term j_hat = gp::ag_condense(j_posy, x0);
        sub.objective.add(divide(Term{cfg.phi_e * K(i, j), {{lay.alpha(i, j), 1.0}}}, j_hat));
      }
    }
  }

  // 1 / F_hat_i <= 1 with F_i = psi_i + chi_s_i / S_i.
  for (int i = 0; i < n; ++i) {
    Posynomial f;
    f.add(Term{1.0, {{lay.psi(i), 1.0}}});
    f.add(Term{1.0 / bounds.S[i], {{lay.chi_s(i), 1.0}}});
    sub.inequality_constraints.push_back(Posynomial(reciprocal(gp::ag_condense(f, x0))));
  }

  // (T_hat_ij + sum_k chi_hat_ijk) / H_hat_ij <= 1 with
  // H_ij = psi_i T_hat_ij [+ psi_i sum_k chi_hat_ijk] + chi_t_ij / (psi_j a_ij).
  for (int i = 0; i < n; ++i) {
    if (!cand[i]) continue;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      Posynomial h;
      h.add(Term{bounds.T_hat(i, j), {{lay.psi(i), 1.0}}});
      if (cfg.coupling_mode)
        for (int k = 0; k < n; ++k)
          if (cand[k] && k != i)
            h.add(Term{1.0, {{lay.psi(i), 1.0}, {lay.chi_hat(i, j, k), 1.0}}});
      h.add(Term{1.0, {{lay.chi_t(i, j), 1.0}, {lay.psi(j), -1.0}, {lay.alpha(i, j), -1.0}}});
      const Term h_hat = gp::ag_condense(h, x0);

      Posynomial numerator;
      numerator.add(Term{bounds.T_hat(i, j), {}});
      if (cfg.coupling_mode)
        for (int k = 0; k < n; ++k)
          if (cand[k] && k != i) numerator.add(Term{1.0, {{lay.chi_hat(i, j, k), 1.0}}});
      sub.inequality_constraints.push_back(times_monomial(numerator, reciprocal(h_hat)));
    }
  }

  // Coupling mode: 1 / G_hat_ijk <= 1 with
  // G_ijk = psi_k + chi_hat_ijk / (psi_i a_ki T_hat_ijk).
  if (cfg.coupling_mode) {
    for (int i = 0; i < n; ++i) {
      if (!cand[i]) continue;
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        for (int k = 0; k < n; ++k) {
          if (!cand[k] || k == i) continue;
          Posynomial g;
          g.add(Term{1.0, {{lay.psi(k), 1.0}}});
          g.add(Term{1.0 / coupling_value(bounds, i, j, k),
                     {{lay.chi_hat(i, j, k), 1.0}, {lay.psi(i), -1.0}, {lay.alpha(k, i), -1.0}}});
          sub.inequality_constraints.push_back(Posynomial(reciprocal(gp::ag_condense(g, x0))));
        }
      }
    }
  }

  // Equality squeeze per (i, j): sum_k a_kj / M_hat_plus_ij <= 1 and
  // (chi_c_ij + psi_j) / M_hat_minus_j <= 1. Columns with no feeders pin
  // psi_j near zero instead.
  std::vector<Term> m_minus_hat(n);
  std::vector<std::vector<int>> feeders(n);
  for (int j = 0; j < n; ++j) {
    feeders[j] = feeders_of(cand, j);
    if (feeders[j].empty()) {
      sub.inequality_constraints.push_back(
          Posynomial(Term{1.0 / (2.0 * cfg.eps_C), {{lay.psi(j), 1.0}}}));
      continue;
    }
    Posynomial m_minus;
    for (int k : feeders[j]) m_minus.add(Term{1.0, {{lay.alpha(k, j), 1.0}}});
    m_minus_hat[j] = gp::ag_condense(m_minus, x0);
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (feeders[j].empty()) continue;
      Posynomial m_plus;
      m_plus.add(Term{1.0, {{lay.chi_c(i, j), 1.0}}});
      m_plus.add(Term{2.0 * cfg.eps_C, {}});
      m_plus.add(Term{1.0, {{lay.psi(j), 1.0}}});
      const Term m_plus_hat = gp::ag_condense(m_plus, x0);

      Posynomial alpha_sum;
      for (int k : feeders[j]) alpha_sum.add(Term{1.0, {{lay.alpha(k, j), 1.0}}});
      sub.inequality_constraints.push_back(times_monomial(alpha_sum, reciprocal(m_plus_hat)));

      Posynomial numerator;
      numerator.add(Term{1.0, {{lay.chi_c(i, j), 1.0}}});
      numerator.add(Term{1.0, {{lay.psi(j), 1.0}}});
      sub.inequality_constraints.push_back(times_monomial(numerator, reciprocal(m_minus_hat[j])));
    }
  }

  // Boxes: psi and alpha in [eps_lo, 1]; auxiliaries bounded below.
  for (int i = 0; i < n; ++i) {
    add_box_constraints(sub.inequality_constraints, lay.psi(i), cfg.eps_lo, 1.0);
    add_box_constraints(sub.inequality_constraints, lay.chi_s(i), cfg.eps_lo, 0.0);
    for (int j = 0; j < n; ++j) {
      add_box_constraints(sub.inequality_constraints, lay.chi_c(i, j), cfg.eps_lo, 0.0);
      if (i != j && cand[i]) {
        add_box_constraints(sub.inequality_constraints, lay.alpha(i, j), cfg.eps_lo, 1.0);
        add_box_constraints(sub.inequality_constraints, lay.chi_t(i, j), cfg.eps_lo, 0.0);
        if (cfg.coupling_mode)
          for (int k = 0; k < n; ++k)
            if (cand[k] && k != i)
              add_box_constraints(sub.inequality_constraints, lay.chi_hat(i, j, k), cfg.eps_lo,
                                  0.0);
      }
    }
  }

  return sub;
}

namespace {

double true_objective(const BoundTerms& bounds, const Mat& K, const SolverConfig& cfg,
                      const IterateState& s) {
  const int n = bounds.size();
  const std::vector<bool> cand = candidates_of(bounds);
  double v = 0.0;
  for (int i = 0; i < n; ++i) {
    v += cfg.phi_s * s.chi_s[i];
    for (int j = 0; j < n; ++j) {
      v += s.chi_c_tilde(i, j);
      if (i != j && cand[i]) {
        v += cfg.phi_t * s.chi_t(i, j);
        v += cfg.phi_e * K(i, j) * s.alpha(i, j) / (s.alpha(i, j) + cfg.eps_E);
      }
    }
  }
  return v;
}

// Violation of the uncondensed P' constraints at an iterate (for the trace).
double true_violation(const BoundTerms& bounds, const SolverConfig& cfg, const IterateState& s) {
  const int n = bounds.size();
  const std::vector<bool> cand = candidates_of(bounds);
  double worst = 0.0;
  auto track = [&worst](double lhs) { worst = std::max(worst, lhs - 1.0); };
  for (int i = 0; i < n; ++i) {
    track(1.0 / (s.psi[i] + s.chi_s[i] / bounds.S[i]));
    track(s.psi[i]);
    track(cfg.eps_lo / s.psi[i]);
    for (int j = 0; j < n; ++j) {
      const std::vector<int> feeders = feeders_of(cand, j);
      if (feeders.empty()) {
        track(s.psi[j] / (2.0 * cfg.eps_C));
      } else {
        double alpha_sum = 0.0;
        for (int k : feeders) alpha_sum += s.alpha(k, j);
        track(alpha_sum / (s.chi_c_tilde(i, j) + 2.0 * cfg.eps_C + s.psi[j]));
        track((s.chi_c_tilde(i, j) + s.psi[j]) / alpha_sum);
      }
      if (i == j || !cand[i]) continue;
      double h = s.psi[i] * bounds.T_hat(i, j) + s.chi_t(i, j) / (s.psi[j] * s.alpha(i, j));
      double numerator = bounds.T_hat(i, j);
      if (cfg.coupling_mode) {
        double sum_hat = 0.0;
        for (int k = 0; k < n; ++k)
          if (cand[k] && k != i) sum_hat += s.chi_hat[i](j, k);
        h += s.psi[i] * sum_hat;
        numerator += sum_hat;
        for (int k = 0; k < n; ++k)
          if (cand[k] && k != i)
            track(1.0 / (s.psi[k] + s.chi_hat[i](j, k) / (s.psi[i] * s.alpha(k, i) *
                                                          coupling_value(bounds, i, j, k))));
      }
      track(numerator / h);
      track(s.alpha(i, j));
      track(cfg.eps_lo / s.alpha(i, j));
    }
  }
  return std::max(worst, 0.0);
}

}  // namespace

Mat resolve_alpha_fixed_psi(const BoundTerms& bounds, const Mat& K, const SolverConfig& cfg,
                            const std::vector<bool>& psi_binary, const Mat& warm_alpha,
                            std::vector<double>* refine_trace) {
  validate_config(cfg);
  validate_inputs(bounds, K, cfg);
  const int n = bounds.size();
  if (static_cast<int>(psi_binary.size()) != n)
    throw DomainError("resolve_alpha_fixed_psi: psi dimension mismatch");
  const std::vector<bool> cand = candidates_of(bounds);

  std::vector<int> sources, targets;
  for (int i = 0; i < n; ++i) {
    if (psi_binary[i]) targets.push_back(i);
    else if (cand[i]) sources.push_back(i);
  }
  if (targets.empty()) return Mat::Zero(n, n);
  if (sources.empty())
    throw DegeneratePlanError("resolve_alpha_fixed_psi: no candidate sources for the targets");

  const int ns = static_cast<int>(sources.size());
  const int nt = static_cast<int>(targets.size());
  const auto a_idx = [&](int si, int tj) { return si * nt + tj; };
  const auto t_idx = [&](int si, int tj) { return ns * nt + si * nt + tj; };
  const auto c_idx = [&](int tj) { return 2 * ns * nt + tj; };
  const int num_vars = 2 * ns * nt + nt;

  Vec x(num_vars);
  for (int si = 0; si < ns; ++si)
    for (int tj = 0; tj < nt; ++tj) {
      const double a = std::clamp(warm_alpha(sources[si], targets[tj]), cfg.eps_lo, 1.0);
      x[a_idx(si, tj)] = a;
      x[t_idx(si, tj)] = std::max(1.1 * a * bounds.T_hat(sources[si], targets[tj]), cfg.eps_lo);
    }
  for (int tj = 0; tj < nt; ++tj) x[c_idx(tj)] = cfg.eps_lo;

  auto objective_at = [&](const Vec& y) {
    double v = 0.0;
    for (int si = 0; si < ns; ++si)
      for (int tj = 0; tj < nt; ++tj) {
        v += cfg.phi_t * y[t_idx(si, tj)];
        v += cfg.phi_e * K(sources[si], targets[tj]) * y[a_idx(si, tj)] /
             (y[a_idx(si, tj)] + cfg.eps_E);
      }
    for (int tj = 0; tj < nt; ++tj) v += y[c_idx(tj)];
    return v;
  };

  double prev_obj = objective_at(x);
  if (refine_trace) refine_trace->push_back(prev_obj);
  // One condensed solve: restores the column sums through the equality
  // squeeze while keeping the relaxed phase's link shape. Iterating this
  // re-solve to convergence would drift every column toward a single link
  // (the energy term is concave on the weight simplex), erasing the relaxed
  // solution's structure.
  const int max_refine_iters = 1;
  for (int it = 0; it < max_refine_iters; ++it) {
    gp::GpSubproblem sub;
    sub.num_vars = num_vars;
    sub.expansion_point = x;

    for (int si = 0; si < ns; ++si)
      for (int tj = 0; tj < nt; ++tj) {
        if (cfg.phi_t > 0.0) sub.objective.add(Term{cfg.phi_t, {{t_idx(si, tj), 1.0}}});
        const double k_ij = K(sources[si], targets[tj]);
        if (cfg.phi_e > 0.0 && k_ij > 0.0) {
          Posynomial j_posy;
          j_posy.add(Term{1.0, {{a_idx(si, tj), 1.0}}});
          j_posy.add(Term{cfg.eps_E, {}});
          sub.objective.add(
              divide(Term{cfg.phi_e * k_ij, {{a_idx(si, tj), 1.0}}}, gp::ag_condense(j_posy, x)));
        }
        // alpha * T_hat <= chi_t is exact here: (1 - psi_i) psi_j = 1.
        sub.inequality_constraints.push_back(
            Posynomial(Term{bounds.T_hat(sources[si], targets[tj]),
                            {{a_idx(si, tj), 1.0}, {t_idx(si, tj), -1.0}}}));
        add_box_constraints(sub.inequality_constraints, a_idx(si, tj), cfg.eps_lo, 1.0);
        add_box_constraints(sub.inequality_constraints, t_idx(si, tj), cfg.eps_lo, 0.0);
      }
    for (int tj = 0; tj < nt; ++tj) {
      sub.objective.add(Term{1.0, {{c_idx(tj), 1.0}}});
      Posynomial m_plus;
      m_plus.add(Term{1.0, {{c_idx(tj), 1.0}}});
      m_plus.add(Term{2.0 * cfg.eps_C + 1.0, {}});
      const Term m_plus_hat = gp::ag_condense(m_plus, x);
      Posynomial alpha_sum;
      for (int si = 0; si < ns; ++si) alpha_sum.add(Term{1.0, {{a_idx(si, tj), 1.0}}});
      sub.inequality_constraints.push_back(times_monomial(alpha_sum, reciprocal(m_plus_hat)));

      const Term m_minus_hat = gp::ag_condense(alpha_sum, x);
      Posynomial numerator;
      numerator.add(Term{1.0, {{c_idx(tj), 1.0}}});
      numerator.add(Term{1.0, {}});
      sub.inequality_constraints.push_back(times_monomial(numerator, reciprocal(m_minus_hat)));
      add_box_constraints(sub.inequality_constraints, c_idx(tj), cfg.eps_lo, 0.0);
    }

    const gp::ConvexProgram prog = gp::log_transform(sub);
    const Vec warm = x.array().log().matrix();
    Vec z;
    try {
      z = solve_subproblem(prog, warm, cfg.subproblem).z;
    } catch (const SubproblemFailure& f) {
      z = f.best_iterate;
    }
    x = z.array().exp().matrix().cwiseMax(cfg.eps_lo);
    const double obj = objective_at(x);
    if (refine_trace) refine_trace->push_back(obj);
    if (it > 0 && std::abs(obj - prev_obj) / std::max(1.0, std::abs(prev_obj)) < cfg.outer_tol)
      break;
    prev_obj = obj;
  }

  Mat alpha = Mat::Zero(n, n);
  for (int si = 0; si < ns; ++si)
    for (int tj = 0; tj < nt; ++tj) alpha(sources[si], targets[tj]) = x[a_idx(si, tj)];
  return alpha;
}

LinkPlan make_plan_fixed_psi(const BoundTerms& bounds, const Mat& K, const SolverConfig& cfg,
                             const std::vector<bool>& psi_binary, const Mat& warm_alpha) {
  LinkPlan plan;
  plan.psi_binary = psi_binary;
  plan.refine_trace.clear();
  plan.alpha =
      resolve_alpha_fixed_psi(bounds, K, cfg, psi_binary, warm_alpha, &plan.refine_trace);
  const int n = bounds.size();
  for (int j : plan.targets()) {
    for (int i = 0; i < n; ++i)
      if (plan.alpha(i, j) < cfg.alpha_min) plan.alpha(i, j) = 0.0;
    const double sum = plan.alpha.col(j).sum();
    if (sum <= 0.0)
      throw DegeneratePlanError("solve: target column empty after link thresholding");
    plan.alpha.col(j) /= sum;
    // Pin the last nonzero entry so a natural-order accumulation of the
    // column gives exactly 1.0.
    int last = -1;
    for (int i = 0; i < n; ++i)
      if (plan.alpha(i, j) > 0.0) last = i;
    double partial = 0.0;
    for (int i = 0; i < last; ++i) partial += plan.alpha(i, j);
    plan.alpha(last, j) = 1.0 - partial;
  }
  for (int j : plan.targets())
    for (int i = 0; i < n; ++i)
      if (plan.alpha(i, j) > 0.0) plan.active_links.emplace_back(i, j);
  return plan;
}

IterateState solve_relaxed(const BoundTerms& bounds, const Mat& K, const SolverConfig& cfg,
                           const std::optional<IterateState>& init,
                           std::vector<TraceEntry>* trace) {
  validate_config(cfg);
  validate_inputs(bounds, K, cfg);
  const int n = bounds.size();
  const std::vector<bool> cand = candidates_of(bounds);
  const Layout lay(cand, cfg.coupling_mode);

  IterateState state = init.has_value() ? *init : default_init(bounds, cfg);
  if (state.psi.size() != n) throw DomainError("solve: init dimension mismatch");

  double prev_obj = std::numeric_limits<double>::quiet_NaN();
  for (int iter = 1; iter <= cfg.max_outer_iters; ++iter) {
    const gp::GpSubproblem sub = build_subproblem(bounds, K, state, cfg);
    const gp::ConvexProgram prog = gp::log_transform(sub);
    const Vec warm = sub.expansion_point.array().log().matrix();

    Vec z;
    double cond_obj_new = 0.0;
    try {
      const SubproblemResult res = solve_subproblem(prog, warm, cfg.subproblem);
      z = res.z;
      cond_obj_new = res.objective;
    } catch (const SubproblemFailure&) {
      if (iter == 1) throw;
      break;  // keep the last accepted iterate
    }

    // SCA descent guard: from a feasible expansion point, never accept a step
    // that increases the condensed objective.
    double warm_viol = 0.0;
    for (const auto& c : prog.constraints) warm_viol = std::max(warm_viol, c.value(warm));
    const double cond_obj_warm = prog.objective.value(warm);
    if (warm_viol <= 10.0 * cfg.subproblem.feas_tol && cond_obj_new > cond_obj_warm) break;

    state = unflatten(z.array().exp().matrix(), lay, cfg.eps_lo);
    state.outer_iter = iter;
    state.objective_value = true_objective(bounds, K, cfg, state);

    if (trace) {
      TraceEntry entry;
      entry.outer_iter = iter;
      entry.objective = state.objective_value;
      entry.max_constraint_violation = true_violation(bounds, cfg, state);
      entry.psi = state.psi;
      trace->push_back(std::move(entry));
    }

    if (iter >= 2 &&
        std::abs(state.objective_value - prev_obj) / std::max(1.0, std::abs(prev_obj)) <
            cfg.outer_tol)
      break;
    prev_obj = state.objective_value;
  }
  return state;
}

LinkPlan solve(const BoundTerms& bounds, const Mat& K, const SolverConfig& cfg,
               const std::optional<IterateState>& init) {
  const int n = bounds.size();
  const std::vector<bool> cand = candidates_of(bounds);

  LinkPlan plan;
  plan.relaxed = solve_relaxed(bounds, K, cfg, init, &plan.trace);
  const IterateState& state = plan.relaxed;
  for (const TraceEntry& e : plan.trace) plan.objective_trace.push_back(e.objective);

  // Threshold rounding.
  plan.psi_binary.resize(n);
  for (int i = 0; i < n; ++i) plan.psi_binary[i] = state.psi[i] > 0.5;
  plan.alpha = Mat::Zero(n, n);

  const std::vector<int> targets = plan.targets();
  if (targets.empty()) return plan;  // all sources, nothing to transfer

  bool any_feeding_source = false;
  for (int i = 0; i < n; ++i)
    if (!plan.psi_binary[i] && cand[i]) any_feeding_source = true;
  if (!any_feeding_source) {
    bool any_labeled = false;
    for (int i = 0; i < n; ++i)
      if (cand[i]) any_labeled = true;
    throw DegeneratePlanError(
        any_labeled ? "solve: every device rounded to target with labeled data present"
                    : "solve: every device rounded to target");
  }

  // Fixed-psi re-solve of alpha over candidate source rows.
  LinkPlan refined = make_plan_fixed_psi(bounds, K, cfg, plan.psi_binary, state.alpha);
  plan.alpha = std::move(refined.alpha);
  plan.active_links = std::move(refined.active_links);
  plan.refine_trace = std::move(refined.refine_trace);
  return plan;
}

double original_objective(const BoundTerms& bounds, const Mat& K, const SolverConfig& cfg,
                          const std::vector<bool>& psi, const Mat& alpha) {
  const int n = bounds.size();
  if (static_cast<int>(psi.size()) != n || alpha.rows() != n || alpha.cols() != n)
    throw DomainError("original_objective: dimension mismatch");
  double v = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!psi[i]) v += cfg.phi_s * bounds.S[i];
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (psi[j] && !psi[i]) v += cfg.phi_t * alpha(i, j) * bounds.T_hat(i, j);
      v += cfg.phi_e * K(i, j) * alpha(i, j) / (alpha(i, j) + cfg.eps_E);
    }
  }
  return v;
}

double plan_energy(const Mat& K, const Mat& alpha, double eps_E) {
  double v = 0.0;
  for (Eigen::Index i = 0; i < K.rows(); ++i)
    for (Eigen::Index j = 0; j < K.cols(); ++j)
      if (i != j && alpha(i, j) > 0.0) v += K(i, j) * alpha(i, j) / (alpha(i, j) + eps_E);
  return v;
}

}  // namespace stlf
