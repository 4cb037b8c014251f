#pragma once

// Test-only reference implementations, kept independent of the library code
// paths they check.

#include <cmath>
#include <optional>
#include <vector>

#include "stlf/bounds.hpp"
#include "stlf/solver.hpp"

namespace oracle {

// Bound arithmetic recomputed from the printed formulas in long double.
inline double rad_ref(long long n) {
  const long double nn = static_cast<long double>(n);
  return static_cast<double>(std::sqrt(2.0L * std::log(nn) / nn));
}

inline double source_cost_ref(double emp, long long n, double delta) {
  const long double nn = static_cast<long double>(n);
  return static_cast<double>(emp + 2.0L * std::sqrt(2.0L * std::log(nn) / nn) +
                             3.0L * std::sqrt(std::log(2.0L / delta) / (2.0L * nn)));
}

inline double transfer_cost_ref(double emp, long long ni, long long nj, double d_raw,
                                double delta, double coupling = 0.0, double gap = 0.0) {
  const long double a = static_cast<long double>(ni);
  const long double b = static_cast<long double>(nj);
  const long double conf = std::log(2.0L / delta);
  return static_cast<double>(emp + 4.0L * std::sqrt(2.0L * std::log(a) / a) +
                             6.0L * std::sqrt(conf / (2.0L * a)) + 0.5L * d_raw +
                             6.0L * std::sqrt(2.0L * std::log(b) / b) +
                             6.0L * std::sqrt(conf / (2.0L * b)) + coupling + gap);
}

// Exhaustive search over binary classifications and a per-column weight grid.
// Columns are independent given psi, so each target column is minimized on
// its own simplex grid. Self links and links from non-candidates stay at 0.
struct BruteResult {
  std::vector<bool> psi;
  stlf::Mat alpha;
  double objective = 0.0;
};

inline double brute_objective(const stlf::BoundTerms& b, const stlf::Mat& K,
                              const stlf::SolverConfig& cfg, const std::vector<bool>& psi,
                              const stlf::Mat& alpha) {
  const int n = b.size();
  double v = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!psi[i]) v += cfg.phi_s * b.S[i];
    for (int j = 0; j < n; ++j) {
      if (i == j || alpha(i, j) <= 0.0) continue;
      if (psi[j] && !psi[i]) v += cfg.phi_t * alpha(i, j) * b.T_hat(i, j);
      v += cfg.phi_e * K(i, j) * alpha(i, j) / (alpha(i, j) + cfg.eps_E);
    }
  }
  return v;
}

// Recursive grid enumeration of one target column over its feeder rows.
inline void best_column(const stlf::BoundTerms& b, const stlf::Mat& K,
                        const stlf::SolverConfig& cfg, const std::vector<bool>& psi,
                        const std::vector<int>& feeders, int j, int steps, int pos, int left,
                        std::vector<int>& units, double& best, std::vector<int>& best_units) {
  const int nf = static_cast<int>(feeders.size());
  if (pos == nf - 1) {
    units[pos] = left;
    double v = 0.0;
    for (int f = 0; f < nf; ++f) {
      const double a = static_cast<double>(units[f]) / steps;
      if (a <= 0.0) continue;
      const int i = feeders[f];
      if (!psi[i]) v += cfg.phi_t * a * b.T_hat(i, j);
      v += cfg.phi_e * K(i, j) * a / (a + cfg.eps_E);
    }
    if (v < best) {
      best = v;
      best_units = units;
    }
    return;
  }
  for (int u = 0; u <= left; ++u) {
    units[pos] = u;
    best_column(b, K, cfg, psi, feeders, j, steps, pos + 1, left - u, units, best, best_units);
  }
}

inline std::optional<BruteResult> brute_force(const stlf::BoundTerms& b, const stlf::Mat& K,
                                              const stlf::SolverConfig& cfg, double grid_step) {
  const int n = b.size();
  const int steps = static_cast<int>(std::lround(1.0 / grid_step));
  std::vector<bool> cand(n, true);
  if (!b.candidate_sources.empty()) cand = b.candidate_sources;

  std::optional<BruteResult> best;
  for (int mask = 0; mask < (1 << n); ++mask) {
    std::vector<bool> psi(n);
    for (int i = 0; i < n; ++i) psi[i] = (mask >> i) & 1;

    stlf::Mat alpha = stlf::Mat::Zero(n, n);
    double total = 0.0;
    for (int i = 0; i < n; ++i)
      if (!psi[i]) total += cfg.phi_s * b.S[i];

    bool feasible = true;
    for (int j = 0; j < n && feasible; ++j) {
      if (!psi[j]) continue;  // source column carries no weights
      std::vector<int> feeders;
      for (int k = 0; k < n; ++k)
        if (cand[k] && k != j) feeders.push_back(k);
      if (feeders.empty()) {
        feasible = false;  // target column cannot sum to 1
        break;
      }
      std::vector<int> units(feeders.size(), 0), best_units(feeders.size(), 0);
      double best_v = std::numeric_limits<double>::infinity();
      best_column(b, K, cfg, psi, feeders, j, steps, 0, steps, units, best_v, best_units);
      total += best_v;
      for (std::size_t f = 0; f < feeders.size(); ++f)
        alpha(feeders[f], j) = static_cast<double>(best_units[f]) / steps;
    }
    if (!feasible) continue;
    if (!best || total < best->objective) best = BruteResult{psi, alpha, total};
  }
  return best;
}

}  // namespace oracle
