#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "stlf/common.hpp"
#include "stlf/divergence.hpp"
#include "stlf/scenario.hpp"

namespace stlf {

struct BoundConfig {
  double delta = 0.05;                       // confidence level 1 - delta
  bool include_hypothesis_coupling = false;  // extra target-side comparison term
  bool include_label_fn_gap = false;         // ground-truth labeling gap term
};

// Per-entry breakdown of a transfer cost, kept for reporting/audit.
struct TransferComponents {
  double emp_err = 0.0;
  double rad_source = 0.0;   // 4 * rad_bound(n_i)
  double conf_source = 0.0;  // 6 * sqrt(log(2/delta) / (2 n_i))
  double divergence = 0.0;   // d_hat_raw / 2
  double rad_target = 0.0;   // 6 * rad_bound(n_j)
  double conf_target = 0.0;  // 6 * sqrt(log(2/delta) / (2 n_j))
  double coupling = 0.0;
  double label_gap = 0.0;
  double total() const {
    return emp_err + rad_source + conf_source + divergence + rad_target + conf_target + coupling +
           label_gap;
  }
};

struct SourceComponents {
  double emp_err = 0.0;
  double rad = 0.0;   // 2 * rad_bound(n)
  double conf = 0.0;  // 3 * sqrt(log(2/delta) / (2 n))
  double total() const { return emp_err + rad + conf; }
};

struct BoundTerms {
  Vec S;                                                // per-device source cost
  Mat T_hat;                                            // row = source, column = target
  std::vector<SourceComponents> s_components;           // per device
  std::vector<std::vector<TransferComponents>> t_components;  // [i][j]
  Vec device_sizes;                                     // n_i used in assembly
  // Devices that can act as sources: only they hold a trainable hypothesis,
  // so only their rows carry link weights in the optimization.
  std::vector<bool> candidate_sources;
  bool rescaled_from_normalized = false;

  // Optional pairwise-hypothesis disagreement tensor for the solver's
  // coupling mode: coupling_disagreement[j](k, i) is the disagreement of
  // source hypotheses k and i measured on device j's data.
  std::vector<Mat> coupling_disagreement;

  int size() const { return static_cast<int>(S.size()); }
};

// Massart's closed form for a binary hypothesis space: sqrt(2 ln n / n).
double rad_bound(std::int64_t n);

// emp_err + 2*rad_bound(n) + 3*sqrt(ln(2/delta) / (2n)).
double source_cost(double emp_err, std::int64_t n, const BoundConfig& cfg);

// Transfer cost from source i to target j; d_hat_raw on the [0,2] scale.
// `coupling` and `label_gap` may only be supplied when the matching config
// flag is on.
double transfer_cost(int i, int j, double emp_err_i, std::int64_t n_i, std::int64_t n_j,
                     double d_hat_raw, std::optional<double> coupling, const BoundConfig& cfg,
                     std::optional<double> label_gap = std::nullopt);

TransferComponents transfer_components(double emp_err_i, std::int64_t n_i, std::int64_t n_j,
                                       double d_hat_raw, std::optional<double> coupling,
                                       const BoundConfig& cfg,
                                       std::optional<double> label_gap = std::nullopt);

// Fills S and T_hat for every ordered pair from per-device empirical errors
// and the divergence matrix. Normalized matrices are rescaled to raw first.
BoundTerms assemble(const Scenario& scenario, const DivergenceMatrix& div, const Vec& emp_errs,
                    const BoundConfig& cfg);

// Assembly from explicit sizes, for solver-level experiments that have no
// materialized datasets. Every device is a candidate source unless a mask is
// given.
BoundTerms assemble_from_values(const Vec& emp_errs, const Vec& device_sizes,
                                const DivergenceMatrix& div, const BoundConfig& cfg,
                                const std::vector<bool>& candidate_sources = {});

}  // namespace stlf
