#include "stlf/bounds.hpp"

#include <cmath>
#include <iostream>

namespace stlf {

namespace {

void check_delta(const BoundConfig& cfg) {
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
}

double confidence_term(std::int64_t n, double delta) {
  return std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(n)));
}

}  // namespace

double rad_bound(std::int64_t n) {
  if (n < 1) throw DomainError("rad_bound: n must be >= 1");
  const double nn = static_cast<double>(n);
  return std::sqrt(2.0 * std::log(nn) / nn);
}

double source_cost(double emp_err, std::int64_t n, const BoundConfig& cfg) {
  check_delta(cfg);
  if (emp_err < 0.0 || emp_err > 1.0) throw DomainError("source_cost: emp_err outside [0, 1]");
  if (n < 1) throw DomainError("source_cost: n must be >= 1");
  return emp_err + 2.0 * rad_bound(n) + 3.0 * confidence_term(n, cfg.delta);
}

TransferComponents transfer_components(double emp_err_i, std::int64_t n_i, std::int64_t n_j,
                                       double d_hat_raw, std::optional<double> coupling,
                                       const BoundConfig& cfg, std::optional<double> label_gap) {
  check_delta(cfg);
  if (emp_err_i < 0.0 || emp_err_i > 1.0)
    throw DomainError("transfer_cost: emp_err outside [0, 1]");
  if (n_i < 1 || n_j < 1) throw DomainError("transfer_cost: sizes must be >= 1");
  if (d_hat_raw < 0.0 || d_hat_raw > 2.0)
    throw DomainError("transfer_cost: d_hat_raw outside [0, 2]");
  if (coupling.has_value() && !cfg.include_hypothesis_coupling)
    throw UsageError("transfer_cost: coupling value supplied while the flag is off");
  if (label_gap.has_value() && !cfg.include_label_fn_gap)
    throw UsageError("transfer_cost: label_gap value supplied while the flag is off");

  TransferComponents c;
  c.emp_err = emp_err_i;
  c.rad_source = 4.0 * rad_bound(n_i);
  c.conf_source = 6.0 * confidence_term(n_i, cfg.delta);
  c.divergence = 0.5 * d_hat_raw;
  c.rad_target = 6.0 * rad_bound(n_j);
  c.conf_target = 6.0 * confidence_term(n_j, cfg.delta);
  if (cfg.include_hypothesis_coupling) c.coupling = coupling.value_or(0.0);
  if (cfg.include_label_fn_gap) c.label_gap = label_gap.value_or(0.0);
  return c;
}

double transfer_cost(int /*i*/, int /*j*/, double emp_err_i, std::int64_t n_i, std::int64_t n_j,
                     double d_hat_raw, std::optional<double> coupling, const BoundConfig& cfg,
                     std::optional<double> label_gap) {
  return transfer_components(emp_err_i, n_i, n_j, d_hat_raw, coupling, cfg, label_gap).total();
}

BoundTerms assemble_from_values(const Vec& emp_errs, const Vec& device_sizes,
                                const DivergenceMatrix& div, const BoundConfig& cfg,
                                const std::vector<bool>& candidate_sources) {
  check_delta(cfg);
  const int n = static_cast<int>(emp_errs.size());
  if (device_sizes.size() != n || div.size() != n)
    throw DomainError("assemble: dimension mismatch between errors, sizes, and divergences");
  if (!candidate_sources.empty() && static_cast<int>(candidate_sources.size()) != n)
    throw DomainError("assemble: candidate_sources length mismatch");

  BoundTerms out;
  out.device_sizes = device_sizes;
  out.candidate_sources =
      candidate_sources.empty() ? std::vector<bool>(n, true) : candidate_sources;
  out.rescaled_from_normalized = div.scale == DivergenceScale::kNormalized01;
  if (out.rescaled_from_normalized)
    std::clog << "bounds: rescaling normalized divergence matrix to raw [0,2] scale\n";
  const Mat d_raw = div.raw();

  out.S.resize(n);
  out.T_hat.resize(n, n);
  out.s_components.resize(n);
  out.t_components.assign(n, std::vector<TransferComponents>(n));

  for (int i = 0; i < n; ++i) {
    const auto n_i = static_cast<std::int64_t>(device_sizes[i]);
    SourceComponents sc;
    sc.emp_err = emp_errs[i];
    sc.rad = 2.0 * rad_bound(n_i);
    sc.conf = 3.0 * confidence_term(n_i, cfg.delta);
    out.s_components[i] = sc;
    out.S[i] = source_cost(emp_errs[i], n_i, cfg);
    for (int j = 0; j < n; ++j) {
      const auto n_j = static_cast<std::int64_t>(device_sizes[j]);
      const TransferComponents tc =
          transfer_components(emp_errs[i], n_i, n_j, d_raw(i, j), std::nullopt, cfg);
      out.t_components[i][j] = tc;
      out.T_hat(i, j) = tc.total();
    }
  }
  return out;
}

BoundTerms assemble(const Scenario& scenario, const DivergenceMatrix& div, const Vec& emp_errs,
                    const BoundConfig& cfg) {
  if (static_cast<int>(scenario.devices.size()) != emp_errs.size())
    throw DomainError("assemble: emp_errs length does not match device count");
  Vec sizes(scenario.num_devices);
  std::vector<bool> candidates(scenario.num_devices);
  for (int i = 0; i < scenario.num_devices; ++i) {
    sizes[i] = scenario.devices[i].size();
    candidates[i] = scenario.devices[i].labeled_count() > 0;
  }
  return assemble_from_values(emp_errs, sizes, div, cfg, candidates);
}

}  // namespace stlf
