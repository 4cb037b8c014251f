#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "stlf/solver.hpp"

using namespace stlf;

TEST_SUITE_BEGIN("solver");

namespace {

// Solver-level fixture: explicit errors/sizes, fixed energy constant.
struct Fixture {
  BoundTerms bounds;
  Mat K;
  SolverConfig cfg;
};

Fixture make_fixture(const Vec& errs, const Vec& sizes, const Mat& d_raw, double k_value,
                     std::vector<bool> candidates = {}) {
  Fixture f;
  f.bounds = assemble_from_values(errs, sizes, inject(d_raw, DivergenceScale::kRaw02),
                                  BoundConfig{}, candidates);
  const int n = static_cast<int>(errs.size());
  f.K = Mat::Constant(n, n, k_value);
  f.K.diagonal().setZero();
  f.cfg.phi_s = 1.0;
  f.cfg.phi_t = 0.2;
  f.cfg.phi_e = 1.0;
  f.cfg.eps_E = 0.1;
  return f;
}

Fixture two_device_fixture() {
  Vec errs(2), sizes(2);
  errs << 0.1, 1.0;
  sizes << 100000, 100000;
  Mat d = Mat::Zero(2, 2);
  d(0, 1) = d(1, 0) = 0.1;
  Fixture f = make_fixture(errs, sizes, d, 0.55, {true, false});
  f.cfg.phi_t = 0.5;
  return f;
}

}  // namespace

TEST_CASE("condensed denominators equal their posynomials at the expansion point") {
  // F = psi + chi_s / S at psi = 0.5, chi_s = 0.25, S = 1 gives 0.75.
  gp::Posynomial f;
  f.add(gp::Term{1.0, {{0, 1.0}}});
  f.add(gp::Term{1.0, {{1, 1.0}}});  // S = 1
  Vec point(2);
  point << 0.5, 0.25;
  CHECK(f.eval(point) == doctest::Approx(0.75));
  const gp::Term f_hat = gp::ag_condense(f, point);
  CHECK(f_hat.eval(point) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("subproblem structure: variables, constraints, and mode gating") {
  Vec errs(3), sizes(3);
  errs << 0.2, 0.4, 1.0;
  sizes << 1000, 1000, 1000;
  Mat d = Mat::Zero(3, 3);
  Fixture f = make_fixture(errs, sizes, d, 0.3);

  const IterateState init = default_init(f.bounds, f.cfg);
  const gp::GpSubproblem sub = build_subproblem(f.bounds, f.K, init, f.cfg);
  CHECK(sub.variable_index.count("psi[0]") == 1);
  CHECK(sub.variable_index.count("alpha[0,1]") == 1);
  CHECK(sub.variable_index.count("chi_s[2]") == 1);
  CHECK(sub.variable_index.count("chi_t[1,2]") == 1);
  CHECK(sub.variable_index.count("chi_c[2,2]") == 1);
  CHECK(sub.variable_index.count("chi_hat[0,1][2]") == 0);  // coupling off
  CHECK(sub.num_vars == static_cast<int>(sub.variable_index.size()));
  for (const auto& c : sub.inequality_constraints)
    for (const auto& t : c.terms) CHECK(t.coeff > 0.0);

  SolverConfig coupled = f.cfg;
  coupled.coupling_mode = true;
  CHECK_THROWS_AS(build_subproblem(f.bounds, f.K, init, coupled), ConfigError);
  f.bounds.coupling_disagreement.assign(3, Mat::Constant(3, 3, 0.25));
  const IterateState init2 = default_init(f.bounds, coupled);
  const gp::GpSubproblem sub2 = build_subproblem(f.bounds, f.K, init2, coupled);
  CHECK(sub2.variable_index.count("chi_hat[0,1][2]") == 1);
  CHECK(sub2.num_vars > sub.num_vars);
}

TEST_CASE("condensed constraints hold at a feasible expansion point") {
  Vec errs(3), sizes(3);
  errs << 0.2, 0.4, 1.0;
  sizes << 1000, 1000, 1000;
  Mat d = Mat::Zero(3, 3);
  Fixture f = make_fixture(errs, sizes, d, 0.3);

  // Build a strictly feasible iterate by hand: psi mid-range, column sums
  // just above psi, auxiliaries with slack.
  IterateState s;
  const int n = 3;
  s.psi = Vec::Constant(n, 0.4);
  s.alpha = Mat::Constant(n, n, (0.4 + 0.005) / 2);
  s.alpha.diagonal().setZero();
  s.chi_s.resize(n);
  for (int i = 0; i < n; ++i) s.chi_s[i] = 1.2 * (1.0 - s.psi[i]) * f.bounds.S[i];
  s.chi_t = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) s.chi_t(i, j) = 1.2 * (1.0 - s.psi[i]) * s.psi[j] * s.alpha(i, j) *
                                  f.bounds.T_hat(i, j);
  s.chi_c_tilde = Mat::Constant(n, n, 0.004);

  const gp::GpSubproblem sub = build_subproblem(f.bounds, f.K, s, f.cfg);
  const Vec x0 = sub.expansion_point;
  for (const auto& c : sub.inequality_constraints) CHECK(c.eval(x0) <= 1.0 + 1e-9);
}

TEST_CASE("condensed constraint sides are sound on random positive points") {
  Vec errs(3), sizes(3);
  errs << 0.2, 0.4, 1.0;
  sizes << 500, 2000, 800;
  Mat d = Mat::Zero(3, 3);
  d(0, 1) = d(1, 0) = 0.6;
  d(0, 2) = d(2, 0) = 1.2;
  d(1, 2) = d(2, 1) = 0.3;
  Fixture f = make_fixture(errs, sizes, d, 0.3);

  // H condensation: condensed LHS >= true LHS everywhere sampled.
  const IterateState init = default_init(f.bounds, f.cfg);
  const gp::GpSubproblem sub = build_subproblem(f.bounds, f.K, init, f.cfg);
  Rng rng(99);
  // constraint order: 3 F entries first, then 6 H entries
  for (int idx = 3; idx < 9; ++idx) {
    const auto& condensed = sub.inequality_constraints[idx];
    // recover (i, j) for this H constraint
    const int pairs[6][2] = {{0, 1}, {0, 2}, {1, 0}, {1, 2}, {2, 0}, {2, 1}};
    const int i = pairs[idx - 3][0], j = pairs[idx - 3][1];
    for (int rep = 0; rep < 1000; ++rep) {
      Vec y(sub.num_vars);
      for (int v = 0; v < sub.num_vars; ++v) y[v] = std::exp(rng.uniform(-2.0, 2.0));
      const double psi_i = y[sub.variable_index.at("psi[" + std::to_string(i) + "]")];
      const double psi_j = y[sub.variable_index.at("psi[" + std::to_string(j) + "]")];
      const double a_ij = y[sub.variable_index.at("alpha[" + std::to_string(i) + "," +
                                                  std::to_string(j) + "]")];
      const double chi_t = y[sub.variable_index.at("chi_t[" + std::to_string(i) + "," +
                                                   std::to_string(j) + "]")];
      const double h_true = psi_i * f.bounds.T_hat(i, j) + chi_t / (psi_j * a_ij);
      const double true_lhs = f.bounds.T_hat(i, j) / h_true;
      CHECK(condensed.eval(y) >= true_lhs - 1e-9);
    }
    // equality at the expansion point
    const double at_x0 = condensed.eval(sub.expansion_point);
    const double psi_i0 = 0.5, a0 = 0.5 / 3.0;
    const double chi_t0 = std::max(1.1 * 0.25 * a0 * f.bounds.T_hat(i, j), f.cfg.eps_lo);
    const double h0 = psi_i0 * f.bounds.T_hat(i, j) + chi_t0 / (0.5 * a0);
    CHECK(at_x0 == doctest::Approx(f.bounds.T_hat(i, j) / h0).epsilon(1e-9));
  }
}

TEST_CASE("two-device instance: classification, descent, and brute-force proximity") {
  Fixture f = two_device_fixture();
  const LinkPlan plan = solve(f.bounds, f.K, f.cfg);

  // labeled device stays the source, unlabeled becomes the target
  CHECK_FALSE(plan.psi_binary[0]);
  CHECK(plan.psi_binary[1]);
  CHECK(plan.alpha(0, 1) == 1.0);
  CHECK(plan.alpha(1, 0) == 0.0);

  // monotone objective trace
  for (std::size_t k = 1; k < plan.objective_trace.size(); ++k)
    CHECK(plan.objective_trace[k] <= plan.objective_trace[k - 1] + 1e-8);

  // rounded plan matches exhaustive search on the original objective
  const auto brute = oracle::brute_force(f.bounds, f.K, f.cfg, 0.01);
  REQUIRE(brute.has_value());
  const double got = oracle::brute_objective(f.bounds, f.K, f.cfg, plan.psi_binary, plan.alpha);
  CHECK(std::abs(got - brute->objective) <= 1e-2);
  CHECK(brute->psi == plan.psi_binary);
}

TEST_CASE("equality squeeze is tight before renormalization") {
  Fixture f = two_device_fixture();
  const LinkPlan plan = solve(f.bounds, f.K, f.cfg);
  // column 1 has feeder {0}: |sum alpha - psi_1| <= 2 eps_C on the relaxed iterate
  CHECK(std::abs(plan.relaxed.alpha(0, 1) - plan.relaxed.psi[1]) <= 2.0 * f.cfg.eps_C + 1e-5);
  // column 0 has no feeders (device 1 is not a candidate): psi_0 pinned near 0
  CHECK(plan.relaxed.psi[0] <= 2.0 * f.cfg.eps_C + 1e-5);
}

TEST_CASE("limiting weights: phi_t = phi_e = 0 sends every relaxed psi to the upper bound") {
  Vec errs(4), sizes(4);
  errs << 0.2, 0.3, 1.0, 1.0;
  sizes << 1000, 1000, 1000, 1000;
  Mat d = Mat::Zero(4, 4);
  Fixture f = make_fixture(errs, sizes, d, 0.3);
  f.cfg.phi_t = 0.0;
  f.cfg.phi_e = 0.0;
  const IterateState relaxed = solve_relaxed(f.bounds, f.K, f.cfg);
  for (int i = 0; i < 4; ++i) CHECK(relaxed.psi[i] >= 0.9);
  CHECK_THROWS_AS(solve(f.bounds, f.K, f.cfg), DegeneratePlanError);
}

TEST_CASE("limiting weights: phi_s = phi_e = 0 keeps every relaxed psi low") {
  Vec errs(4), sizes(4);
  errs << 0.2, 0.3, 1.0, 1.0;
  sizes << 1000, 1000, 1000, 1000;
  Mat d = Mat::Zero(4, 4);
  Fixture f = make_fixture(errs, sizes, d, 0.3);
  f.cfg.phi_s = 0.0;
  f.cfg.phi_e = 0.0;
  f.cfg.phi_t = 0.5;
  const LinkPlan plan = solve(f.bounds, f.K, f.cfg);
  for (int i = 0; i < 4; ++i) CHECK(plan.relaxed.psi[i] <= 0.5);
  CHECK(plan.num_targets() == 0);
}

TEST_CASE("energy is non-increasing along a phi_e sweep") {
  Vec errs(6), sizes(6);
  Mat d = Mat::Zero(6, 6);
  Rng rng(5);
  for (int i = 0; i < 6; ++i) {
    errs[i] = i < 3 ? 0.05 : 1.0;
    sizes[i] = 100000;
  }
  for (int i = 0; i < 6; ++i)
    for (int j = i + 1; j < 6; ++j) d(i, j) = d(j, i) = rng.uniform(0.1, 0.6);
  std::vector<bool> cand{true, true, true, false, false, false};
  Fixture f = make_fixture(errs, sizes, d, 17.0, cand);
  f.cfg.phi_t = 0.1;

  double prev_energy = std::numeric_limits<double>::infinity();
  int prev_links = std::numeric_limits<int>::max();
  for (double phi_e : {1e-2, 1e0, 1e2, 1e4}) {
    SolverConfig cfg = f.cfg;
    cfg.phi_e = phi_e;
    const LinkPlan plan = solve(f.bounds, f.K, cfg);
    const double energy = plan_energy(f.K, plan.alpha, cfg.eps_E);
    CHECK(energy <= prev_energy + 1e-9);
    CHECK(static_cast<int>(plan.active_links.size()) <= prev_links);
    prev_energy = energy;
    prev_links = static_cast<int>(plan.active_links.size());
  }
}

TEST_CASE("high-error labeled device is reclassified as a target") {
  const int n = 10;
  Vec errs(n), sizes(n);
  std::vector<bool> cand(n);
  for (int i = 0; i < n; ++i) {
    errs[i] = i < 5 ? 0.1 : 1.0;
    sizes[i] = 100000;
    cand[i] = i < 5;
  }
  errs[2] = 0.9;
  Mat d = Mat::Constant(n, n, 0.2);
  d.diagonal().setZero();
  Fixture f = make_fixture(errs, sizes, d, 0.17, cand);
  f.cfg.phi_t = 0.2;
  const LinkPlan plan = solve(f.bounds, f.K, f.cfg);
  CHECK(plan.psi_binary[2]);        // the poor device turns target
  CHECK_FALSE(plan.psi_binary[0]);  // good devices stay sources
  CHECK_FALSE(plan.psi_binary[1]);
}

TEST_CASE("coupling mode adds its block and keeps descent") {
  Vec errs(3), sizes(3);
  errs << 0.2, 0.4, 1.0;
  sizes << 1000, 1000, 1000;
  Mat d = Mat::Zero(3, 3);
  Fixture f = make_fixture(errs, sizes, d, 0.3, {true, true, false});
  f.cfg.coupling_mode = true;
  f.bounds.coupling_disagreement.assign(3, Mat::Constant(3, 3, 0.3));
  std::vector<TraceEntry> trace;
  const IterateState relaxed = solve_relaxed(f.bounds, f.K, f.cfg, std::nullopt, &trace);
  REQUIRE(trace.size() >= 2);
  for (std::size_t k = 1; k < trace.size(); ++k)
    CHECK(trace[k].objective <= trace[k - 1].objective + 1e-8);
  REQUIRE_FALSE(relaxed.chi_hat.empty());
  CHECK(relaxed.chi_hat[0](1, 1) >= f.cfg.eps_lo);
  // coupling-on transfer pressure only raises target-side cost
  CHECK(trace.back().max_constraint_violation <= 1e-6);
}

TEST_CASE("rounded plans satisfy the link-plan invariants") {
  Fixture f = two_device_fixture();
  const LinkPlan plan = solve(f.bounds, f.K, f.cfg);
  for (int j : plan.targets()) {
    double sum = 0.0;
    for (int i = 0; i < 2; ++i) sum += plan.alpha(i, j);
    CHECK(sum == 1.0);  // exact after renormalization
  }
  for (int j : plan.sources()) CHECK(plan.alpha.col(j).sum() == 0.0);
  for (const auto& [i, j] : plan.active_links) {
    CHECK_FALSE(plan.psi_binary[i]);
    CHECK(plan.psi_binary[j]);
    CHECK(plan.alpha(i, j) >= f.cfg.alpha_min);
  }
}

TEST_CASE("invalid solver inputs are rejected") {
  Fixture f = two_device_fixture();
  SolverConfig bad = f.cfg;
  bad.eps_lo = bad.eps_C;
  CHECK_THROWS_AS(solve(f.bounds, f.K, bad), ConfigError);
  Mat wrong = Mat::Zero(3, 3);
  CHECK_THROWS_AS(solve(f.bounds, wrong, f.cfg), DomainError);
  Vec errs(1), sizes(1);
  errs << 0.2;
  sizes << 100;
  Mat d1 = Mat::Zero(1, 1);
  const BoundTerms single = assemble_from_values(errs, sizes, inject(d1, DivergenceScale::kRaw02),
                                                 BoundConfig{});
  CHECK_THROWS_AS(solve(single, Mat::Zero(1, 1), f.cfg), DomainError);
}

TEST_SUITE_END();
