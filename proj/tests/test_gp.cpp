#include <doctest.h>

#include <cmath>

#include "stlf/gp.hpp"

using namespace stlf;
using gp::Posynomial;
using gp::Term;

TEST_SUITE_BEGIN("gp");

namespace {

Posynomial random_posynomial(Rng& rng, int num_vars, int max_terms) {
  Posynomial p;
  const int nt = 1 + rng.uniform_int(max_terms);
  for (int t = 0; t < nt; ++t) {
    Term term;
    term.coeff = std::exp(rng.uniform(-2.0, 2.0));
    for (int v = 0; v < num_vars; ++v)
      if (rng.uniform() < 0.7) term.powers.emplace_back(v, rng.uniform(-2.0, 2.0));
    p.add(std::move(term));
  }
  return p;
}

Vec random_point(Rng& rng, int num_vars) {
  Vec z(num_vars);
  for (int v = 0; v < num_vars; ++v) z[v] = std::exp(rng.uniform(-1.5, 1.5));
  return z;
}

}  // namespace

TEST_CASE("ag_condense worked example") {
  // g = y1 + y2 at z = (1, 3): weights (1/4, 3/4)
  Posynomial g;
  g.add(Term{1.0, {{0, 1.0}}});
  g.add(Term{1.0, {{1, 1.0}}});
  Vec z(2);
  z << 1.0, 3.0;
  const Term hat = gp::ag_condense(g, z);

  Vec probe(2);
  probe << 2.0, 2.0;
  // (8)^(1/4) * (8/3)^(3/4), frozen from a high-precision evaluation
  CHECK(hat.eval(probe) == doctest::Approx(3.5095307).epsilon(1e-6));
  CHECK(hat.eval(probe) <= g.eval(probe));
  CHECK(hat.eval(z) == doctest::Approx(g.eval(z)).epsilon(1e-12));  // = 4 at z
  CHECK(g.eval(z) == doctest::Approx(4.0));
}

TEST_CASE("single-term posynomials are fixed points") {
  Posynomial g(Term{2.5, {{0, 1.5}, {1, -0.5}}});
  Vec z(2);
  z << 0.7, 1.9;
  const Term hat = gp::ag_condense(g, z);
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const Vec y = random_point(rng, 2);
    CHECK(hat.eval(y) == doctest::Approx(g.eval(y)).epsilon(1e-12));
  }
}

TEST_CASE("ag_condense is a global lower bound with equality at the point") {
  Rng rng(42);
  for (int rep = 0; rep < 1000; ++rep) {
    const int nv = 1 + rng.uniform_int(4);
    const Posynomial p = random_posynomial(rng, nv, 5);
    const Vec z = random_point(rng, nv);
    const Term hat = gp::ag_condense(p, z);
    CHECK(std::abs(hat.eval(z) - p.eval(z)) <= 1e-9 * std::max(1.0, p.eval(z)));
    for (int probe = 0; probe < 5; ++probe) {
      const Vec y = random_point(rng, nv);
      CHECK(hat.eval(y) <= p.eval(y) * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("ag_condense rejects invalid inputs") {
  Posynomial bad;
  bad.add(Term{-1.0, {{0, 1.0}}});
  CHECK_THROWS_AS(gp::ag_condense(bad, Vec::Ones(1)), DomainError);
  Posynomial ok(Term{1.0, {{0, 1.0}}});
  ok.add(Term{1.0, {{0, 2.0}}});
  Vec zero = Vec::Zero(1);
  CHECK_THROWS_AS(gp::ag_condense(ok, zero), DomainError);
  CHECK_THROWS_AS(gp::ag_condense(Posynomial{}, Vec::Ones(1)), DomainError);
}

TEST_CASE("log transform of a monomial is affine") {
  // 2 y1^0.5 y2^-1 -> log 2 + 0.5 z1 - z2
  gp::GpSubproblem sub;
  sub.num_vars = 2;
  sub.objective.add(Term{2.0, {{0, 0.5}, {1, -1.0}}});
  const auto prog = gp::log_transform(sub);
  REQUIRE(prog.objective.terms.size() == 1);
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    Vec zp(2);
    zp << rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0);
    CHECK(prog.objective.value(zp) ==
          doctest::Approx(std::log(2.0) + 0.5 * zp[0] - zp[1]).epsilon(1e-12));
  }
}

TEST_CASE("log transform of a two-term posynomial is log-sum-exp") {
  gp::GpSubproblem sub;
  sub.num_vars = 2;
  sub.objective.add(Term{1.0, {{0, 1.0}}});
  sub.objective.add(Term{1.0, {{1, 1.0}}});
  const auto prog = gp::log_transform(sub);
  Vec zp(2);
  zp << 0.3, -1.2;
  CHECK(prog.objective.value(zp) ==
        doctest::Approx(std::log(std::exp(0.3) + std::exp(-1.2))).epsilon(1e-12));
}

TEST_CASE("transformed objectives are convex along random chords") {
  Rng rng(7);
  for (int rep = 0; rep < 100; ++rep) {
    const int nv = 2 + rng.uniform_int(3);
    gp::GpSubproblem sub;
    sub.num_vars = nv;
    sub.objective = random_posynomial(rng, nv, 5);
    const auto prog = gp::log_transform(sub);
    Vec za(nv), zb(nv);
    for (int v = 0; v < nv; ++v) {
      za[v] = rng.uniform(-2.0, 2.0);
      zb[v] = rng.uniform(-2.0, 2.0);
    }
    const double lambda = rng.uniform();
    const Vec mid = lambda * za + (1.0 - lambda) * zb;
    CHECK(prog.objective.value(mid) <=
          lambda * prog.objective.value(za) + (1.0 - lambda) * prog.objective.value(zb) + 1e-9);
  }
}

TEST_CASE("log transform rejects nonpositive coefficients") {
  gp::GpSubproblem sub;
  sub.num_vars = 1;
  sub.objective.add(Term{0.0, {{0, 1.0}}});
  CHECK_THROWS_AS(gp::log_transform(sub), DomainError);
}

TEST_CASE("lse gradient matches finite differences") {
  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const int nv = 3;
    gp::GpSubproblem sub;
    sub.num_vars = nv;
    sub.objective = random_posynomial(rng, nv, 4);
    const auto prog = gp::log_transform(sub);
    Vec z(nv);
    for (int v = 0; v < nv; ++v) z[v] = rng.uniform(-1.0, 1.0);
    Vec grad = Vec::Zero(nv);
    prog.objective.accumulate(z, 1.0, grad, nullptr);
    for (int v = 0; v < nv; ++v) {
      const double h = 1e-6;
      Vec zp = z, zm = z;
      zp[v] += h;
      zm[v] -= h;
      const double fd = (prog.objective.value(zp) - prog.objective.value(zm)) / (2.0 * h);
      CHECK(grad[v] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_SUITE_END();
