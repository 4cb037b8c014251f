#pragma once

#include <cstdint>
#include <string>

#include "stlf/divergence.hpp"
#include "stlf/scenario.hpp"
#include "stlf/solver.hpp"

namespace stlf {

enum class BaselineName {
  kRandomAlpha,     // Dirichlet link weights over the sources
  kFedavgAlpha,     // weights proportional to sources' labeled dataset sizes
  kAvgDegree,       // reference plan's average links per source, random placement
  kRandomPsi,       // random source/target split, then Dirichlet weights
  kPsiFedavg,       // heuristic labeled-as-source split with FedAvg weights
  kSingleMatching,  // one-hot minimum-divergence source per target
};

enum class PsiSource { kFromStlf, kHeuristicLabeled, kRandom };

BaselineName parse_baseline_name(const std::string& name);
std::string to_string(BaselineName name);

struct BaselineSpec {
  BaselineName name = BaselineName::kRandomAlpha;
  std::uint64_t seed = 0;
  PsiSource psi_source = PsiSource::kFromStlf;
};

// Produces a LinkPlan without solving the optimization. `reference` is
// required for the from_stlf psi source and for avg_degree link counting.
LinkPlan run_baseline(const BaselineSpec& spec, const Scenario& scenario,
                      const DivergenceMatrix& div, const LinkPlan* reference);

}  // namespace stlf
