#include "stlf/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace stlf {

BaselineName parse_baseline_name(const std::string& name) {
  if (name == "random_alpha") return BaselineName::kRandomAlpha;
  if (name == "fedavg_alpha") return BaselineName::kFedavgAlpha;
  if (name == "avg_degree") return BaselineName::kAvgDegree;
  if (name == "random_psi") return BaselineName::kRandomPsi;
  if (name == "psi_fedavg") return BaselineName::kPsiFedavg;
  if (name == "single_matching") return BaselineName::kSingleMatching;
  throw ConfigError("unknown baseline name: '" + name + "'");
}

std::string to_string(BaselineName name) {
  switch (name) {
    case BaselineName::kRandomAlpha: return "random_alpha";
    case BaselineName::kFedavgAlpha: return "fedavg_alpha";
    case BaselineName::kAvgDegree: return "avg_degree";
    case BaselineName::kRandomPsi: return "random_psi";
    case BaselineName::kPsiFedavg: return "psi_fedavg";
    case BaselineName::kSingleMatching: return "single_matching";
  }
  return "?";
}

namespace {

std::vector<bool> resolve_psi(const BaselineSpec& spec, const Scenario& scenario,
                              const LinkPlan* reference, Rng& rng) {
  const int n = scenario.num_devices;
  std::vector<bool> psi(n, false);
  switch (spec.psi_source) {
    case PsiSource::kFromStlf:
      if (!reference) throw UsageError("baseline: psi_source=from_stlf needs a reference plan");
      return reference->psi_binary;
    case PsiSource::kHeuristicLabeled: {
      bool any_source = false;
      for (int i = 0; i < n; ++i) {
        psi[i] = scenario.devices[i].labeled_count() == 0;  // unlabeled -> target
        any_source = any_source || !psi[i];
      }
      if (!any_source) throw DegeneratePlanError("baseline: no labeled device to act as source");
      return psi;
    }
    case PsiSource::kRandom: {
      // Redraw until at least one source exists.
      for (;;) {
        bool any_source = false;
        for (int i = 0; i < n; ++i) {
          psi[i] = rng.uniform() < 0.5;
          any_source = any_source || !psi[i];
        }
        if (any_source) return psi;
      }
    }
  }
  throw ConfigError("baseline: bad psi_source");
}

void normalize_column_exact(Mat& alpha, int j) {
  const double sum = alpha.col(j).sum();
  if (sum <= 0.0) throw DegeneratePlanError("baseline: target column has no links");
  alpha.col(j) /= sum;
  // Pin the last nonzero entry so a natural-order accumulation of the column
  // gives exactly 1.0.
  int last = -1;
  for (Eigen::Index i = 0; i < alpha.rows(); ++i)
    if (alpha(i, j) > 0.0) last = static_cast<int>(i);
  double partial = 0.0;
  for (int i = 0; i < last; ++i) partial += alpha(i, j);
  alpha(last, j) = 1.0 - partial;
}

}  // namespace

LinkPlan run_baseline(const BaselineSpec& spec, const Scenario& scenario,
                      const DivergenceMatrix& div, const LinkPlan* reference) {
  const int n = scenario.num_devices;
  if (div.size() != n) throw DomainError("baseline: divergence matrix size mismatch");
  if ((spec.name == BaselineName::kAvgDegree || spec.psi_source == PsiSource::kFromStlf) &&
      reference == nullptr)
    throw UsageError("baseline: " + to_string(spec.name) + " needs a reference plan");

  Rng rng(Rng::derive(spec.seed, 0xBA5E, static_cast<std::uint64_t>(spec.name)));

  LinkPlan plan;
  plan.psi_binary = resolve_psi(spec, scenario, reference, rng);
  plan.alpha = Mat::Zero(n, n);
  const std::vector<int> sources = plan.sources();
  const std::vector<int> targets = plan.targets();
  if (sources.empty()) throw DegeneratePlanError("baseline: no sources after psi assignment");
  if (targets.empty()) return plan;

  switch (spec.name) {
    case BaselineName::kRandomAlpha:
    case BaselineName::kRandomPsi: {
      for (int j : targets) {
        const Vec w = rng.dirichlet(1.0, static_cast<int>(sources.size()));
        for (std::size_t s = 0; s < sources.size(); ++s) plan.alpha(sources[s], j) = w[static_cast<int>(s)];
        normalize_column_exact(plan.alpha, j);
      }
      break;
    }
    case BaselineName::kFedavgAlpha:
    case BaselineName::kPsiFedavg: {
      double total = 0.0;
      for (int s : sources) total += scenario.devices[s].labeled_count();
      if (total <= 0.0)
        throw DegeneratePlanError("baseline: fedavg weights need labeled sources");
      for (int j : targets) {
        for (int s : sources)
          plan.alpha(s, j) = scenario.devices[s].labeled_count() / total;
        normalize_column_exact(plan.alpha, j);
      }
      break;
    }
    case BaselineName::kAvgDegree: {
      // Reference's total active links spread evenly across sources; link
      // targets random, every target covered.
      const int total_links =
          std::max(static_cast<int>(reference->active_links.size()),
                   static_cast<int>(targets.size()));
      const int ns = static_cast<int>(sources.size());
      std::vector<int> quota(ns, total_links / ns);
      const std::vector<int> order = rng.permutation(ns);
      for (int r = 0; r < total_links % ns; ++r) ++quota[order[r]];

      // Cover every target once round-robin, then spend leftover quota on
      // distinct random (source, target) pairs so link counts match quotas.
      const int nt = static_cast<int>(targets.size());
      std::vector<std::vector<bool>> linked(ns, std::vector<bool>(nt, false));
      std::vector<int> count(ns, 0);
      std::size_t cursor = 0;
      for (int tj = 0; tj < nt; ++tj) {
        for (int step = 0; step < ns; ++step) {
          const int s = static_cast<int>((cursor + step) % ns);
          if (count[s] < quota[s]) {
            linked[s][tj] = true;
            ++count[s];
            cursor = (s + 1) % ns;
            break;
          }
        }
      }
      for (int s = 0; s < ns; ++s) {
        std::vector<int> open;
        for (int tj = 0; tj < nt; ++tj)
          if (!linked[s][tj]) open.push_back(tj);
        while (count[s] < quota[s] && !open.empty()) {
          const int pick = rng.uniform_int(static_cast<int>(open.size()));
          linked[s][open[pick]] = true;
          ++count[s];
          open.erase(open.begin() + pick);
        }
      }
      for (int s = 0; s < ns; ++s)
        for (int tj = 0; tj < nt; ++tj)
          if (linked[s][tj]) plan.alpha(sources[s], targets[tj]) = rng.uniform(0.2, 1.0);
      for (int j : targets) normalize_column_exact(plan.alpha, j);
      break;
    }
    case BaselineName::kSingleMatching: {
      const Mat d = div.values;
      for (int j : targets) {
        int best = sources.front();
        for (int s : sources)
          if (d(s, j) < d(best, j)) best = s;  // ties keep the lowest index
        plan.alpha(best, j) = 1.0;
      }
      break;
    }
  }

  for (int j : targets)
    for (int i = 0; i < n; ++i)
      if (plan.alpha(i, j) > 0.0) plan.active_links.emplace_back(i, j);
  return plan;
}

}  // namespace stlf
