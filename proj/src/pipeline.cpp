#include "stlf/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>

#include "stlf/io.hpp"

namespace stlf {

namespace {

using json = nlohmann::json;

template <typename Fn>
auto stage(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw Error(std::string("stage ") + name + ": " + e.what());
  }
}

Mat regime_matrix(DivergenceMode kind, int n, std::uint64_t seed) {
  Mat d = Mat::Zero(n, n);
  switch (kind) {
    case DivergenceMode::kUniform:
      d.setOnes();
      d.diagonal().setZero();
      break;
    case DivergenceMode::kExtreme:
      d.setOnes();
      d.row(0).setZero();
      d.col(0).setZero();
      d.diagonal().setZero();
      break;
    case DivergenceMode::kRandom: {
      Rng rng(Rng::derive(seed, 0xD1F));
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) d(i, j) = d(j, i) = rng.uniform();
      break;
    }
    default:
      throw ConfigError("regime_matrix: not an injection kind");
  }
  return d;
}

}  // namespace

DivergenceMode parse_divergence_mode(const std::string& name) {
  if (name == "estimate") return DivergenceMode::kEstimate;
  if (name == "uniform") return DivergenceMode::kUniform;
  if (name == "extreme") return DivergenceMode::kExtreme;
  if (name == "random") return DivergenceMode::kRandom;
  if (name == "file") return DivergenceMode::kFile;
  throw ConfigError("unknown divergence mode: '" + name + "'");
}

PlanMetrics metrics(const LinkPlan& plan, const CommProfile& comm, double eps_E,
                    const LinkPlan* reference) {
  if (reference == nullptr)
    throw UsageError("metrics: normalization requested without a reference plan");
  const Mat K = energy_matrix(comm);
  PlanMetrics out;
  out.total_energy_joules = plan_energy(K, plan.alpha, eps_E);
  out.active_link_count = static_cast<int>(plan.active_links.size());
  const double ref_energy = plan_energy(K, reference->alpha, eps_E);
  out.normalized_energy = ref_energy > 0.0
                              ? std::clamp(out.total_energy_joules / ref_energy, 0.0, 1.0)
                              : (out.total_energy_joules > 0.0 ? 1.0 : 0.0);
  out.saved_transmissions =
      static_cast<int>(reference->active_links.size()) - out.active_link_count;
  return out;
}

namespace {

// Target hypotheses are combined from rounded sources only (the (1-psi_i)
// psi_j gate); devices without a trained hypothesis cannot contribute.
PlanEvaluation evaluate_plan(const LinkPlan& plan, const Scenario& scenario,
                             const std::vector<std::optional<Hypothesis>>& hypotheses,
                             const ExperimentConfig& config, const LinkPlan* reference) {
  PlanEvaluation eval;
  const std::vector<int> targets = plan.targets();
  eval.num_targets = static_cast<int>(targets.size());
  eval.per_target_accuracy = Vec::Zero(eval.num_targets);

  std::vector<bool> contributed(scenario.num_devices, false);
  for (int t = 0; t < eval.num_targets; ++t) {
    const int j = targets[t];
    std::vector<Hypothesis> members;
    std::vector<double> weights;
    for (int i = 0; i < scenario.num_devices; ++i) {
      if (plan.alpha(i, j) <= 0.0) continue;
      if (plan.psi_binary[i]) continue;  // gate: only sources feed targets
      if (!hypotheses[i].has_value()) continue;
      members.push_back(*hypotheses[i]);
      weights.push_back(plan.alpha(i, j));
      contributed[i] = true;
    }
    if (members.empty()) {
      eval.per_target_accuracy[t] = 0.0;
      continue;
    }
    Vec w = Eigen::Map<Vec>(weights.data(), static_cast<Eigen::Index>(weights.size()));
    w /= w.sum();
    // Exact simplex sum for the combine contract.
    if (w.size() > 0) {
      double rest = 0.0;
      for (Eigen::Index k = 1; k < w.size(); ++k) rest += w[k];
      w[0] = 1.0 - rest;
    }
    if (config.combine_mode == CombineMode::kParameter) {
      const Hypothesis h = combine(members, w);
      eval.per_target_accuracy[t] = accuracy(h, scenario.devices[j], scenario.eval_labels[j]);
    } else {
      eval.per_target_accuracy[t] =
          accuracy_output_average(members, w, scenario.devices[j], scenario.eval_labels[j]);
    }
  }
  eval.avg_target_accuracy =
      eval.num_targets > 0 ? eval.per_target_accuracy.mean() : 0.0;
  for (int i = 0; i < scenario.num_devices; ++i)
    if (contributed[i]) eval.contributing_sources.push_back(i);
  eval.metrics = metrics(plan, scenario.comm, config.solver.eps_E, reference);
  return eval;
}

DivergenceMatrix make_divergence(const ExperimentConfig& config, const Scenario& scenario,
                                 std::uint64_t seed) {
  switch (config.divergence.mode) {
    case DivergenceMode::kEstimate: {
      DivergenceConfig cfg = config.divergence.estimator;
      cfg.train.seed = Rng::derive(seed, 0xD1E);
      return estimate_all(scenario, cfg);
    }
    case DivergenceMode::kFile:
      return inject(io::read_csv(config.divergence.file), config.divergence.file_scale);
    default:
      return inject(regime_matrix(config.divergence.mode, scenario.num_devices, seed),
                    DivergenceScale::kNormalized01);
  }
}

}  // namespace

RunResult run_once(const ExperimentConfig& config, std::uint64_t seed) {
  RunResult result;
  result.seed = seed;

  const Scenario scenario =
      stage("scenario", [&] { return make_scenario(config.scenario, seed); });

  // Local training at labeled devices.
  const Arch arch{config.scenario.feature_dim, config.hidden_dim, config.scenario.num_classes};
  std::vector<std::optional<Hypothesis>> hypotheses(scenario.num_devices);
  result.emp_errs = Vec::Ones(scenario.num_devices);
  stage("train", [&] {
    for (int i = 0; i < scenario.num_devices; ++i) {
      if (scenario.devices[i].labeled_count() == 0) continue;
      TrainConfig tc = config.train;
      tc.seed = Rng::derive(seed, 0x7124, static_cast<std::uint64_t>(i));
      const Hypothesis init =
          Hypothesis::random_init(arch, Rng::derive(seed, 0x1417, static_cast<std::uint64_t>(i)));
      hypotheses[i] = train(init, scenario.devices[i], tc);
      result.emp_errs[i] = empirical_error(*hypotheses[i], scenario.devices[i]);
    }
    return 0;
  });
  if (config.bound.emp_err_override.has_value()) {
    if (config.bound.emp_err_override->size() != scenario.num_devices)
      throw ConfigError("emp_err_override length mismatch");
    result.emp_errs = *config.bound.emp_err_override;
  }

  result.divergence =
      stage("divergence", [&] { return make_divergence(config, scenario, seed); });

  result.bounds = stage("bounds", [&] {
    if (config.bound.size_override.has_value()) {
      if (config.bound.size_override->size() != scenario.num_devices)
        throw ConfigError("size_override length mismatch");
      std::vector<bool> candidates(scenario.num_devices);
      for (int i = 0; i < scenario.num_devices; ++i)
        candidates[i] = scenario.devices[i].labeled_count() > 0;
      return assemble_from_values(result.emp_errs, *config.bound.size_override,
                                  result.divergence, config.bound.config, candidates);
    }
    return assemble(scenario, result.divergence, result.emp_errs, config.bound.config);
  });

  const Mat K = energy_matrix(scenario.comm);
  result.plan = stage("solve", [&] { return solve(result.bounds, K, config.solver); });

  // Normalization reference: the same classification with link weights
  // re-solved at phi_e = 0, energy still metered by the activation model.
  const LinkPlan reference = stage("solve_reference", [&] {
    SolverConfig ref_cfg = config.solver;
    ref_cfg.phi_e = 0.0;
    if (result.plan.targets().empty()) {
      LinkPlan empty;
      empty.psi_binary = result.plan.psi_binary;
      empty.alpha = Mat::Zero(scenario.num_devices, scenario.num_devices);
      return empty;
    }
    return make_plan_fixed_psi(result.bounds, K, ref_cfg, result.plan.psi_binary,
                               result.plan.alpha);
  });

  result.stlf = stage("evaluate", [&] {
    return evaluate_plan(result.plan, scenario, hypotheses, config, &reference);
  });

  for (const BaselineSpec& spec : config.baselines) {
    BaselineSpec seeded = spec;
    seeded.seed = Rng::derive(seed, 0xBA5E11, static_cast<std::uint64_t>(spec.name));
    const std::string name = to_string(spec.name);
    stage("baseline", [&] {
      LinkPlan bplan = run_baseline(seeded, scenario, result.divergence, &result.plan);
      PlanEvaluation beval = evaluate_plan(bplan, scenario, hypotheses, config, &reference);
      result.baselines.emplace(name, std::make_pair(std::move(bplan), std::move(beval)));
      return 0;
    });
  }

  if (config.dump_models) {
    const auto dir = resolve_output_dir(config) / ("models_" + std::to_string(seed));
    std::filesystem::create_directories(dir);
    for (int i = 0; i < scenario.num_devices; ++i)
      if (hypotheses[i].has_value())
        io::write_hypothesis(dir / ("h_source_" + std::to_string(i) + ".bin"), *hypotheses[i]);
  }

  return result;
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& config) {
  std::filesystem::path dir = config.output_dir;
  if (const char* root = std::getenv("STLF_OUTPUT_ROOT"); root != nullptr && dir.is_relative())
    dir = std::filesystem::path(root) / dir;
  return dir;
}

namespace {

json plan_json(const LinkPlan& plan, const PlanEvaluation& eval) {
  json j;
  json psi = json::array();
  for (bool t : plan.psi_binary) psi.push_back(t ? 1 : 0);
  j["psi"] = std::move(psi);
  json alpha = json::array();
  for (Eigen::Index i = 0; i < plan.alpha.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index c = 0; c < plan.alpha.cols(); ++c) row.push_back(plan.alpha(i, c));
    alpha.push_back(std::move(row));
  }
  j["alpha"] = std::move(alpha);
  j["objective_trace"] = plan.objective_trace;
  j["per_target_accuracy"] =
      std::vector<double>(eval.per_target_accuracy.data(),
                          eval.per_target_accuracy.data() + eval.per_target_accuracy.size());
  j["avg_target_accuracy"] = eval.avg_target_accuracy;
  j["num_targets"] = eval.num_targets;
  j["total_energy_joules"] = eval.metrics.total_energy_joules;
  j["normalized_energy"] = eval.metrics.normalized_energy;
  j["saved_transmissions"] = eval.metrics.saved_transmissions;
  j["active_link_count"] = eval.metrics.active_link_count;
  j["contributing_sources"] = eval.contributing_sources;
  return j;
}

json matrix_json(const Mat& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace

void write_run_outputs(const std::filesystem::path& dir, const ExperimentConfig& config,
                       const RunResult& result) {
  std::filesystem::create_directories(dir);

  json root;
  root["stlf"] = plan_json(result.plan, result.stlf);
  root["seed"] = result.seed;
  root["num_devices"] = static_cast<int>(result.plan.psi_binary.size());
  root["divergence"] = matrix_json(result.divergence.values);
  root["divergence_scale"] =
      result.divergence.scale == DivergenceScale::kRaw02 ? "raw_0_2" : "normalized_0_1";
  json bounds;
  bounds["S"] = std::vector<double>(result.bounds.S.data(),
                                    result.bounds.S.data() + result.bounds.S.size());
  bounds["T_hat"] = matrix_json(result.bounds.T_hat);
  json comps = json::array();
  for (int i = 0; i < result.bounds.size(); ++i) {
    const auto& sc = result.bounds.s_components[i];
    comps.push_back({{"emp_err", sc.emp_err}, {"rad", sc.rad}, {"conf", sc.conf}});
  }
  bounds["S_components"] = std::move(comps);
  root["bounds"] = std::move(bounds);
  root["emp_errs"] = std::vector<double>(result.emp_errs.data(),
                                         result.emp_errs.data() + result.emp_errs.size());
  json base = json::object();
  for (const auto& [name, pe] : result.baselines) base[name] = plan_json(pe.first, pe.second);
  root["baselines"] = std::move(base);

  io::validate_schema(io::results_schema(), root);
  io::write_text(dir / "results.json", root.dump(2) + "\n");

  Mat psi_col(static_cast<Eigen::Index>(result.plan.psi_binary.size()), 1);
  for (std::size_t i = 0; i < result.plan.psi_binary.size(); ++i)
    psi_col(static_cast<Eigen::Index>(i), 0) = result.plan.psi_binary[i] ? 1.0 : 0.0;
  io::write_csv(dir / "psi.csv", psi_col, 0);
  io::write_csv(dir / "alpha.csv", result.plan.alpha);
  io::write_csv(dir / "divergence.csv", result.divergence.values);

  std::string trace;
  for (const TraceEntry& e : result.plan.trace) {
    json line;
    line["outer_iter"] = e.outer_iter;
    line["objective"] = e.objective;
    line["max_constraint_violation"] = e.max_constraint_violation;
    line["psi_snapshot"] = std::vector<double>(e.psi.data(), e.psi.data() + e.psi.size());
    trace += line.dump() + "\n";
  }
  io::write_text(dir / "trace.jsonl", trace);
  (void)config;
}

std::vector<RunResult> run(const ExperimentConfig& config, bool persist) {
  if (config.repeats < 1) throw ConfigError("repeats must be >= 1");
  const std::filesystem::path out_dir = resolve_output_dir(config);

  std::vector<RunResult> results;
  for (int r = 0; r < config.repeats; ++r) {
    const std::uint64_t seed = Rng::derive(config.master_seed, 0x5EED, static_cast<std::uint64_t>(r));
    const std::filesystem::path run_dir = out_dir / ("run_" + std::to_string(r));
    try {
      RunResult result = run_once(config, seed);
      if (persist) write_run_outputs(run_dir, config, result);
      results.push_back(std::move(result));
    } catch (const std::exception& e) {
      if (persist) {
        std::filesystem::create_directories(run_dir);
        json partial;
        partial["seed"] = seed;
        partial["error"] = e.what();
        io::write_text(run_dir / "results_partial.json", partial.dump(2) + "\n");
      }
      throw;
    }
  }
  return results;
}

ExperimentConfig regime_config(DivergenceMode kind) {
  if (kind == DivergenceMode::kEstimate || kind == DivergenceMode::kFile)
    throw ConfigError("regime_config: kind must be uniform, extreme, or random");
  ExperimentConfig config;
  config.scenario.num_devices = 10;
  config.scenario.num_domains = 2;
  config.scenario.num_classes = 3;
  config.scenario.feature_dim = 4;
  config.scenario.samples_per_device = 60;
  config.scenario.mode = DomainMode::kSingle;
  // Near-degenerate communication draws so the link pattern reflects the
  // injected divergences rather than per-pair rate luck.
  config.scenario.model_bits = 50000000ull;  // mean link energy ~0.17 J
  config.scenario.tx_power_range_dbm = {24.0, 24.0};
  config.scenario.rate_range_bps = {74e6, 74e6};
  config.train.iterations = 40;
  config.divergence.mode = kind;

  // Solver-level regime: empirical errors and bound sizes are pinned so the
  // link-formation pattern depends on the injected divergences alone.
  Vec errs(10), sizes(10);
  for (int i = 0; i < 10; ++i) {
    errs[i] = i < 5 ? 0.05 : 1.0;
    sizes[i] = 100000.0;
  }
  if (kind == DivergenceMode::kExtreme) {
    errs[0] = 0.02;
    for (int i = 1; i < 5; ++i) errs[i] = 0.3;
  }
  if (kind == DivergenceMode::kRandom)
    for (int i = 0; i < 5; ++i) errs[i] = 0.1;
  config.bound.emp_err_override = errs;
  config.bound.size_override = sizes;

  config.solver.phi_s = 1.0;
  config.solver.phi_t = 0.1;
  config.solver.phi_e = 1.0;
  config.solver.eps_E = 0.1;  // smooth energy response at desk-scale weights
  config.repeats = 1;
  config.baselines.clear();
  config.output_dir = "regimes";
  return config;
}

namespace {

void expect_keys(const json& block, const std::vector<std::string>& allowed,
                 const std::string& where) {
  for (const auto& [key, value] : block.items()) {
    (void)value;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown config key '" + key + "' in " + where);
  }
}

Vec json_to_vec(const json& arr) {
  Vec v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  return v;
}

std::pair<double, double> json_to_range(const json& arr, const std::string& where) {
  if (!arr.is_array() || arr.size() != 2)
    throw ConfigError(where + " must be a two-element array");
  return {arr[0].get<double>(), arr[1].get<double>()};
}

}  // namespace

ExperimentConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("config parse error: ") + e.what());
  }
  expect_keys(j, {"scenario", "train", "hidden_dim", "divergence", "bounds", "solver",
                  "baselines", "sweep", "output_dir", "repeats", "seed", "combine_mode",
                  "dump_models"},
              "top level");

  ExperimentConfig c;
  if (j.contains("scenario")) {
    const json& s = j["scenario"];
    expect_keys(s, {"num_domains", "num_classes", "feature_dim", "mode", "mean_scale",
                    "class_cov_scale", "shift_scale", "rotation_step", "domain_label_subset",
                    "num_devices", "samples_per_device", "dirichlet_beta",
                    "labeled_fraction_range", "tx_power_range_dbm", "rate_range_bps",
                    "model_bits"},
                "scenario");
    auto& sc = c.scenario;
    if (s.contains("num_domains")) sc.num_domains = s["num_domains"];
    if (s.contains("num_classes")) sc.num_classes = s["num_classes"];
    if (s.contains("feature_dim")) sc.feature_dim = s["feature_dim"];
    if (s.contains("mode")) sc.mode = parse_domain_mode(s["mode"]);
    if (s.contains("mean_scale")) sc.mean_scale = s["mean_scale"];
    if (s.contains("class_cov_scale")) sc.class_cov_scale = s["class_cov_scale"];
    if (s.contains("shift_scale")) sc.shift_scale = s["shift_scale"];
    if (s.contains("rotation_step")) sc.rotation_step = s["rotation_step"];
    if (s.contains("domain_label_subset")) sc.domain_label_subset = s["domain_label_subset"];
    if (s.contains("num_devices")) sc.num_devices = s["num_devices"];
    if (s.contains("samples_per_device")) sc.samples_per_device = s["samples_per_device"];
    if (s.contains("dirichlet_beta")) sc.dirichlet_beta = s["dirichlet_beta"];
    if (s.contains("labeled_fraction_range"))
      sc.labeled_fraction_range = json_to_range(s["labeled_fraction_range"], "labeled_fraction_range");
    if (s.contains("tx_power_range_dbm"))
      sc.tx_power_range_dbm = json_to_range(s["tx_power_range_dbm"], "tx_power_range_dbm");
    if (s.contains("rate_range_bps"))
      sc.rate_range_bps = json_to_range(s["rate_range_bps"], "rate_range_bps");
    if (s.contains("model_bits")) sc.model_bits = static_cast<std::uint64_t>(s["model_bits"].get<double>());
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    expect_keys(t, {"iterations", "batch_size", "learning_rate"}, "train");
    if (t.contains("iterations")) c.train.iterations = t["iterations"];
    if (t.contains("batch_size")) c.train.batch_size = t["batch_size"];
    if (t.contains("learning_rate")) c.train.learning_rate = t["learning_rate"];
  }
  if (j.contains("hidden_dim")) c.hidden_dim = j["hidden_dim"];
  if (j.contains("divergence")) {
    const json& d = j["divergence"];
    expect_keys(d, {"mode", "file", "file_scale", "local_iters", "rounds", "holdout_fraction",
                    "learning_rate", "batch_size", "hidden_dim"},
                "divergence");
    if (d.contains("mode")) c.divergence.mode = parse_divergence_mode(d["mode"]);
    if (d.contains("file")) c.divergence.file = d["file"];
    if (d.contains("file_scale"))
      c.divergence.file_scale = d["file_scale"] == "raw_0_2" ? DivergenceScale::kRaw02
                                                             : DivergenceScale::kNormalized01;
    if (d.contains("local_iters")) c.divergence.estimator.local_iters = d["local_iters"];
    if (d.contains("rounds")) c.divergence.estimator.rounds = d["rounds"];
    if (d.contains("holdout_fraction"))
      c.divergence.estimator.holdout_fraction = d["holdout_fraction"];
    if (d.contains("learning_rate")) c.divergence.estimator.train.learning_rate = d["learning_rate"];
    if (d.contains("batch_size")) c.divergence.estimator.train.batch_size = d["batch_size"];
    if (d.contains("hidden_dim")) c.divergence.estimator.hidden_dim = d["hidden_dim"];
  }
  if (j.contains("bounds")) {
    const json& b = j["bounds"];
    expect_keys(b, {"delta", "include_hypothesis_coupling", "include_label_fn_gap",
                    "emp_err_override", "size_override"},
                "bounds");
    if (b.contains("delta")) c.bound.config.delta = b["delta"];
    if (b.contains("include_hypothesis_coupling"))
      c.bound.config.include_hypothesis_coupling = b["include_hypothesis_coupling"];
    if (b.contains("include_label_fn_gap"))
      c.bound.config.include_label_fn_gap = b["include_label_fn_gap"];
    if (b.contains("emp_err_override")) c.bound.emp_err_override = json_to_vec(b["emp_err_override"]);
    if (b.contains("size_override")) c.bound.size_override = json_to_vec(b["size_override"]);
  }
  if (j.contains("solver")) {
    const json& s = j["solver"];
    expect_keys(s, {"phi_s", "phi_t", "phi_e", "eps_e", "eps_c", "eps_lo", "outer_tol",
                    "max_outer_iters", "coupling_mode", "alpha_min", "feas_tol", "stat_tol",
                    "max_inner_iters"},
                "solver");
    if (s.contains("phi_s")) c.solver.phi_s = s["phi_s"];
    if (s.contains("phi_t")) c.solver.phi_t = s["phi_t"];
    if (s.contains("phi_e")) c.solver.phi_e = s["phi_e"];
    if (s.contains("eps_e")) c.solver.eps_E = s["eps_e"];
    if (s.contains("eps_c")) c.solver.eps_C = s["eps_c"];
    if (s.contains("eps_lo")) c.solver.eps_lo = s["eps_lo"];
    if (s.contains("outer_tol")) c.solver.outer_tol = s["outer_tol"];
    if (s.contains("max_outer_iters")) c.solver.max_outer_iters = s["max_outer_iters"];
    if (s.contains("coupling_mode")) c.solver.coupling_mode = s["coupling_mode"];
    if (s.contains("alpha_min")) c.solver.alpha_min = s["alpha_min"];
    if (s.contains("feas_tol")) c.solver.subproblem.feas_tol = s["feas_tol"];
    if (s.contains("stat_tol")) c.solver.subproblem.stat_tol = s["stat_tol"];
    if (s.contains("max_inner_iters")) c.solver.subproblem.max_inner_iters = s["max_inner_iters"];
  }
  if (j.contains("baselines")) {
    for (const auto& b : j["baselines"]) {
      BaselineSpec spec;
      if (b.is_string()) {
        spec.name = parse_baseline_name(b);
      } else {
        expect_keys(b, {"name", "psi_source"}, "baselines[]");
        spec.name = parse_baseline_name(b.at("name"));
        if (b.contains("psi_source")) {
          const std::string ps = b["psi_source"];
          if (ps == "from_stlf") spec.psi_source = PsiSource::kFromStlf;
          else if (ps == "heuristic_labeled") spec.psi_source = PsiSource::kHeuristicLabeled;
          else if (ps == "random") spec.psi_source = PsiSource::kRandom;
          else throw ConfigError("unknown psi_source: '" + ps + "'");
        }
      }
      // Conventional pairings when unspecified: psi-comparison baselines use
      // their own psi, alpha-comparison baselines reuse the reference psi.
      if (!b.is_object() || !b.contains("psi_source")) {
        if (spec.name == BaselineName::kRandomPsi) spec.psi_source = PsiSource::kRandom;
        else if (spec.name == BaselineName::kPsiFedavg || spec.name == BaselineName::kSingleMatching)
          spec.psi_source = PsiSource::kHeuristicLabeled;
        else spec.psi_source = PsiSource::kFromStlf;
      }
      c.baselines.push_back(spec);
    }
  }
  if (j.contains("sweep")) {
    const json& s = j["sweep"];
    expect_keys(s, {"param", "values"}, "sweep");
    c.sweep_param = s.at("param");
    for (const auto& v : s.at("values")) c.sweep_values.push_back(v.get<double>());
    if (c.sweep_param != "phi_e" && c.sweep_param != "phi_t" && c.sweep_param != "phi_s" &&
        c.sweep_param != "dirichlet_beta" && c.sweep_param != "delta")
      throw ConfigError("sweep param must name an existing config field (phi_s|phi_t|phi_e|dirichlet_beta|delta)");
  }
  if (j.contains("output_dir")) c.output_dir = j["output_dir"];
  if (j.contains("repeats")) c.repeats = j["repeats"];
  if (j.contains("seed")) c.master_seed = j["seed"].get<std::uint64_t>();
  if (j.contains("combine_mode")) {
    const std::string m = j["combine_mode"];
    if (m == "parameter") c.combine_mode = CombineMode::kParameter;
    else if (m == "output_average") c.combine_mode = CombineMode::kOutputAverage;
    else throw ConfigError("unknown combine_mode: '" + m + "'");
  }
  if (j.contains("dump_models")) c.dump_models = j["dump_models"];
  return c;
}

ExperimentConfig config_from_json_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path.string());
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return config_from_json_text(text);
}

}  // namespace stlf
