#include "stlf/cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <iostream>

#include "stlf/io.hpp"
#include "stlf/pipeline.hpp"

namespace stlf {

namespace {

using json = nlohmann::json;

void apply_sweep_value(ExperimentConfig& config, const std::string& param, double value) {
  if (param == "phi_s") config.solver.phi_s = value;
  else if (param == "phi_t") config.solver.phi_t = value;
  else if (param == "phi_e") config.solver.phi_e = value;
  else if (param == "dirichlet_beta") config.scenario.dirichlet_beta = value;
  else if (param == "delta") config.bound.config.delta = value;
  else throw ConfigError("sweep: unknown parameter '" + param + "'");
}

int do_run(ExperimentConfig config) {
  const auto results = run(config);
  double acc = 0.0;
  for (const auto& r : results) acc += r.stlf.avg_target_accuracy;
  std::cout << "completed " << results.size() << " runs; avg target accuracy "
            << (results.empty() ? 0.0 : acc / results.size()) << "; outputs in "
            << resolve_output_dir(config).string() << "\n";
  return 0;
}

int do_sweep(ExperimentConfig base, const std::string& param, const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("sweep: no values given");
  const auto root = resolve_output_dir(base);
  json summary;
  summary["param"] = param;
  json points = json::array();
  for (double v : values) {
    ExperimentConfig config = base;
    apply_sweep_value(config, param, v);
    config.output_dir = (root / ("sweep_" + param + "_" + std::to_string(v))).string();
    const auto results = run(config);
    json point;
    point["value"] = v;
    json energy = json::array(), total = json::array(), links = json::array(),
         saved = json::array();
    for (const auto& r : results) {
      energy.push_back(r.stlf.metrics.normalized_energy);
      total.push_back(r.stlf.metrics.total_energy_joules);
      links.push_back(r.stlf.metrics.active_link_count);
      saved.push_back(r.stlf.metrics.saved_transmissions);
    }
    point["normalized_energy"] = std::move(energy);
    point["total_energy_joules"] = std::move(total);
    point["active_links"] = std::move(links);
    point["saved_transmissions"] = std::move(saved);
    points.push_back(std::move(point));
  }
  // Alternative normalization against the sweep's own maximum-consumption
  // point, per repeat index.
  std::size_t repeats = 0;
  for (const auto& p : points) repeats = std::max(repeats, p["active_links"].size());
  for (std::size_t r = 0; r < repeats; ++r) {
    int max_links = 0;
    double max_energy = 0.0;
    for (const auto& p : points) {
      if (r < p["active_links"].size()) {
        max_links = std::max(max_links, p["active_links"][r].get<int>());
        max_energy = std::max(max_energy, p["total_energy_joules"][r].get<double>());
      }
    }
    for (auto& p : points) {
      if (r >= p["active_links"].size()) continue;
      p["saved_transmissions_vs_max"].push_back(max_links - p["active_links"][r].get<int>());
      p["normalized_energy_vs_max"].push_back(
          max_energy > 0.0 ? p["total_energy_joules"][r].get<double>() / max_energy : 0.0);
    }
  }
  summary["points"] = std::move(points);
  std::filesystem::create_directories(root);
  io::write_text(root / "sweep_summary.json", summary.dump(2) + "\n");
  std::cout << "sweep complete; summary in " << (root / "sweep_summary.json").string() << "\n";
  return 0;
}

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

int do_selftest() {
  int failures = 0;
  auto check = [&failures](const char* name, bool ok) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << "\n";
    if (!ok) ++failures;
  };

  BoundConfig bc;
  check("rad_bound closed form",
        close(rad_bound(100), std::sqrt(2.0 * std::log(100.0) / 100.0), 1e-12) &&
            close(rad_bound(2), 0.832555, 1e-5) && rad_bound(1) == 0.0);
  check("source_cost frozen value", close(source_cost(0.1, 1000, bc), 0.463920, 1e-5));
  check("transfer_cost frozen value",
        close(transfer_cost(0, 1, 0.1, 1000, 1000, 1.0, std::nullopt, bc), 2.290762, 1e-5));

  CommProfile comm;
  comm.tx_power_dbm = Vec::Constant(2, 23.0);
  comm.rate_bps = Mat::Constant(2, 2, 63e6);
  comm.model_bits = 1000000000ull;
  check("energy constant", close(energy_constant(comm, 0, 1), 3.16709, 1e-4));

  check("divergence error map", divergence_from_error(0.25) == 1.0 &&
                                    divergence_from_error(0.75) == 1.0 &&
                                    divergence_from_error(0.5) == 0.0);

  // AG-mean global lower bound on random posynomials.
  bool ag_ok = true;
  Rng rng(7);
  for (int rep = 0; rep < 200 && ag_ok; ++rep) {
    const int nv = 1 + rng.uniform_int(4);
    const int nt = 1 + rng.uniform_int(5);
    gp::Posynomial p;
    for (int t = 0; t < nt; ++t) {
      gp::Term term;
      term.coeff = std::exp(rng.uniform(-2.0, 2.0));
      for (int v = 0; v < nv; ++v)
        if (rng.uniform() < 0.7) term.powers.emplace_back(v, rng.uniform(-2.0, 2.0));
      p.add(std::move(term));
    }
    Vec z(nv);
    for (int v = 0; v < nv; ++v) z[v] = std::exp(rng.uniform(-1.5, 1.5));
    const gp::Term hat = gp::ag_condense(p, z);
    if (!close(hat.eval(z), p.eval(z), 1e-9 * std::max(1.0, p.eval(z)))) ag_ok = false;
    for (int probe = 0; probe < 20; ++probe) {
      Vec y(nv);
      for (int v = 0; v < nv; ++v) y[v] = std::exp(rng.uniform(-1.5, 1.5));
      if (hat.eval(y) > p.eval(y) * (1.0 + 1e-12)) ag_ok = false;
    }
  }
  check("ag_condense soundness", ag_ok);

  // Tiny GP: min y1 + y2 s.t. y1 y2 >= 4 has optimum 4 at (2, 2).
  gp::GpSubproblem sub;
  sub.num_vars = 2;
  sub.objective.add(gp::Term{1.0, {{0, 1.0}}});
  sub.objective.add(gp::Term{1.0, {{1, 1.0}}});
  sub.inequality_constraints.push_back(
      gp::Posynomial(gp::Term{4.0, {{0, -1.0}, {1, -1.0}}}));
  sub.expansion_point = Vec::Constant(2, 1.0);
  const auto prog = gp::log_transform(sub);
  const auto res = solve_subproblem(prog, Vec::Zero(2), SubproblemConfig{});
  check("tiny GP solve", close(std::exp(res.objective), 4.0, 1e-4));

  std::cout << (failures == 0 ? "selftest passed\n" : "selftest FAILED\n");
  return failures == 0 ? 0 : 2;
}

}  // namespace

int cli_main(const std::vector<std::string>& args) {
  CLI::App app{"Decentralized federated domain adaptation simulator (source/target "
               "determination and link formation)"};
  app.require_subcommand(1);

  std::string config_path, out_dir, param, kind = "uniform", baseline_name;
  std::vector<double> values;
  std::uint64_t seed = 0;
  bool seed_set = false;

  auto add_common = [&](CLI::App* cmd, bool need_config) {
    auto* copt = cmd->add_option("--config", config_path, "experiment config JSON");
    if (need_config) copt->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", out_dir, "output directory override");
    cmd->add_option("--seed", seed, "master seed override")->each([&](const std::string&) {
      seed_set = true;
    });
  };

  auto* cmd_run = app.add_subcommand("run", "run the full pipeline from a config file");
  add_common(cmd_run, true);

  auto* cmd_sweep = app.add_subcommand("sweep", "repeat runs over a parameter grid");
  add_common(cmd_sweep, true);
  cmd_sweep->add_option("--param", param, "config field to sweep (e.g. phi_e)");
  cmd_sweep->add_option("--values", values, "sweep values")->delimiter(',');

  auto* cmd_baseline = app.add_subcommand("baseline", "run a single baseline heuristic");
  add_common(cmd_baseline, true);
  cmd_baseline->add_option("--name", baseline_name, "baseline name")->required();

  auto* cmd_regimes = app.add_subcommand("regimes", "divergence-regime experiments");
  cmd_regimes->add_option("--kind", kind, "uniform|extreme|random")->required();
  cmd_regimes->add_option("--out", out_dir, "output directory override");
  cmd_regimes->add_option("--seed", seed, "master seed override")->each([&](const std::string&) {
    seed_set = true;
  });

  app.add_subcommand("selftest", "run built-in oracle checks");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help();
    return 1;
  }

  try {
    if (app.got_subcommand("selftest")) return do_selftest();

    ExperimentConfig config;
    if (app.got_subcommand("regimes")) {
      config = regime_config(parse_divergence_mode(kind));
    } else {
      config = config_from_json_file(config_path);
    }
    if (!out_dir.empty()) config.output_dir = out_dir;
    if (seed_set) config.master_seed = seed;

    if (app.got_subcommand("run") || app.got_subcommand("regimes")) return do_run(config);
    if (app.got_subcommand("sweep")) {
      if (param.empty()) param = config.sweep_param;
      if (values.empty()) values = config.sweep_values;
      if (param.empty() || values.empty())
        throw ConfigError("sweep: --param/--values flags or a sweep config block are required");
      return do_sweep(config, param, values);
    }
    if (app.got_subcommand("baseline")) {
      BaselineSpec spec;
      spec.name = parse_baseline_name(baseline_name);
      spec.psi_source = spec.name == BaselineName::kRandomPsi ? PsiSource::kRandom
                        : (spec.name == BaselineName::kPsiFedavg ||
                           spec.name == BaselineName::kSingleMatching)
                            ? PsiSource::kHeuristicLabeled
                            : PsiSource::kFromStlf;
      config.baselines = {spec};
      return do_run(config);
    }
    throw UsageError("no subcommand selected");
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace stlf
