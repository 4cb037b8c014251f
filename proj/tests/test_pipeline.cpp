#include <doctest.h>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>

#include "stlf/cli.hpp"
#include "stlf/io.hpp"
#include "stlf/pipeline.hpp"

using namespace stlf;

TEST_SUITE_BEGIN("pipeline");

namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

// Two-device experiment: device 0 labeled source, device 1 unlabeled target.
ExperimentConfig tiny_config(const fs::path& out) {
  ExperimentConfig c;
  c.scenario.num_devices = 2;
  c.scenario.num_domains = 1;
  c.scenario.mode = DomainMode::kSingle;
  c.scenario.num_classes = 2;
  c.scenario.feature_dim = 3;
  c.scenario.samples_per_device = 80;
  c.scenario.labeled_fraction_range = {0.9, 0.9};
  c.scenario.model_bits = 162000000ull;
  c.scenario.tx_power_range_dbm = {24.0, 24.0};
  c.scenario.rate_range_bps = {74e6, 74e6};
  c.train.iterations = 60;
  c.train.learning_rate = 0.1;
  c.divergence.mode = DivergenceMode::kUniform;  // injected, keeps the run fast
  Vec errs(2), sizes(2);
  errs << 0.1, 1.0;
  sizes << 100000, 100000;
  c.bound.emp_err_override = errs;
  c.bound.size_override = sizes;
  c.solver.phi_s = 1.0;
  c.solver.phi_t = 0.2;
  c.solver.phi_e = 1.0;
  c.solver.eps_E = 0.1;
  c.repeats = 1;
  c.output_dir = out.string();
  c.baselines.push_back({BaselineName::kSingleMatching, 0, PsiSource::kHeuristicLabeled});
  return c;
}

fs::path fresh_dir(const char* name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("metrics formulas and reference handling") {
  CommProfile comm;
  comm.tx_power_dbm = Vec::Constant(2, 23.0);
  comm.rate_bps = Mat::Constant(2, 2, 63e6);
  comm.model_bits = 1000000000ull;  // K = 3.16709 J

  LinkPlan empty;
  empty.psi_binary = {false, true};
  empty.alpha = Mat::Zero(2, 2);

  LinkPlan one_link = empty;
  one_link.alpha(0, 1) = 1.0;
  one_link.active_links = {{0, 1}};

  // empty plan consumes nothing
  const PlanMetrics none = metrics(empty, comm, 1e-3, &one_link);
  CHECK(none.total_energy_joules == 0.0);
  CHECK(none.normalized_energy == 0.0);
  CHECK(none.saved_transmissions == 1);

  // a full link consumes K / (1 + eps_E)
  const PlanMetrics full = metrics(one_link, comm, 1e-3, &one_link);
  CHECK(full.total_energy_joules == doctest::Approx(3.16393).epsilon(1e-4));
  CHECK(full.normalized_energy == doctest::Approx(1.0));
  CHECK(full.saved_transmissions == 0);

  CHECK_THROWS_AS(metrics(one_link, comm, 1e-3, nullptr), UsageError);
}

TEST_CASE("tiny pipeline run: classification, identity combination, audits") {
  const fs::path out = fresh_dir("stlf_pipe_tiny");
  const ExperimentConfig config = tiny_config(out);
  const std::uint64_t seed = Rng::derive(config.master_seed, 0x5EED, 0);
  const RunResult result = run_once(config, seed);

  REQUIRE(result.plan.psi_binary.size() == 2);
  CHECK_FALSE(result.plan.psi_binary[0]);
  CHECK(result.plan.psi_binary[1]);
  CHECK(result.plan.alpha(0, 1) == 1.0);

  // single-source identity: the target's hypothesis equals the source's, so
  // its accuracy equals scoring the source hypothesis directly
  const Scenario scenario = make_scenario(config.scenario, seed);
  TrainConfig tc = config.train;
  tc.seed = Rng::derive(seed, 0x7124, 0);
  const Arch arch{config.scenario.feature_dim, config.hidden_dim, config.scenario.num_classes};
  const Hypothesis h0 =
      train(Hypothesis::random_init(arch, Rng::derive(seed, 0x1417, 0)), scenario.devices[0], tc);
  const double expect = accuracy(h0, scenario.devices[1], scenario.eval_labels[1]);
  REQUIRE(result.stlf.per_target_accuracy.size() == 1);
  CHECK(result.stlf.per_target_accuracy[0] == expect);

  // interface audit: only labeled rounded sources contribute hypotheses
  for (int i : result.stlf.contributing_sources) {
    CHECK_FALSE(result.plan.psi_binary[i]);
    CHECK(scenario.devices[i].labeled_count() > 0);
  }

  // energy accounting consistency with the objective's energy term
  const Mat K = energy_matrix(scenario.comm);
  double term_e = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      if (i != j && result.plan.alpha(i, j) > 0.0)
        term_e += K(i, j) * result.plan.alpha(i, j) /
                  (result.plan.alpha(i, j) + config.solver.eps_E);
  CHECK(std::abs(result.stlf.metrics.total_energy_joules - term_e) <= 1e-9);

  // baseline ran and satisfies the same plan invariants
  REQUIRE(result.baselines.count("single_matching") == 1);
  const LinkPlan& bl = result.baselines.at("single_matching").first;
  CHECK(bl.alpha.col(1).sum() == doctest::Approx(1.0));
  fs::remove_all(out);
}

TEST_CASE("run outputs validate against the schema and are byte-stable") {
  const fs::path out_a = fresh_dir("stlf_pipe_a");
  const fs::path out_b = fresh_dir("stlf_pipe_b");
  ExperimentConfig config = tiny_config(out_a);
  const auto results_a = run(config);
  REQUIRE(results_a.size() == 1);
  config.output_dir = out_b.string();
  const auto results_b = run(config);
  REQUIRE(results_b.size() == 1);

  for (const char* file : {"results.json", "psi.csv", "alpha.csv", "divergence.csv",
                           "trace.jsonl"}) {
    CHECK(slurp(out_a / "run_0" / file) == slurp(out_b / "run_0" / file));
    CHECK_FALSE(slurp(out_a / "run_0" / file).empty());
  }

  const auto root = io::json::parse(slurp(out_a / "run_0" / "results.json"));
  CHECK_NOTHROW(io::validate_schema(io::results_schema(), root));
  CHECK(root["stlf"]["objective_trace"].size() >= 2);

  // a different master seed changes the outputs
  config.master_seed = 999;
  config.output_dir = (out_b / "other").string();
  run(config);
  CHECK(slurp(out_a / "run_0" / "results.json") !=
        slurp(out_b / "other" / "run_0" / "results.json"));
  fs::remove_all(out_a);
  fs::remove_all(out_b);
}

TEST_CASE("schema validator catches shape violations") {
  auto schema = io::results_schema();
  auto good = io::json::parse(R"({"seed":1,"num_devices":2,
    "divergence":[[0.0,1.0],[1.0,0.0]],
    "bounds":{"S":[1.0,2.0],"T_hat":[[0.0,1.0],[1.0,0.0]]},
    "stlf":{"psi":[0,1],"alpha":[[0.0,1.0],[0.0,0.0]],
            "avg_target_accuracy":0.5,"per_target_accuracy":[0.5],
            "total_energy_joules":1.0,"normalized_energy":0.5,
            "saved_transmissions":0,"active_link_count":1,
            "objective_trace":[2.0,1.0]},
    "baselines":{}})");
  CHECK_NOTHROW(io::validate_schema(schema, good));
  auto bad = good;
  bad.erase("stlf");
  CHECK_THROWS_AS(io::validate_schema(schema, bad), FormatError);
  bad = good;
  bad["stlf"]["psi"] = "not an array";
  CHECK_THROWS_AS(io::validate_schema(schema, bad), FormatError);
}

TEST_CASE("config files parse with defaults, overrides, and strict keys") {
  const ExperimentConfig c = config_from_json_text(R"({
    "scenario": {"num_devices": 4, "mode": "mixed", "model_bits": 5e7},
    "solver": {"phi_t": 2.5, "eps_e": 0.05},
    "divergence": {"mode": "estimate", "rounds": 3},
    "baselines": ["random_alpha", {"name": "random_psi"}],
    "repeats": 2,
    "seed": 42
  })");
  CHECK(c.scenario.num_devices == 4);
  CHECK(c.scenario.mode == DomainMode::kMixed);
  CHECK(c.scenario.model_bits == 50000000ull);
  CHECK(c.solver.phi_t == 2.5);
  CHECK(c.solver.eps_E == 0.05);
  CHECK(c.solver.phi_s == 1.0);   // library default
  CHECK(c.solver.phi_e == 1.0);   // library default
  CHECK(c.divergence.estimator.rounds == 3);
  CHECK(c.repeats == 2);
  CHECK(c.master_seed == 42);
  REQUIRE(c.baselines.size() == 2);
  CHECK(c.baselines[0].psi_source == PsiSource::kFromStlf);
  CHECK(c.baselines[1].psi_source == PsiSource::kRandom);

  const ExperimentConfig defaults = config_from_json_text("{}");
  CHECK(defaults.solver.phi_t == 50.0);
  CHECK(defaults.repeats == 5);
  CHECK(defaults.solver.eps_E == 1e-3);
  CHECK(defaults.scenario.model_bits == 1000000000ull);

  CHECK_THROWS_AS(config_from_json_text(R"({"scneario": {}})"), ConfigError);
  CHECK_THROWS_AS(config_from_json_text(R"({"solver": {"phi_x": 1}})"), ConfigError);
  CHECK_THROWS_AS(config_from_json_text("not json"), FormatError);
  CHECK_THROWS_AS(config_from_json_text(R"({"sweep": {"param": "nonsense", "values": [1]}})"),
                  ConfigError);
}

TEST_CASE("cli: run is reproducible, regimes match figures, errors map to exit codes") {
  const fs::path dir = fresh_dir("stlf_cli_test");
  const fs::path cfg_path = dir / "config.json";
  {
    io::json j;
    j["scenario"] = {{"num_devices", 2},
                     {"num_classes", 2},
                     {"feature_dim", 3},
                     {"samples_per_device", 80},
                     {"mode", "single"},
                     {"num_domains", 1},
                     {"labeled_fraction_range", {0.9, 0.9}},
                     {"model_bits", 1.62e8},
                     {"tx_power_range_dbm", {24.0, 24.0}},
                     {"rate_range_bps", {74e6, 74e6}}};
    j["divergence"] = {{"mode", "uniform"}};
    j["bounds"] = {{"emp_err_override", {0.1, 1.0}}, {"size_override", {1e5, 1e5}}};
    j["solver"] = {{"phi_t", 0.2}, {"eps_e", 0.1}};
    j["repeats"] = 1;
    j["seed"] = 7;
    io::write_text(cfg_path, j.dump(2));
  }

  CHECK(cli_main({"run", "--config", cfg_path.string(), "--out", (dir / "r1").string()}) == 0);
  CHECK(cli_main({"run", "--config", cfg_path.string(), "--out", (dir / "r2").string()}) == 0);
  CHECK(slurp(dir / "r1" / "run_0" / "results.json") ==
        slurp(dir / "r2" / "run_0" / "results.json"));

  CHECK(cli_main({"regimes", "--kind", "extreme", "--out", (dir / "ext").string()}) == 0);
  const Mat alpha = io::read_csv(dir / "ext" / "run_0" / "alpha.csv");
  const Mat psi = io::read_csv(dir / "ext" / "run_0" / "psi.csv");
  for (int j = 0; j < 10; ++j)
    if (psi(j, 0) == 1.0) CHECK(alpha(0, j) >= 0.95);

  CHECK(cli_main({"run", "--config", (dir / "missing.json").string()}) == 1);
  CHECK(cli_main({"run", "--bogus-flag"}) == 1);
  CHECK(cli_main({"frobnicate"}) == 1);

  // validation failure inside the config file
  io::write_text(cfg_path, R"({"solver": {"phi_t": 1, "unknown_key": 2}})");
  CHECK(cli_main({"run", "--config", cfg_path.string(), "--out", (dir / "r3").string()}) == 1);
  fs::remove_all(dir);
}

TEST_CASE("hypothesis files round trip") {
  const fs::path dir = fresh_dir("stlf_hyp_io");
  const Hypothesis h = Hypothesis::random_init({5, 3, 4}, 123);
  io::write_hypothesis(dir / "h.bin", h);
  const Hypothesis back = io::read_hypothesis(dir / "h.bin");
  CHECK(back.arch == h.arch);
  CHECK((back.params - h.params).lpNorm<Eigen::Infinity>() == 0.0);
  fs::remove_all(dir);
}


TEST_CASE("output-average combination mode runs end to end") {
  const fs::path out = fresh_dir("stlf_pipe_oavg");
  ExperimentConfig config = tiny_config(out);
  config.combine_mode = CombineMode::kOutputAverage;
  const RunResult r = run_once(config, 5);
  REQUIRE(r.stlf.per_target_accuracy.size() == 1);
  // single member: output averaging equals parameter averaging
  ExperimentConfig param = tiny_config(out);
  const RunResult rp = run_once(param, 5);
  CHECK(r.stlf.per_target_accuracy[0] == rp.stlf.per_target_accuracy[0]);
  fs::remove_all(out);
}

TEST_CASE("model dumps are written and readable") {
  const fs::path out = fresh_dir("stlf_pipe_dump");
  ExperimentConfig config = tiny_config(out);
  config.dump_models = true;
  const RunResult r = run_once(config, 9);
  (void)r;
  bool found = false;
  for (const auto& entry : fs::recursive_directory_iterator(out))
    if (entry.path().filename() == "h_source_0.bin") {
      const Hypothesis h = io::read_hypothesis(entry.path());
      CHECK(h.arch.input_dim == config.scenario.feature_dim);
      found = true;
    }
  CHECK(found);
  fs::remove_all(out);
}

TEST_CASE("output root env var prefixes relative output dirs") {
  const fs::path root = fresh_dir("stlf_env_root");
  setenv("STLF_OUTPUT_ROOT", root.c_str(), 1);
  ExperimentConfig config = tiny_config("rel_out");
  CHECK(resolve_output_dir(config) == root / "rel_out");
  config.output_dir = "/abs/path";
  CHECK(resolve_output_dir(config) == fs::path("/abs/path"));
  unsetenv("STLF_OUTPUT_ROOT");
  fs::remove_all(root);
}

TEST_CASE("cli sweep and baseline subcommands produce their outputs") {
  const fs::path dir = fresh_dir("stlf_cli_sweep");
  const fs::path cfg_path = dir / "config.json";
  nlohmann::json j;
  j["scenario"] = {{"num_devices", 2},
                   {"num_classes", 2},
                   {"feature_dim", 3},
                   {"samples_per_device", 80},
                   {"mode", "single"},
                   {"num_domains", 1},
                   {"labeled_fraction_range", {0.9, 0.9}},
                   {"model_bits", 1.62e8},
                   {"tx_power_range_dbm", {24.0, 24.0}},
                   {"rate_range_bps", {74e6, 74e6}}};
  j["divergence"] = {{"mode", "uniform"}};
  j["bounds"] = {{"emp_err_override", {0.1, 1.0}}, {"size_override", {1e5, 1e5}}};
  j["solver"] = {{"phi_t", 0.2}, {"eps_e", 0.1}};
  j["repeats"] = 1;
  io::write_text(cfg_path, j.dump(2));

  CHECK(cli_main({"sweep", "--config", cfg_path.string(), "--param", "phi_e",
                  "--values", "0.01,100", "--out", (dir / "sw").string()}) == 0);
  const auto summary = nlohmann::json::parse(slurp(dir / "sw" / "sweep_summary.json"));
  CHECK(summary["param"] == "phi_e");
  REQUIRE(summary["points"].size() == 2);
  const double e_low = summary["points"][0]["normalized_energy"][0].get<double>();
  const double e_high = summary["points"][1]["normalized_energy"][0].get<double>();
  CHECK(e_high <= e_low + 1e-9);

  CHECK(cli_main({"baseline", "--config", cfg_path.string(), "--name", "single_matching",
                  "--out", (dir / "bl").string()}) == 0);
  const auto res = nlohmann::json::parse(slurp(dir / "bl" / "run_0" / "results.json"));
  CHECK(res["baselines"].contains("single_matching"));

  CHECK(cli_main({"baseline", "--config", cfg_path.string(), "--name", "bogus"}) == 1);
  fs::remove_all(dir);
}


TEST_CASE("shipped schema file matches the embedded schema") {
  const fs::path shipped = fs::path(STLF_SOURCE_DIR) / "docs" / "results_schema.json";
  const auto from_file = nlohmann::json::parse(slurp(shipped));
  CHECK(from_file == io::results_schema());
}

TEST_CASE("stage failures are tagged and leave partial results behind") {
  const fs::path out = fresh_dir("stlf_pipe_fail");
  ExperimentConfig config = tiny_config(out);
  config.divergence.mode = DivergenceMode::kFile;
  config.divergence.file = (out / "missing.csv").string();
  try {
    run(config);
    FAIL("expected a stage error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("stage divergence") != std::string::npos);
  }
  const auto partial = nlohmann::json::parse(slurp(out / "run_0" / "results_partial.json"));
  CHECK(partial.contains("error"));
  fs::remove_all(out);
}

TEST_SUITE_END();
