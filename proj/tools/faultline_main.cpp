// faultline: coverage-guided chaos testing for a simulated service mesh.
//
// Subcommands: run, coverage, replay, ctd generate|coverage, drift monitor,
// pdg build|compare|generate. Exit codes: 0 success/target reached,
// 1 check failed, 2 run stalled before target, 3 input error.

#include <iostream>

#include <CLI11.hpp>

#include "faultline/json_io.hpp"
#include "faultline/orchestrator.hpp"

using namespace faultline;

namespace {

int cmd_run(const orch::RunConfig& config, const std::string& report_copy) {
  const auto report = orch::run_closed_loop(config);
  if (!report_copy.empty())
    io::write_file(report_copy, orch::report_to_json(report).dump(2));
  std::cout << "rounds:   " << report.rounds << "\n"
            << "coverage: " << report.fraction << "\n"
            << "findings: " << report.findings.size() << "\n"
            << "report:   " << config.out_dir << "/report.json\n";
  if (report.exit_code == orch::kExitStalled) {
    std::cout << "stalled before target; uncovered targets:\n";
    for (const auto& gap : report.unreachable) std::cout << "  " << gap << "\n";
  }
  return report.exit_code;
}

int cmd_coverage(const std::string& run_dir, const std::string& out) {
  const auto report = orch::coverage_from_log(run_dir);
  const auto j = io::coverage_report_to_json(report);
  if (out.empty())
    std::cout << j.dump(2) << "\n";
  else
    io::write_file(out, j.dump(2));
  return 0;
}

int cmd_replay(const std::string& run_dir, int round, bool dump) {
  const auto result = orch::replay(run_dir, round);
  std::cout << "replayed " << result.traces.size() << " candidate runs of round "
            << round << "\n";
  if (dump)
    for (std::size_t i = 0; i < result.traces.size(); ++i)
      std::cout << io::trace_to_json(result.traces[i]).dump(2) << "\n";
  if (!result.checksums_match) {
    std::cerr << "trace checksum mismatch: replay diverged from the recorded run\n";
    return 1;
  }
  std::cout << "traces byte-identical to the recorded run\n";
  return 0;
}

int cmd_ctd_generate(const std::string& model_path, int strength,
                     std::uint64_t seed, const std::string& out) {
  const auto model = ctd::parse_model(io::read_file(model_path), model_path);
  const auto tests = ctd::generate_covering_array(model, strength, seed);
  const auto j = io::ctd_tests_to_json(tests, model);
  if (out.empty())
    std::cout << j.dump(2) << "\n";
  else
    io::write_file(out, j.dump(2));
  std::cerr << tests.size() << " tests cover strength-" << strength
            << " interactions\n";
  return 0;
}

int cmd_ctd_coverage(const std::string& model_path, const std::string& tests_path,
                     int strength) {
  const auto model = ctd::parse_model(io::read_file(model_path), model_path);
  const auto tests =
      io::ctd_tests_from_json(io::load_json_file(tests_path), model);
  std::cout << ctd::interaction_coverage(model, strength, tests) << "\n";
  return 0;
}

int cmd_drift_monitor(const std::string& baseline_path,
                      const std::string& stream_path, const std::string& kind,
                      double threshold, int batch, double alpha,
                      const std::string& spec_path) {
  const auto baseline_calls = io::load_call_log(baseline_path);
  const auto stream = io::load_call_log(stream_path);

  // the API universe comes from the app spec when given, else from the union
  // of both logs
  std::set<graph::ApiId> universe;
  if (!spec_path.empty()) {
    const auto app = io::load_app_spec(spec_path);
    for (const auto& id : app.call_graph().nodes()) universe.insert(id);
  } else {
    universe.insert(baseline_calls.begin(), baseline_calls.end());
    universe.insert(stream.begin(), stream.end());
  }
  drift::SymbolTable table(
      std::vector<graph::ApiId>(universe.begin(), universe.end()));

  auto monitor = drift::BfMonitor::from_baseline(
      drift::model_kind_from_string(kind), table, {{baseline_calls}}, alpha,
      threshold);
  int round = 0;
  for (std::size_t i = 0; i < stream.size(); i += batch) {
    const std::vector<graph::ApiId> chunk(
        stream.begin() + i,
        stream.begin() + std::min(stream.size(), i + batch));
    monitor.observe(chunk);
    nlohmann::json record{{"round", round++},
                          {"observations", monitor.observations()},
                          {"log_bf", monitor.log_bayes_factor()},
                          {"decision", drift::to_string(monitor.decide())}};
    std::cout << record.dump() << "\n";
  }
  return monitor.decide() == drift::Decision::Drift ? 1 : 0;
}

int cmd_pdg_build(const std::string& records_path, const std::string& out,
                  const std::vector<std::string>& sensitive) {
  pdg::PdgConfig config;
  for (const auto& f : sensitive) config.sensitive_fields.insert(f);
  const auto records = io::load_pdg_records(records_path, config.flatten);
  const auto model = pdg::build(records, config);
  io::write_file(out, io::pdg_model_to_json(model).dump(2));
  std::cerr << "model: " << model.buckets.size() << " trace buckets, "
            << model.classifier.leaves().size() << " classifier paths\n";
  return 0;
}

int cmd_pdg_compare(const std::string& model_path, const std::string& tests_path,
                    double threshold, const std::string& out) {
  const auto model = io::pdg_model_from_json(io::load_json_file(model_path));
  const auto tests = io::load_pdg_records(tests_path, model.config.flatten);
  const auto report = pdg::compare(
      model, tests, threshold > 0 ? threshold : model.config.regression_threshold);
  const auto j = io::comparison_report_to_json(report);
  if (out.empty())
    std::cout << j.dump(2) << "\n";
  else
    io::write_file(out, j.dump(2));
  std::cerr << report.anomalies << " anomalies, " << report.unvisited.size()
            << " unvisited paths\n";
  return 0;
}

int cmd_pdg_generate(const std::string& model_path,
                     const std::string& unvisited_path, std::uint64_t seed,
                     const std::string& out) {
  const auto model = io::pdg_model_from_json(io::load_json_file(model_path));
  const auto paths = io::unvisited_from_json(io::load_json_file(unvisited_path));
  const auto result = pdg::generate(model, paths, seed);
  const auto j = io::generation_result_to_json(result);
  if (out.empty())
    std::cout << j.dump(2) << "\n";
  else
    io::write_file(out, j.dump(2));
  std::cerr << result.inputs.size() << " inputs generated, "
            << result.infeasible.size() << " paths infeasible\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"coverage-guided chaos testing for a simulated service mesh"};
  cli.require_subcommand(1);

  // run
  orch::RunConfig run_config;
  auto* run = cli.add_subcommand("run", "execute the closed coverage loop");
  run->add_option("--spec", run_config.spec_path, "application spec file")->required();
  run->add_option("--scenarios", run_config.scenario_dir, "scenario directory")->required();
  run->add_option("--out", run_config.out_dir, "output directory");
  run->add_option("--level", run_config.level, "coverage level i");
  run->add_option("--target", run_config.target, "target coverage fraction");
  run->add_option("--patience", run_config.patience, "rounds without improvement before stopping");
  run->add_option("--max-rounds", run_config.max_rounds, "hard round cap");
  run->add_option("--batch", run_config.batch_size, "candidates per round");
  run->add_option("--seed", run_config.seed, "root seed");
  run->add_option("--workers", run_config.workers, "worker threads (0 = auto)");
  run->add_flag("--dump-trace", run_config.dump_traces, "write per-run trace dumps");
  std::string run_report_copy;
  run->add_option("--report", run_report_copy, "also write the run report to this path");

  // coverage
  std::string cov_run_dir, cov_out;
  auto* coverage = cli.add_subcommand("coverage", "recompute coverage from a run directory");
  coverage->add_option("--run", cov_run_dir, "run directory")->required();
  coverage->add_option("--report", cov_out, "write the report here instead of stdout");

  // replay
  std::string replay_dir;
  int replay_round = 0;
  bool replay_dump = false;
  auto* replay = cli.add_subcommand("replay", "re-execute one recorded round");
  replay->add_option("--run", replay_dir, "run directory")->required();
  replay->add_option("--round", replay_round, "round index")->required();
  replay->add_flag("--dump-trace", replay_dump, "print replayed traces");

  // ctd
  auto* ctd_cmd = cli.add_subcommand("ctd", "combinatorial test design");
  ctd_cmd->require_subcommand(1);
  std::string ctd_model, ctd_tests, ctd_out;
  int ctd_strength = 2;
  std::uint64_t ctd_seed = 0;
  auto* ctd_generate = ctd_cmd->add_subcommand("generate", "generate a covering array");
  ctd_generate->add_option("--model", ctd_model, "CTD model file")->required();
  ctd_generate->add_option("--strength", ctd_strength, "interaction strength");
  ctd_generate->add_option("--seed", ctd_seed, "seed");
  ctd_generate->add_option("--out", ctd_out, "write tests here instead of stdout");
  auto* ctd_coverage = ctd_cmd->add_subcommand("coverage", "measure interaction coverage");
  ctd_coverage->add_option("--model", ctd_model, "CTD model file")->required();
  ctd_coverage->add_option("--tests", ctd_tests, "tests file (JSON array)")->required();
  ctd_coverage->add_option("--strength", ctd_strength, "interaction strength");

  // drift
  auto* drift_cmd = cli.add_subcommand("drift", "API call-stream drift detection");
  drift_cmd->require_subcommand(1);
  std::string drift_baseline, drift_stream, drift_model = "markov", drift_spec;
  double drift_threshold = 10.0, drift_alpha = 1.0;
  int drift_batch = 25;
  auto* drift_monitor = drift_cmd->add_subcommand("monitor", "sequential Bayes-factor monitor");
  drift_monitor->add_option("--baseline", drift_baseline, "baseline call log")->required();
  drift_monitor->add_option("--stream", drift_stream, "live call log")->required();
  drift_monitor->add_option("--model", drift_model, "multinomial|markov");
  drift_monitor->add_option("--threshold", drift_threshold, "Bayes-factor threshold");
  drift_monitor->add_option("--batch", drift_batch, "observations per batch")
      ->check(CLI::PositiveNumber);
  drift_monitor->add_option("--alpha", drift_alpha, "Dirichlet smoothing");
  drift_monitor->add_option("--spec", drift_spec, "app spec fixing the API universe");

  // pdg
  auto* pdg_cmd = cli.add_subcommand("pdg", "per-endpoint dependency models");
  pdg_cmd->require_subcommand(1);
  std::string pdg_records, pdg_model_path, pdg_tests, pdg_unvisited, pdg_out;
  std::vector<std::string> pdg_sensitive;
  double pdg_threshold = 0.0;
  std::uint64_t pdg_seed = 0;
  auto* pdg_build = pdg_cmd->add_subcommand("build", "build a model from production records");
  pdg_build->add_option("--records", pdg_records, "JSONL production records")->required();
  pdg_build->add_option("--out", pdg_out, "model output path")->required();
  pdg_build->add_option("--sensitive", pdg_sensitive, "privacy-sensitive request fields");
  auto* pdg_compare = pdg_cmd->add_subcommand("compare", "map a test suite onto a model");
  pdg_compare->add_option("--model", pdg_model_path, "model file")->required();
  pdg_compare->add_option("--tests", pdg_tests, "JSONL test records")->required();
  pdg_compare->add_option("--threshold", pdg_threshold, "relative error threshold");
  pdg_compare->add_option("--out", pdg_out, "write the report here instead of stdout");
  auto* pdg_generate = pdg_cmd->add_subcommand("generate", "solve unvisited paths into inputs");
  pdg_generate->add_option("--model", pdg_model_path, "model file")->required();
  pdg_generate->add_option("--unvisited", pdg_unvisited, "compare report with unvisited paths")->required();
  pdg_generate->add_option("--seed", pdg_seed, "seed");
  pdg_generate->add_option("--out", pdg_out, "write inputs here instead of stdout");

  CLI11_PARSE(cli, argc, argv);

  try {
    if (*run) return cmd_run(run_config, run_report_copy);
    if (*coverage) return cmd_coverage(cov_run_dir, cov_out);
    if (*replay) return cmd_replay(replay_dir, replay_round, replay_dump);
    if (*ctd_generate) return cmd_ctd_generate(ctd_model, ctd_strength, ctd_seed, ctd_out);
    if (*ctd_coverage) return cmd_ctd_coverage(ctd_model, ctd_tests, ctd_strength);
    if (*drift_monitor)
      return cmd_drift_monitor(drift_baseline, drift_stream, drift_model,
                               drift_threshold, drift_batch, drift_alpha,
                               drift_spec);
    if (*pdg_build) return cmd_pdg_build(pdg_records, pdg_out, pdg_sensitive);
    if (*pdg_compare) return cmd_pdg_compare(pdg_model_path, pdg_tests, pdg_threshold, pdg_out);
    if (*pdg_generate) return cmd_pdg_generate(pdg_model_path, pdg_unvisited, pdg_seed, pdg_out);
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return orch::kExitInputError;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
