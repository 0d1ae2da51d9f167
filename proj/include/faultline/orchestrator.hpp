#pragma once

// Closed-loop driver: load spec and scenarios, run rounds
// (propose -> execute -> extract events -> update), monitor drift and perf
// along the way, append every round to a replayable log, and emit the run
// report.
//
// Round execution fans candidate runs out across a worker pool; result
// merging and search-state mutation stay sequential, and all file writes
// happen on the merging path.

#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "faultline/drift.hpp"
#include "faultline/json_io.hpp"
#include "faultline/perf.hpp"
#include "faultline/search.hpp"

namespace faultline::orch {

namespace fs = std::filesystem;

inline constexpr int kExitTargetReached = 0;
inline constexpr int kExitStalled = 2;
inline constexpr int kExitInputError = 3;

struct RunConfig {
  std::string spec_path;
  std::string scenario_dir;
  std::string out_dir = "out";
  int level = 1;
  double target = 1.0;
  int patience = 5;
  int max_rounds = 100;
  int batch_size = 16;
  std::uint64_t seed = 0;
  bool dump_traces = false;
  int workers = 0;  // 0 = hardware concurrency
  double drift_threshold = 10.0;
  double drift_alpha = 1.0;

  void validate() const {
    if (!(target > 0.0) || target > 1.0)
      throw InputError("target must be in (0,1]");
    if (patience < 1) throw InputError("patience must be >= 1");
    if (level < 1) throw InputError("level must be >= 1");
    if (max_rounds < 1) throw InputError("max-rounds must be >= 1");
  }
};

struct Finding {
  int round = 0;  // -1 for the fault-free baseline pass
  std::string scenario;
  std::string annotation;
  std::string summary;
};

struct DriftRecord {
  int round = 0;
  double log_bf = 0.0;
  drift::Decision decision = drift::Decision::NoDrift;
};

struct RunReport {
  int rounds = 0;
  double fraction = 0.0;
  graph::CoverageReport coverage;
  std::vector<Finding> findings;
  std::vector<DriftRecord> drift_rounds;
  perf::AnomalyTotals perf_totals;
  std::map<graph::ApiId, perf::LatencyQuantiles> latency;
  std::vector<perf::ThroughputWindow> throughput;
  std::vector<perf::LoadSuggestion> load_suggestions;
  std::vector<std::string> unreachable;
  int exit_code = kExitTargetReached;
};

struct LoadedApp {
  mesh::AppSpec app;
  std::vector<mesh::TestScenario> scenarios;
  graph::CallGraph g;
  std::uint64_t spec_checksum = 0;
  std::uint64_t scenarios_checksum = 0;
};

inline LoadedApp load_app(const std::string& spec_path,
                          const std::string& scenario_dir) {
  LoadedApp loaded;
  loaded.app = io::load_app_spec(spec_path);
  loaded.spec_checksum = io::file_checksum(spec_path);
  if (!fs::is_directory(scenario_dir))
    throw InputError("scenario directory '" + scenario_dir + "' not found");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(scenario_dir))
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw InputError("no scenario files (*.json) in '" + scenario_dir + "'");
  std::uint64_t checksum = 1469598103934665603ull;
  for (const auto& file : files) {
    auto scenario = io::load_scenario(file.string());
    scenario.validate(loaded.app);
    for (const auto& existing : loaded.scenarios)
      if (existing.test_id == scenario.test_id)
        throw InputError("duplicate test_id '" + scenario.test_id + "' in " +
                         file.string());
    checksum = fnv1a(io::read_file(file.string()), checksum);
    loaded.scenarios.push_back(std::move(scenario));
  }
  loaded.scenarios_checksum = checksum;
  loaded.g = loaded.app.call_graph();
  return loaded;
}

namespace detail {

inline const mesh::TestScenario& scenario_by_id(const LoadedApp& loaded,
                                                const std::string& id) {
  for (const auto& sc : loaded.scenarios)
    if (sc.test_id == id) return sc;
  throw InputError("unknown scenario '" + id + "'");
}

inline std::set<graph::ApiId> observed_apis(const mesh::ExecutionTrace& trace) {
  std::set<graph::ApiId> apis;
  for (const auto& rec : trace.records) {
    if (!(rec.caller == faults::kClient)) apis.insert(rec.caller);
    if (!rec.breaker_rejected && rec.outcome != mesh::Outcome::Dropped)
      apis.insert(rec.callee);
  }
  return apis;
}

inline std::vector<graph::ApiId> call_sequence(const mesh::ExecutionTrace& trace) {
  std::vector<graph::ApiId> calls;
  for (const auto& rec : trace.records)
    if (!rec.breaker_rejected && rec.outcome != mesh::Outcome::Dropped)
      calls.push_back(rec.callee);
  return calls;
}

inline faults::FaultPlan effective_plan(const search::Candidate& c) {
  faults::FaultPlan plan = c.plan;
  for (const auto& [svc, site] : c.placement_override)
    plan.hooks.placement_override[svc] = site;
  return plan;
}

// Runs a batch across a small worker pool; results come back in candidate
// order regardless of completion order.
inline std::vector<mesh::ExecutionTrace> execute_batch(
    const LoadedApp& loaded, const std::vector<search::Candidate>& batch,
    int workers) {
  std::vector<mesh::ExecutionTrace> traces(batch.size());
  if (workers <= 0)
    workers = std::max(1u, std::thread::hardware_concurrency());
  std::size_t next = 0;
  while (next < batch.size()) {
    const std::size_t chunk =
        std::min<std::size_t>(workers, batch.size() - next);
    std::vector<std::future<mesh::ExecutionTrace>> futures;
    for (std::size_t i = 0; i < chunk; ++i) {
      const auto& candidate = batch[next + i];
      futures.push_back(std::async(std::launch::async, [&loaded, &candidate] {
        return mesh::run_scenario(loaded.app,
                                  scenario_by_id(loaded, candidate.scenario_id),
                                  effective_plan(candidate),
                                  loaded.app.placement, candidate.order_seed);
      }));
    }
    for (std::size_t i = 0; i < chunk; ++i)
      traces[next + i] = futures[i].get();
    next += chunk;
  }
  return traces;
}

inline void merge_footprint(std::vector<graph::TestFootprint>& footprints,
                            const std::string& test_id,
                            const std::set<graph::ApiId>& apis) {
  for (auto& fp : footprints)
    if (fp.test_id == test_id) {
      fp = graph::footprint_union({fp, {test_id, apis}});
      return;
    }
  footprints.push_back({test_id, apis});
}

inline nlohmann::json footprints_to_json(
    const std::vector<graph::TestFootprint>& footprints) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& fp : footprints) {
    nlohmann::json apis = nlohmann::json::array();
    for (const auto& api : fp.apis) apis.push_back(api.label);
    out[fp.test_id] = apis;
  }
  return out;
}

}  // namespace detail

inline nlohmann::json report_to_json(const RunReport& report) {
  nlohmann::json findings = nlohmann::json::array();
  for (const auto& f : report.findings)
    findings.push_back({{"round", f.round},
                        {"scenario", f.scenario},
                        {"annotation", f.annotation},
                        {"summary", f.summary}});
  nlohmann::json drift_rounds = nlohmann::json::array();
  for (const auto& d : report.drift_rounds)
    drift_rounds.push_back({{"round", d.round},
                            {"log_bf", d.log_bf},
                            {"decision", drift::to_string(d.decision)}});
  nlohmann::json per_api = nlohmann::json::object();
  for (const auto& [api, count] : report.perf_totals.per_api)
    per_api[api.label] = count;
  nlohmann::json latency = nlohmann::json::object();
  for (const auto& [api, q] : report.latency)
    latency[api.label] = {{"q50", q.q50},
                          {"q90", q.q90},
                          {"q99", q.q99},
                          {"samples", q.samples}};
  nlohmann::json throughput = nlohmann::json::array();
  for (const auto& w : report.throughput)
    throughput.push_back({{"api", w.api.label},
                          {"window_start", w.start},
                          {"window_end", w.end},
                          {"completed", w.completed}});
  nlohmann::json suggestions = nlohmann::json::array();
  for (const auto& s : report.load_suggestions)
    suggestions.push_back({{"api", s.api.label},
                           {"current", s.current},
                           {"suggested", s.suggested},
                           {"reason", s.reason}});
  return {{"rounds", report.rounds},
          {"fraction", report.fraction},
          {"exit_code", report.exit_code},
          {"coverage", io::coverage_report_to_json(report.coverage)},
          {"findings", findings},
          {"drift", drift_rounds},
          {"perf",
           {{"per_api_real_anomalies", per_api},
            {"total_real_anomalies", report.perf_totals.total},
            {"latency_quantiles_ms", latency},
            {"throughput_windows", throughput},
            {"suggestions", suggestions}}},
          {"unreachable", report.unreachable}};
}

inline RunReport run_closed_loop(const RunConfig& config) {
  config.validate();
  const LoadedApp loaded = load_app(config.spec_path, config.scenario_dir);

  fs::create_directories(config.out_dir);
  if (config.dump_traces) fs::create_directories(config.out_dir + "/traces");
  std::ofstream round_log(config.out_dir + "/rounds.jsonl",
                          std::ios::trunc | std::ios::binary);
  if (!round_log)
    throw InputError("cannot write '" + config.out_dir + "/rounds.jsonl'");

  nlohmann::json header{{"spec_path", config.spec_path},
                        {"scenario_dir", config.scenario_dir},
                        {"spec_checksum", loaded.spec_checksum},
                        {"scenarios_checksum", loaded.scenarios_checksum},
                        {"seed", config.seed},
                        {"level", config.level},
                        {"target", config.target}};
  round_log << header.dump() << "\n";

  search::SearchContext ctx;
  ctx.g = &loaded.g;
  for (const auto& svc : loaded.app.services)
    for (const auto& ep : svc.endpoints)
      ctx.caller_timeout_ms[ep.api] = ep.timeout_ms;

  search::SearchState state;
  state.level = config.level;
  state.seed = config.seed;

  search::SearchConfig scfg;
  scfg.target_fraction = config.target;
  scfg.patience = config.patience;
  scfg.max_rounds = config.max_rounds;
  scfg.batch_size = config.batch_size;

  RunReport report;

  // Fault-free baseline pass: observes footprints and primes the drift and
  // perf baselines.
  std::vector<mesh::ExecutionTrace> baseline_traces;
  std::vector<drift::CallSequence> drift_baseline;
  {
    std::vector<search::Candidate> baseline_batch;
    SplitRng baseline_rng = SplitRng(config.seed).split("baseline");
    for (const auto& sc : loaded.scenarios) {
      search::Candidate c;
      c.scenario_id = sc.test_id;
      c.annotation = "baseline";
      c.order_seed = baseline_rng.split(sc.test_id).next_u64();
      baseline_batch.push_back(std::move(c));
    }
    baseline_traces = detail::execute_batch(loaded, baseline_batch, config.workers);
    for (std::size_t i = 0; i < baseline_traces.size(); ++i) {
      const auto& trace = baseline_traces[i];
      detail::merge_footprint(ctx.footprints, trace.test_id,
                              detail::observed_apis(trace));
      if (trace.classification == mesh::RunClass::TestFailure)
        report.findings.push_back(
            {-1, trace.test_id, "baseline",
             "fault-free run classified testFailure"});
      drift_baseline.push_back({detail::call_sequence(trace)});
    }
  }

  std::vector<graph::ApiId> all_apis(loaded.g.nodes().begin(),
                                     loaded.g.nodes().end());
  drift::SymbolTable symbols(all_apis);
  std::optional<drift::BfMonitor> monitor;
  bool drift_baseline_usable = false;
  for (const auto& seq : drift_baseline)
    if (!seq.calls.empty()) drift_baseline_usable = true;
  if (drift_baseline_usable)
    monitor = drift::BfMonitor::from_baseline(
        drift::ModelKind::Markov, symbols, drift_baseline, config.drift_alpha,
        config.drift_threshold);

  const auto initial =
      graph::coverage_status(state.ledger, loaded.g, ctx.footprints, state.level);
  state.fraction = initial.fraction();
  state.best_fraction = state.fraction;

  std::vector<mesh::ExecutionTrace> round_traces_all;
  while (!search::should_stop(state, scfg)) {
    auto batch = search::propose(state, ctx, scfg);
    std::vector<mesh::ExecutionTrace> traces;
    std::vector<search::ExecutedCandidate> executed;
    std::vector<std::uint64_t> checksums;
    if (!batch.empty()) {
      traces = detail::execute_batch(loaded, batch, config.workers);
      for (std::size_t i = 0; i < traces.size(); ++i) {
        const auto& trace = traces[i];
        detail::merge_footprint(ctx.footprints, trace.test_id,
                                detail::observed_apis(trace));
        const auto events =
            mesh::extract_events(trace, detail::effective_plan(batch[i]));
        if (trace.classification == mesh::RunClass::TestFailure)
          report.findings.push_back({state.round, trace.test_id,
                                     batch[i].annotation,
                                     "run classified testFailure"});
        executed.push_back({batch[i], events});
        checksums.push_back(io::trace_checksum(trace));
      }
    }
    const int round_index = state.round;
    search::update(state, ctx, executed);

    std::vector<graph::ApiId> round_stream;
    for (const auto& trace : traces)
      for (const auto& api : detail::call_sequence(trace))
        round_stream.push_back(api);
    if (monitor && !round_stream.empty()) {
      monitor->observe(round_stream);
      report.drift_rounds.push_back(
          {round_index, monitor->log_bayes_factor(), monitor->decide()});
    }

    nlohmann::json round_record{
        {"round", round_index},
        {"fraction", state.fraction},
        {"trace_checksums", checksums},
        {"footprints", detail::footprints_to_json(ctx.footprints)}};
    nlohmann::json candidates = nlohmann::json::array();
    nlohmann::json event_sets = nlohmann::json::array();
    for (const auto& ec : executed) {
      candidates.push_back(io::candidate_to_json(ec.candidate));
      nlohmann::json evs = nlohmann::json::array();
      for (const auto& ev : ec.events) evs.push_back(io::event_to_json(ev));
      event_sets.push_back(evs);
    }
    round_record["candidates"] = candidates;
    round_record["events"] = event_sets;
    round_log << round_record.dump() << "\n";
    round_log.flush();

    if (config.dump_traces)
      for (std::size_t i = 0; i < traces.size(); ++i)
        io::write_file(config.out_dir + "/traces/round_" +
                           std::to_string(round_index) + "_" +
                           std::to_string(i) + ".json",
                       io::trace_to_json(traces[i]).dump(2));
    for (auto& trace : traces) round_traces_all.push_back(std::move(trace));
    if (batch.empty()) break;
  }

  // Perf accounting: baseline from the fault-free pass, live from the rounds.
  const auto baseline_collected = perf::collect(baseline_traces);
  const auto live_collected = perf::collect(round_traces_all);
  if (!baseline_collected.samples.empty() && !live_collected.samples.empty()) {
    const auto verdicts = perf::filter_anomalies(live_collected.samples,
                                                 baseline_collected.samples);
    report.perf_totals = perf::total_anomalies(verdicts);
    report.latency = perf::latency_quantiles(live_collected.samples);
    report.throughput = live_collected.windows;
    std::map<graph::ApiId, int> profile;
    for (const auto& api : all_apis) profile[api] = 1;
    report.load_suggestions = perf::suggest_load(profile, verdicts);
  }

  report.rounds = state.round;
  report.fraction = state.fraction;
  report.coverage =
      graph::coverage_status(state.ledger, loaded.g, ctx.footprints, state.level);
  report.unreachable = state.unreachable;
  // Unreached target: list the pairs still uncovered so stalls are auditable.
  if (report.fraction < config.target - 1e-12) {
    report.exit_code = kExitStalled;
    for (const auto& tc : report.coverage.tests)
      for (const auto& [edge, kind] : tc.uncovered)
        report.unreachable.push_back(search::detail::gap_key(tc.test_id, edge, kind));
  }

  io::write_file(config.out_dir + "/report.json",
                 report_to_json(report).dump(2));
  return report;
}

// ---------------------------------------------------------------------------
// Replay

struct ReplayResult {
  std::vector<mesh::ExecutionTrace> traces;
  bool checksums_match = true;
};

// Re-executes the candidates recorded for one round; traces must be
// byte-identical to the original run (verified via recorded checksums).
inline ReplayResult replay(const std::string& run_dir, int round_index) {
  const std::string log_path = run_dir + "/rounds.jsonl";
  std::istringstream log(io::read_file(log_path));
  std::string line;
  if (!std::getline(log, line) || line.empty())
    throw InputError(log_path + ": empty round log");
  const auto header = io::parse_json(line, log_path);

  const std::string spec_path = header.at("spec_path").get<std::string>();
  const std::string scenario_dir = header.at("scenario_dir").get<std::string>();
  const LoadedApp loaded = load_app(spec_path, scenario_dir);
  if (loaded.spec_checksum != header.at("spec_checksum").get<std::uint64_t>())
    throw InputError("spec checksum mismatch: '" + spec_path +
                     "' changed since the recorded run");
  if (loaded.scenarios_checksum !=
      header.at("scenarios_checksum").get<std::uint64_t>())
    throw InputError("scenario checksum mismatch: '" + scenario_dir +
                     "' changed since the recorded run");

  std::optional<nlohmann::json> round_record;
  while (std::getline(log, line)) {
    if (line.empty()) continue;
    auto record = io::parse_json(line, log_path);
    if (record.value("round", -1) == round_index) {
      round_record = std::move(record);
      break;
    }
  }
  if (!round_record)
    throw InputError("round " + std::to_string(round_index) + " not in " +
                     log_path);

  ReplayResult result;
  const auto& candidates = round_record->at("candidates");
  const auto& checksums = round_record->at("trace_checksums");
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto candidate = io::candidate_from_json(candidates[i]);
    auto trace = mesh::run_scenario(
        loaded.app, detail::scenario_by_id(loaded, candidate.scenario_id),
        detail::effective_plan(candidate), loaded.app.placement,
        candidate.order_seed);
    if (io::trace_checksum(trace) != checksums[i].get<std::uint64_t>())
      result.checksums_match = false;
    result.traces.push_back(std::move(trace));
  }
  return result;
}

// Rebuild the ledger and footprints recorded in a round log and recompute
// coverage (the report's fraction must round-trip).
inline graph::CoverageReport coverage_from_log(const std::string& run_dir) {
  const std::string log_path = run_dir + "/rounds.jsonl";
  std::istringstream log(io::read_file(log_path));
  std::string line;
  if (!std::getline(log, line))
    throw InputError(log_path + ": empty round log");
  const auto header = io::parse_json(line, log_path);
  const int level = header.at("level").get<int>();
  const auto loaded = load_app(header.at("spec_path").get<std::string>(),
                               header.at("scenario_dir").get<std::string>());

  graph::CoverageLedger ledger;
  ledger.set_level(level);
  std::vector<graph::TestFootprint> footprints;
  while (std::getline(log, line)) {
    if (line.empty()) continue;
    const auto record = io::parse_json(line, log_path);
    const auto& candidates = record.at("candidates");
    const auto& event_sets = record.at("events");
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const std::string test = candidates[i].at("scenario").get<std::string>();
      for (const auto& ev : event_sets[i])
        ledger.record(test, io::event_from_json(ev));
    }
    footprints.clear();
    for (const auto& [test, apis] : record.at("footprints").items()) {
      graph::TestFootprint fp;
      fp.test_id = test;
      for (const auto& api : apis) fp.apis.insert(graph::api(api.get<std::string>()));
      footprints.push_back(std::move(fp));
    }
  }
  return graph::coverage_status(ledger, loaded.g, footprints, level);
}

}  // namespace faultline::orch
