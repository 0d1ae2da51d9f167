// Acceptance suite. Each criterion is one test; a listener prints one
// PASS/FAIL line per criterion. Oracles here are written independently of
// the implementation paths they check.

#include <gtest/gtest.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>

#include "faultline/ctd.hpp"
#include "faultline/drift.hpp"
#include "faultline/orchestrator.hpp"
#include "faultline/pdg.hpp"
#include "faultline/perf.hpp"
#include "testutil.hpp"

using namespace faultline;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

// --- criterion 1 helpers -------------------------------------------------

ctd::CtdModel random_ctd_model(SplitRng& rng) {
  ctd::CtdModel m;
  const int nparams = 2 + static_cast<int>(rng.next_below(5));  // 2..6
  for (int p = 0; p < nparams; ++p) {
    const int domain = 2 + static_cast<int>(rng.next_below(3));  // 2..4
    std::vector<std::string> values;
    for (int v = 0; v < domain; ++v) values.push_back("v" + std::to_string(v));
    m.add_parameter("P" + std::to_string(p), values);
  }
  const int nconstraints = static_cast<int>(rng.next_below(4));  // 0..3
  for (int c = 0; c < nconstraints; ++c) {
    const auto& pa = m.parameters()[rng.next_below(nparams)];
    const auto& pb = m.parameters()[rng.next_below(nparams)];
    auto lhs =
        ctd::BoolExpr::atom(pa.name, pa.values[rng.next_below(pa.values.size())]);
    auto rhs =
        ctd::BoolExpr::atom(pb.name, pb.values[rng.next_below(pb.values.size())]);
    switch (rng.next_below(3)) {
      case 0:
        m.add_constraint(ctd::BoolExpr::implication(lhs, rhs));
        break;
      case 1:
        m.add_constraint(
            ctd::BoolExpr::negation(ctd::BoolExpr::conjunction(lhs, rhs)));
        break;
      default:
        m.add_constraint(ctd::BoolExpr::disjunction(lhs, rhs));
        break;
    }
  }
  return m;
}

// Independent brute-force tuple enumerator over the raw Cartesian product.
std::set<ctd::ValueTuple> brute_force_tuples(const ctd::CtdModel& m,
                                             int strength) {
  const auto& params = m.parameters();
  const int n = static_cast<int>(params.size());
  std::uint64_t product = 1;
  for (const auto& p : params) product *= p.values.size();
  std::set<ctd::ValueTuple> out;
  for (std::uint64_t code = 0; code < product; ++code) {
    std::uint64_t rest = code;
    std::vector<int> idx(n);
    for (int i = n - 1; i >= 0; --i) {
      idx[i] = static_cast<int>(rest % params[i].values.size());
      rest /= params[i].values.size();
    }
    ctd::Assignment a;
    for (int i = 0; i < n; ++i) a[params[i].name] = params[i].values[idx[i]];
    bool legal = true;
    for (const auto& c : m.constraints())
      if (!c.eval(a)) {
        legal = false;
        break;
      }
    if (!legal) continue;
    std::vector<int> combo(strength);
    std::function<void(int, int)> rec = [&](int start, int depth) {
      if (depth == strength) {
        ctd::ValueTuple t;
        for (int p : combo) t.push_back({p, idx[p]});
        out.insert(t);
        return;
      }
      for (int p = start; p < n; ++p) {
        combo[depth] = p;
        rec(p + 1, depth + 1);
      }
    };
    rec(0, 0);
  }
  return out;
}

// --- criterion 2 helpers -------------------------------------------------

// Forward closure by fixpoint iteration (independent of the bounded BFS).
std::set<graph::ApiId> forward_closure(const graph::CallGraph& g,
                                       const std::set<graph::ApiId>& apis) {
  std::set<graph::ApiId> closed = apis;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& id : std::set<graph::ApiId>(closed))
      for (const auto& succ : g.successors(id))
        if (closed.insert(succ).second) changed = true;
  }
  return closed;
}

// --- criterion 4 helpers -------------------------------------------------

// Transition table transcribed directly from the pattern's rules: a circuit
// opens after `threshold` consecutive failures, sleeps for the window, then
// the next request decides between closed and a fresh open window.
mesh::BreakerState semantics_table(mesh::BreakerState s, mesh::CallClass oc,
                                   mesh::Tick now,
                                   const mesh::CircuitBreakerConfig& cfg) {
  using mesh::BreakerMode;
  if (s.mode == BreakerMode::Open) {
    if (now - s.opened_at < cfg.sleep_window_ms) return s;  // rejected call
    if (oc == mesh::CallClass::Success)
      return {BreakerMode::Closed, 0, s.opened_at};
    return {BreakerMode::Open, s.consecutive_failures, now};
  }
  if (s.mode == BreakerMode::HalfOpen) {
    if (oc == mesh::CallClass::Success)
      return {BreakerMode::Closed, 0, s.opened_at};
    return {BreakerMode::Open, s.consecutive_failures, now};
  }
  if (oc == mesh::CallClass::Success)
    return {BreakerMode::Closed, 0, s.opened_at};
  const int failures = s.consecutive_failures + 1;
  if (failures >= cfg.failure_threshold)
    return {BreakerMode::Open, failures, now};
  return {BreakerMode::Closed, failures, s.opened_at};
}

// --- criterion 6 helpers -------------------------------------------------

double pdg_oracle_endpoint(double x, const std::string& tier) {
  if (x <= 10) return 1;
  return tier == "gold" ? 2 : 3;
}

std::vector<pdg::PdgRecord> pdg_production() {
  std::vector<pdg::PdgRecord> records;
  const char* tiers[] = {"gold", "silver", "bronze"};
  for (int i = 0; i < 90; ++i) {
    const double x = static_cast<double>(i % 30) * 3 + (i % 2);
    const std::string tier = tiers[i % 3];
    pdg::PdgRecord rec;
    rec.request = {{"x", pdg::Scalar{x}}, {"tier", pdg::Scalar{tier}}};
    rec.response = {{"y", pdg::Scalar{pdg_oracle_endpoint(x, tier)}}};
    rec.trace = std::vector<graph::ApiId>{graph::api("orders")};
    records.push_back(std::move(rec));
  }
  return records;
}

std::string demo_dir() { return FAULTLINE_DEMO_DIR; }

}  // namespace

// 1. Covering arrays reach full interaction coverage at strengths 1-3 on 200
//    random constrained models, checked against brute-force enumeration; the
//    3-binary strength-2 array has exactly 4 tests.
TEST(Acceptance, Criterion1_CoveringArrays) {
  const auto start = std::chrono::steady_clock::now();
  SplitRng rng(20260810);
  int accepted = 0;
  std::uint64_t stream = 0;
  while (accepted < 200) {
    SplitRng model_rng = rng.split(stream++);
    auto model = random_ctd_model(model_rng);
    if (ctd::enumerate_legal(model).empty()) continue;  // resample unsat model
    ++accepted;
    const int max_strength =
        std::min<int>(3, static_cast<int>(model.parameters().size()));
    for (int strength = 1; strength <= max_strength; ++strength) {
      const auto tests = ctd::generate_covering_array(model, strength, stream);
      for (const auto& t : tests) ASSERT_TRUE(ctd::is_legal(model, t));
      ASSERT_DOUBLE_EQ(ctd::interaction_coverage(model, strength, tests), 1.0)
          << "model " << accepted << " strength " << strength;
      ASSERT_EQ(ctd::realizable_tuples(model, strength),
                brute_force_tuples(model, strength));
    }
  }
  // exact minimal size for 3 binary parameters at strength 2: the counting
  // bound gives ceil(12/3) = 4 and the greedy construction must achieve it
  ctd::CtdModel binary3;
  binary3.add_parameter("P1", {"0", "1"});
  binary3.add_parameter("P2", {"0", "1"});
  binary3.add_parameter("P3", {"0", "1"});
  EXPECT_EQ(ctd::generate_covering_array(binary3, 2, 42).size(), 4u);
  EXPECT_LT(seconds_since(start), 30.0);
}

// 2. Footprint expansion is a monotone hierarchy saturating at the forward
//    closure, on 100 random graphs with up to 20 nodes.
TEST(Acceptance, Criterion2_CoverageHierarchy) {
  SplitRng rng(77001);
  for (int trial = 0; trial < 100; ++trial) {
    graph::CallGraph g;
    const int n = 1 + static_cast<int>(rng.next_below(20));
    std::vector<graph::ApiId> ids;
    for (int i = 0; i < n; ++i) {
      ids.push_back(graph::api("f" + std::to_string(i)));
      g.add_node(ids.back());
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (rng.next_unit() < 0.15) g.add_edge(ids[i], ids[j]);
    std::set<graph::ApiId> fp;
    for (const auto& id : ids)
      if (rng.next_unit() < 0.3) fp.insert(id);
    if (fp.empty()) fp.insert(ids[0]);

    std::set<graph::ApiId> prev = graph::expand_footprint(g, fp, 1);
    ASSERT_EQ(prev, fp);  // level 1 is the footprint itself
    for (int level = 2; level <= 20; ++level) {
      const auto cur = graph::expand_footprint(g, fp, level);
      ASSERT_TRUE(
          std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()))
          << "hierarchy violated at level " << level;
      prev = cur;
    }
    ASSERT_EQ(graph::expand_footprint(g, fp, n), forward_closure(g, fp))
        << "no saturation at level " << n;
  }
}

// 3. The closed loop reaches coverage 1.0 on the bundled 6-service demo app
//    within 50 rounds and 10 seconds; replaying any round reproduces
//    byte-identical traces.
TEST(Acceptance, Criterion3_ClosedLoop) {
  const auto start = std::chrono::steady_clock::now();
  orch::RunConfig config;
  config.spec_path = demo_dir() + "/app.json";
  config.scenario_dir = demo_dir() + "/scenarios";
  const auto out = std::filesystem::temp_directory_path() / "faultline_accept3";
  std::filesystem::remove_all(out);
  config.out_dir = out.string();
  config.level = 1;
  config.target = 1.0;
  config.seed = 42;
  const auto report = orch::run_closed_loop(config);
  EXPECT_EQ(report.exit_code, orch::kExitTargetReached);
  EXPECT_DOUBLE_EQ(report.fraction, 1.0);
  EXPECT_LE(report.rounds, 50);
  for (int round = 0; round < report.rounds; ++round) {
    const auto replayed = orch::replay(config.out_dir, round);
    EXPECT_TRUE(replayed.checksums_match)
        << "round " << round << " replay diverged";
  }
  EXPECT_LT(seconds_since(start), 10.0);
}

// 4. The breaker state machine matches the semantics table exhaustively for
//    thresholds up to 4.
TEST(Acceptance, Criterion4_CircuitBreakerModelCheck) {
  long checked = 0;
  for (int threshold = 1; threshold <= 4; ++threshold) {
    const mesh::CircuitBreakerConfig cfg{threshold, 10};
    for (mesh::BreakerMode mode :
         {mesh::BreakerMode::Closed, mesh::BreakerMode::Open,
          mesh::BreakerMode::HalfOpen}) {
      const int max_failures =
          mode == mesh::BreakerMode::Closed ? threshold - 1 : threshold;
      for (int failures = 0; failures <= max_failures; ++failures) {
        for (mesh::Tick now : {0, 3, 9, 10, 17}) {  // around the sleep window
          for (mesh::CallClass oc :
               {mesh::CallClass::Success, mesh::CallClass::Failure}) {
            mesh::BreakerState s{mode, failures, 0};
            const auto got = mesh::step_circuit_breaker(s, oc, now, cfg);
            const auto want = semantics_table(s, oc, now, cfg);
            ASSERT_EQ(got.mode, want.mode)
                << "threshold " << threshold << " mode " << static_cast<int>(mode)
                << " failures " << failures << " now " << now;
            ASSERT_EQ(got.consecutive_failures, want.consecutive_failures);
            if (got.mode == mesh::BreakerMode::Open)
              ASSERT_EQ(got.opened_at, want.opened_at);
            if (got.mode == mesh::BreakerMode::Closed)
              ASSERT_LT(got.consecutive_failures, threshold);
            ++checked;
          }
        }
      }
    }
  }
  // sum over thresholds 1..4 of (3*threshold + 2) states x 5 clocks x 2 outcomes
  ASSERT_EQ(checked, 380);
}

// 5. Drift detection: at most 5% false alarms over 200 baseline streams of
//    length 500; at least 90% detection within 200 observations when one
//    transition row is perturbed by total-variation distance 0.4.
TEST(Acceptance, Criterion5_DriftRates) {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<std::vector<double>> baseline_chain{
      {0.5, 0.3, 0.2}, {0.2, 0.5, 0.3}, {0.3, 0.2, 0.5}};
  // one row moved by TV 0.4: |0.9-0.5|+|0.06-0.3|+|0.04-0.2| = 0.8, halved
  std::vector<std::vector<double>> drifted_chain = baseline_chain;
  drifted_chain[0] = {0.9, 0.06, 0.04};

  drift::SymbolTable table(
      {graph::api("f0"), graph::api("f1"), graph::api("f2")});
  SplitRng rng(555);
  drift::CallSequence baseline;
  baseline.calls =
      testutil::to_apis(testutil::sample_markov(baseline_chain, 3000, rng.split("base")));

  int false_alarms = 0;
  for (int stream = 0; stream < 200; ++stream) {
    auto monitor = drift::BfMonitor::from_baseline(
        drift::ModelKind::Markov, table, {baseline}, 1.0, 10.0);
    const auto calls = testutil::to_apis(testutil::sample_markov(
        baseline_chain, 500, rng.split("h0").split(stream)));
    for (std::size_t i = 0; i < calls.size(); i += 25)
      monitor.observe(std::vector<graph::ApiId>(
          calls.begin() + i, calls.begin() + std::min(calls.size(), i + 25)));
    false_alarms += monitor.decide() == drift::Decision::Drift;
  }
  EXPECT_LE(false_alarms, 10) << "false alarm rate above 5%";

  int detections = 0;
  for (int stream = 0; stream < 200; ++stream) {
    auto monitor = drift::BfMonitor::from_baseline(
        drift::ModelKind::Markov, table, {baseline}, 1.0, 10.0);
    const auto calls = testutil::to_apis(testutil::sample_markov(
        drifted_chain, 200, rng.split("h1").split(stream)));
    for (std::size_t i = 0; i < calls.size(); i += 25)
      monitor.observe(std::vector<graph::ApiId>(
          calls.begin() + i, calls.begin() + std::min(calls.size(), i + 25)));
    detections += monitor.decide() == drift::Decision::Drift;
  }
  EXPECT_GE(detections, 180) << "detection power below 90%";
  EXPECT_LT(seconds_since(start), 20.0);
}

// 6. PDG round-trip: a 1-path test suite leaves exactly 2 unvisited paths on
//    the 3-path fixture; generated inputs reach every targeted path; no
//    sensitive-field value equals a production value.
TEST(Acceptance, Criterion6_PdgRoundTripAndGeneration) {
  pdg::PdgConfig config;
  config.sensitive_fields = {"x"};
  const auto records = pdg_production();
  const auto model = pdg::build(records, config);

  std::vector<pdg::PdgRecord> suite;
  pdg::PdgRecord probe;
  probe.request = {{"x", pdg::Scalar{3.0}}, {"tier", pdg::Scalar{std::string("gold")}}};
  probe.response = {{"y", pdg::Scalar{1.0}}};
  probe.trace = std::vector<graph::ApiId>{graph::api("orders")};
  suite.push_back(probe);

  const auto report = pdg::compare(model, suite, 0.1);
  EXPECT_EQ(report.anomalies, 0);
  ASSERT_EQ(report.unvisited.size(), 2u);

  const auto generated = pdg::generate(model, report.unvisited, 7);
  EXPECT_TRUE(generated.infeasible.empty());
  ASSERT_EQ(generated.inputs.size(), 2u);
  const auto& tree = model.bucket("orders")->regression.at("y");
  for (const auto& gi : generated.inputs) {
    // the oracle endpoint routes the generated input to the targeted branch
    const double x = std::get<double>(gi.request.at("x"));
    const std::string tier = std::get<std::string>(gi.request.at("tier"));
    const double y = pdg_oracle_endpoint(x, tier);
    EXPECT_EQ(tree.predict_leaf(gi.request), gi.ref.leaf);
    EXPECT_NEAR(std::get<double>(tree.nodes()[gi.ref.leaf].prediction), y, 1e-9);
    // privacy: bit-equality against every raw production value
    EXPECT_EQ(model.production_values.at("x").count(x), 0u);
  }
}

// 7. Perf accounting: 5 consecutive 10x-median delays yield M_i = 5 and a
//    grand total equal to the oracle's injected-event count; fault-free runs
//    produce zero anomalies.
TEST(Acceptance, Criterion7_PerfAccounting) {
  // module-level stream with a known injection oracle
  std::vector<perf::PerfSample> baseline;
  for (int i = 0; i < 12; ++i)
    baseline.push_back({graph::api("payment"), 20, i * 10});
  std::vector<perf::PerfSample> live;
  for (int i = 0; i < 4; ++i)
    live.push_back({graph::api("payment"), 20, i * 10});
  int injected = 0;
  for (int i = 0; i < 5; ++i) {
    live.push_back({graph::api("payment"), 200, 100 + i * 10});  // 10x median
    ++injected;
  }
  for (int i = 0; i < 3; ++i)
    live.push_back({graph::api("payment"), 20, 200 + i * 10});
  const auto verdicts = perf::filter_anomalies(live, baseline);
  const auto totals = perf::total_anomalies(verdicts);
  EXPECT_EQ(totals.per_api.at(graph::api("payment")), 5);
  EXPECT_EQ(totals.total, injected);

  // fault-free mesh runs against their own baseline: zero anomalies
  const auto loaded =
      orch::load_app(demo_dir() + "/app.json", demo_dir() + "/scenarios");
  std::vector<mesh::ExecutionTrace> clean;
  for (const auto& sc : loaded.scenarios)
    clean.push_back(
        mesh::run_scenario(loaded.app, sc, {}, loaded.app.placement, 99));
  const auto collected = perf::collect(clean);
  const auto clean_verdicts =
      perf::filter_anomalies(collected.samples, collected.samples);
  EXPECT_EQ(perf::total_anomalies(clean_verdicts).total, 0);
}

// 8. Plug-in Bayes-factor arithmetic matches hand-computed values to 1e-12;
//    BF is exactly 1 before any observation.
TEST(Acceptance, Criterion8_BayesFactorArithmetic) {
  // log-likelihoods on the 2-API examples
  const std::vector<std::vector<double>> deterministic{{0.0, 1.0}, {1.0, 0.0}};
  EXPECT_NEAR(drift::log_likelihood(deterministic, {0, 1, 0}), 0.0, 1e-12);
  const std::vector<std::vector<double>> mixed{{0.5, 0.5}, {1.0, 0.0}};
  EXPECT_NEAR(drift::log_likelihood(mixed, {0, 1, 0}), std::log(0.5), 1e-12);
  const std::vector<double> theta{0.5, 0.5};
  EXPECT_NEAR(drift::log_likelihood(theta, {0, 1, 1, 0}), 4 * std::log(0.5),
              1e-12);

  drift::SymbolTable table({graph::api("f0"), graph::api("f1")});
  drift::MarkovModel prior;
  prior.counts = {{1.0, 1.0}, {1.0, 1.0}};
  drift::BfMonitor monitor(drift::ModelKind::Markov, table, prior, 10.0);
  EXPECT_EQ(monitor.log_bayes_factor(), 0.0);  // exactly, zero observations
  EXPECT_EQ(monitor.bayes_factor(), 1.0);

  std::vector<graph::ApiId> stream{graph::api("f0")};
  for (int i = 0; i < 20; ++i) {
    stream.push_back(graph::api("f1"));
    stream.push_back(graph::api("f0"));
  }
  monitor.observe(stream);
  const double expected = 40.0 * (std::log(21.0 / 22.0) - std::log(0.5));
  EXPECT_NEAR(monitor.log_bayes_factor(), expected, 1e-12);
}

namespace {

class CriterionPrinter : public ::testing::EmptyTestEventListener {
  void OnTestEnd(const ::testing::TestInfo& info) override {
    std::printf("[ACCEPTANCE] %s: %s\n", info.name(),
                info.result()->Passed() ? "PASS" : "FAIL");
    std::fflush(stdout);
  }
};

}  // namespace

int main(int argc, char** argv) {
  ::testing::InitGoogleTest(&argc, argv);
  ::testing::UnitTest::GetInstance()->listeners().Append(new CriterionPrinter);
  return RUN_ALL_TESTS();
}
