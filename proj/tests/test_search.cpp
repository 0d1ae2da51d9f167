// Search-loop tests. Proposed plans are validated and replayed through the
// simulator to confirm they produce the targeted coverage events.

#include "faultline/search.hpp"

#include <gtest/gtest.h>

#include "faultline/mesh.hpp"

using namespace faultline;
using namespace faultline::search;

namespace {

// Two-node app with graceful fallback so breakage is absorbed as an error
// path instead of a test failure.
mesh::AppSpec graceful_pair() {
  mesh::AppSpec app;
  app.name = "pair";
  mesh::EndpointSpec f0;
  f0.api = graph::api("f0");
  f0.base_latency_ms = 5;
  f0.timeout_ms = 100;
  f0.downstream = {{graph::api("f1"), std::nullopt}};
  f0.fallback = mesh::FallbackPolicy::GracefulError;
  mesh::EndpointSpec f1;
  f1.api = graph::api("f1");
  f1.base_latency_ms = 10;
  f1.timeout_ms = 50;
  app.services = {{"svc", {f0, f1}}};
  app.placement.sites = {"local"};
  app.placement.latency_ms = {{0}};
  app.placement.service_site = {{"svc", "local"}};
  return app;
}

mesh::TestScenario pair_scenario() {
  mesh::TestScenario sc;
  sc.test_id = "t0";
  sc.steps = {{graph::api("f0"), {}}};
  return sc;
}

struct Fixture {
  mesh::AppSpec app = graceful_pair();
  graph::CallGraph g = app.call_graph();
  SearchContext ctx;
  SearchState state;

  Fixture() {
    ctx.g = &g;
    ctx.footprints = {{"t0", {graph::api("f0"), graph::api("f1")}}};
    ctx.caller_timeout_ms = {{graph::api("f0"), 100}, {graph::api("f1"), 50}};
    state.level = 1;
    state.seed = 42;
  }
};

}  // namespace

TEST(Propose, AllCoveredYieldsEmptyBatch) {
  Fixture fx;
  const graph::Edge e{graph::api("f0"), graph::api("f1")};
  for (auto kind : graph::kAllEventKinds) fx.state.ledger.record("t0", {kind, e});
  auto batch = propose(fx.state, fx.ctx, SearchConfig{});
  EXPECT_TRUE(batch.empty());
}

TEST(Propose, BreakageGapGetsBreakRuleAndReplayConfirms) {
  Fixture fx;
  const graph::Edge e{graph::api("f0"), graph::api("f1")};
  fx.state.ledger.record("t0", {graph::EventKind::DelayedHappyPath, e});
  fx.state.ledger.record("t0", {graph::EventKind::DelayedErrorPath, e});
  auto batch = propose(fx.state, fx.ctx, SearchConfig{});
  ASSERT_FALSE(batch.empty());
  const Candidate* target = nullptr;
  for (const auto& c : batch)
    if (c.annotation.rfind("target:", 0) == 0) target = &c;
  ASSERT_NE(target, nullptr);
  const auto& rules = target->plan.rules.at(e);
  ASSERT_EQ(rules.size(), 1u);
  EXPECT_EQ(rules[0].action.kind, faults::FaultAction::Kind::Break);
  // replay oracle: the run records a dropped call on that edge
  auto trace = mesh::run_scenario(fx.app, pair_scenario(), target->plan,
                                  fx.app.placement, target->order_seed);
  auto events = mesh::extract_events(trace, target->plan);
  EXPECT_EQ(events.count({graph::EventKind::Breakage, e}), 1u);
}

TEST(Propose, DelayedErrorGapDelaysBeyondCallerTimeout) {
  Fixture fx;
  const graph::Edge e{graph::api("f0"), graph::api("f1")};
  fx.state.ledger.record("t0", {graph::EventKind::Breakage, e});
  fx.state.ledger.record("t0", {graph::EventKind::DelayedHappyPath, e});
  auto batch = propose(fx.state, fx.ctx, SearchConfig{});
  const Candidate* target = nullptr;
  for (const auto& c : batch)
    if (c.annotation.rfind("target:", 0) == 0) target = &c;
  ASSERT_NE(target, nullptr);
  const auto& rule = target->plan.rules.at(e)[0];
  EXPECT_EQ(rule.action.kind, faults::FaultAction::Kind::Delay);
  EXPECT_GT(rule.action.delay_ms, 100);  // beyond f0's timeout
  auto trace = mesh::run_scenario(fx.app, pair_scenario(), target->plan,
                                  fx.app.placement, target->order_seed);
  EXPECT_EQ(trace.classification, mesh::RunClass::ErrorPath);
  auto events = mesh::extract_events(trace, target->plan);
  EXPECT_EQ(events.count({graph::EventKind::DelayedErrorPath, e}), 1u);
}

TEST(Propose, DelayLadderEscalatesAcrossRetries) {
  Fixture fx;
  fx.state.ledger.record("t0", {graph::EventKind::Breakage,
                                {graph::api("f0"), graph::api("f1")}});
  fx.state.ledger.record("t0", {graph::EventKind::DelayedErrorPath,
                                {graph::api("f0"), graph::api("f1")}});
  SearchConfig cfg;
  std::vector<int> delays;
  for (int retry = 0; retry < 2; ++retry) {
    auto batch = propose(fx.state, fx.ctx, cfg);
    for (const auto& c : batch)
      if (c.annotation.rfind("target:", 0) == 0)
        delays.push_back(c.plan.rules.begin()->second[0].action.delay_ms);
  }
  ASSERT_EQ(delays.size(), 2u);
  EXPECT_EQ(delays[0], 50);  // 0.5 x 100
  EXPECT_EQ(delays[1], 90);  // 0.9 x 100
}

TEST(Propose, EveryPlanValidatesAndIsAnnotated) {
  Fixture fx;
  SearchConfig cfg;
  auto batch = propose(fx.state, fx.ctx, cfg);
  ASSERT_FALSE(batch.empty());
  for (const auto& c : batch) {
    EXPECT_TRUE(faults::validate_plan(c.plan, fx.g).ok());
    EXPECT_TRUE(c.annotation == "explore" ||
                c.annotation.rfind("target:", 0) == 0);
    if (c.plan.rules.begin()->second[0].action.kind ==
            faults::FaultAction::Kind::Break &&
        c.annotation != "explore")
      EXPECT_NE(c.annotation.find("breakage"), std::string::npos);
  }
}

TEST(Propose, DeterministicForIdenticalState) {
  Fixture fx;
  SearchState copy = fx.state;
  auto a = propose(fx.state, fx.ctx, SearchConfig{});
  auto b = propose(copy, fx.ctx, SearchConfig{});
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].scenario_id, b[i].scenario_id);
    EXPECT_EQ(a[i].order_seed, b[i].order_seed);
    EXPECT_EQ(a[i].annotation, b[i].annotation);
  }
}

TEST(Update, ImprovementResetsStreak) {
  Fixture fx;
  fx.state.no_improvement_streak = 3;
  ExecutedCandidate ec;
  ec.candidate.scenario_id = "t0";
  ec.events = {{graph::EventKind::Breakage,
                {graph::api("f0"), graph::api("f1")}}};
  update(fx.state, fx.ctx, {ec});
  EXPECT_EQ(fx.state.no_improvement_streak, 0);
  EXPECT_NEAR(fx.state.fraction, 1.0 / 3.0, 1e-12);
  EXPECT_EQ(fx.state.round, 1);
}

TEST(Update, NoProgressIncrementsStreak) {
  Fixture fx;
  ExecutedCandidate ec;
  ec.candidate.scenario_id = "t0";
  ec.events = {{graph::EventKind::Breakage,
                {graph::api("f0"), graph::api("f1")}}};
  update(fx.state, fx.ctx, {ec});
  ASSERT_EQ(fx.state.no_improvement_streak, 0);
  update(fx.state, fx.ctx, {ec});  // same event again: nothing new
  EXPECT_EQ(fx.state.no_improvement_streak, 1);
}

TEST(Update, EmptyBatchOnlyAdvancesRound) {
  Fixture fx;
  fx.state.fraction = 0.25;
  fx.state.no_improvement_streak = 2;
  update(fx.state, fx.ctx, {});
  EXPECT_EQ(fx.state.round, 1);
  EXPECT_EQ(fx.state.no_improvement_streak, 2);
  EXPECT_DOUBLE_EQ(fx.state.fraction, 0.25);
}

TEST(ShouldStop, TargetPatienceAndCap) {
  SearchConfig cfg;
  cfg.patience = 5;
  SearchState s;
  s.fraction = 1.0;
  EXPECT_TRUE(should_stop(s, cfg));
  s.fraction = 0.4;
  s.no_improvement_streak = 5;
  EXPECT_TRUE(should_stop(s, cfg));
  s.no_improvement_streak = 1;
  s.round = 2;
  EXPECT_FALSE(should_stop(s, cfg));
  s.round = 100;
  EXPECT_TRUE(should_stop(s, cfg));
}

// Mini closed loop on the two-node app: propose -> execute -> extract ->
// update until full coverage.
TEST(SearchLoop, ReachesFullCoverageOnCoverableApp) {
  Fixture fx;
  SearchConfig cfg;
  const auto scenario = pair_scenario();
  while (!should_stop(fx.state, cfg)) {
    auto batch = propose(fx.state, fx.ctx, cfg);
    std::vector<ExecutedCandidate> executed;
    for (const auto& c : batch) {
      auto trace = mesh::run_scenario(fx.app, scenario, c.plan,
                                      fx.app.placement, c.order_seed);
      executed.push_back({c, mesh::extract_events(trace, c.plan)});
    }
    update(fx.state, fx.ctx, executed);
    ASSERT_LT(fx.state.round, 20) << "loop failed to converge";
  }
  EXPECT_DOUBLE_EQ(fx.state.fraction, 1.0);
  EXPECT_TRUE(fx.state.unreachable.empty());
}

TEST(ProposalStrategy, GreedyEpsilonDelegatesToPropose) {
  Fixture fx;
  SearchState copy = fx.state;
  GreedyEpsilonStrategy strategy;
  auto via_interface = strategy.next_batch(fx.state, fx.ctx, SearchConfig{});
  auto direct = propose(copy, fx.ctx, SearchConfig{});
  ASSERT_EQ(via_interface.size(), direct.size());
  for (std::size_t i = 0; i < direct.size(); ++i)
    EXPECT_EQ(via_interface[i].annotation, direct[i].annotation);
}
