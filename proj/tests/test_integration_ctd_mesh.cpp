// Cross-module loop: enumerate a CTD model, bind each vector to scenario
// parameters, run the mesh, cluster the console output, categorize, mine
// constraints, and regenerate a smaller covering array.

#include <gtest/gtest.h>

#include "faultline/ctd.hpp"
#include "faultline/mesh.hpp"

using namespace faultline;

namespace {

// Gateway calls auth; auth rejects the call when the scenario runs with
// guest credentials in write mode (console output marks the combination).
mesh::AppSpec gated_app() {
  mesh::AppSpec app;
  app.name = "gated";
  mesh::EndpointSpec gateway;
  gateway.api = graph::api("gateway");
  gateway.base_latency_ms = 2;
  gateway.timeout_ms = 100;
  gateway.fallback = mesh::FallbackPolicy::GracefulError;
  gateway.downstream = {
      {graph::api("auth"), expr::parse("role=guest & mode=write")},
      {graph::api("store"), std::nullopt}};
  gateway.console = {"gateway: request served", "gateway: degraded service",
                     "gateway: request refused"};
  mesh::EndpointSpec auth;
  auth.api = graph::api("auth");
  auth.base_latency_ms = 1;
  auth.timeout_ms = 50;
  // guest writes always bounce at auth
  auth.fallback = mesh::FallbackPolicy::PropagateFailure;
  auth.downstream = {{graph::api("denier"), std::nullopt}};
  auth.console = {"auth: ok", "auth: partial", "auth: PermissionDenied for request"};
  mesh::EndpointSpec denier;
  denier.api = graph::api("denier");
  denier.base_latency_ms = 1;
  denier.timeout_ms = 10;
  denier.console = {"", "", ""};
  mesh::EndpointSpec store;
  store.api = graph::api("store");
  store.base_latency_ms = 3;
  store.timeout_ms = 50;
  store.console = {"store: record handled", "store: cache fallback",
                   "store: write lost"};
  app.services = {{"svc", {gateway, auth, denier, store}}};
  app.placement.sites = {"local"};
  app.placement.latency_ms = {{0}};
  app.placement.service_site = {{"svc", "local"}};
  return app;
}

std::string run_and_collect_console(const mesh::AppSpec& app,
                                    const ctd::CtdModel& model,
                                    const ctd::TestVector& vector,
                                    const faults::FaultPlan& plan) {
  mesh::TestScenario sc;
  sc.test_id = "ctd-vector";
  sc.steps = {{graph::api("gateway"), ctd::to_assignment(model, vector)}};
  const auto trace = mesh::run_scenario(app, sc, plan, app.placement, 1);
  std::string joined;
  for (const auto& line : trace.console) joined += line + "\n";
  return joined;
}

}  // namespace

TEST(CtdMeshLoop, ConsoleClustersYieldAMiningConstraint) {
  auto app = gated_app();
  // break the (auth, denier) edge so guest writes error out at auth and the
  // refusal text reaches the console
  faults::FaultPlan plan;
  plan.rules[{graph::api("auth"), graph::api("denier")}] = {
      {faults::FaultTrigger::always(), faults::FaultAction::breakage()}};

  ctd::CtdModel model;
  model.add_parameter("role", {"guest", "member"});
  model.add_parameter("mode", {"read", "write"});

  std::vector<ctd::Observation> observations;
  for (const auto& vector : ctd::enumerate_legal(model))
    observations.push_back(
        {vector, run_and_collect_console(app, model, vector, plan)});
  ASSERT_EQ(observations.size(), 4u);

  auto clusters = ctd::cluster_outputs(observations);
  ASSERT_EQ(clusters.size(), 2u);  // refused vs served

  // the tester categorizes: refusal text marks the illegal combination
  for (auto& cluster : clusters) {
    const bool refused =
        cluster.members.front().output.find("PermissionDenied") !=
        std::string::npos;
    cluster.category = refused ? ctd::ClusterCategory::IllegalCombination
                               : ctd::ClusterCategory::Uncategorized;
  }

  const auto mined = ctd::derive_constraints(clusters, model);
  ASSERT_EQ(mined.size(), 1u);
  EXPECT_EQ(mined[0].to_text(), "!(role=guest & mode=write)");

  // regenerating with the mined constraint removes the refused combination
  ctd::CtdModel refined;
  for (const auto& p : model.parameters()) refined.add_parameter(p.name, p.values);
  refined.add_constraint(mined[0]);
  const auto tests = ctd::generate_covering_array(refined, 2, 1);
  for (const auto& t : tests)
    EXPECT_FALSE(t.values[0] == "guest" && t.values[1] == "write");
  EXPECT_DOUBLE_EQ(ctd::interaction_coverage(refined, 2, tests), 1.0);
}
