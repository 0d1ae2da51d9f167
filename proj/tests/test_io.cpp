// File-format round-trips for the external interfaces: app specs, scenarios,
// fault plans, candidates, PDG models, CTD test files, call logs, trace
// serialization.

#include "faultline/json_io.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace faultline;
using nlohmann::json;

namespace {

std::string demo_dir() { return FAULTLINE_DEMO_DIR; }

std::string temp_file(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / name;
  io::write_file(path.string(), content);
  return path.string();
}

}  // namespace

TEST(AppSpecFormat, DemoAppLoadsWithPlacement) {
  auto app = io::load_app_spec(demo_dir() + "/app.json");
  EXPECT_EQ(app.name, "bookstore");
  EXPECT_EQ(app.placement.sites.size(), 2u);
  EXPECT_EQ(app.placement.service_site.at("payment"), "edge");
  const auto& storefront = app.endpoint(graph::api("storefront"));
  ASSERT_EQ(storefront.downstream.size(), 2u);
  EXPECT_TRUE(storefront.downstream[1].when.has_value());
  EXPECT_TRUE(app.endpoint(graph::api("payment")).breaker.has_value());
}

TEST(AppSpecFormat, RejectsUnknownFallback) {
  const auto path = temp_file("bad_fallback.json", R"({
    "name": "x", "sites": ["s"], "latency_ms": [[0]],
    "services": [{"name": "a", "site": "s", "endpoints": [
      {"api": "f0", "timeout_ms": 10, "fallback": "explode"}]}]
  })");
  EXPECT_THROW(io::load_app_spec(path), InputError);
}

TEST(AppSpecFormat, RejectsAsymmetricLatency) {
  const auto path = temp_file("bad_latency.json", R"({
    "name": "x", "sites": ["a", "b"], "latency_ms": [[0, 5], [6, 0]],
    "services": [{"name": "svc", "site": "a", "endpoints": [
      {"api": "f0", "timeout_ms": 10}]}]
  })");
  EXPECT_THROW(io::load_app_spec(path), InputError);
}

TEST(ScenarioFormat, ExpectedClausesParse) {
  auto sc = io::load_scenario(demo_dir() + "/scenarios/checkout.json");
  EXPECT_EQ(sc.test_id, "checkout");
  EXPECT_EQ(sc.steps.size(), 2u);
  EXPECT_EQ(sc.barriers.size(), 1u);
  EXPECT_TRUE(sc.expected.happy.forbid_degraded);
  EXPECT_FALSE(sc.expected.graceful.forbid_degraded);
}

TEST(PlanFormat, RoundTripsRulesAndHooks) {
  faults::FaultPlan plan;
  const graph::Edge e{graph::api("f0"), graph::api("f1")};
  plan.rules[e] = {
      {faults::FaultTrigger::always(), faults::FaultAction::breakage()},
      {faults::FaultTrigger::nth_call(3), faults::FaultAction::delay(40)},
      {faults::FaultTrigger::with_probability(0.25, 9),
       faults::FaultAction::http_error(502)}};
  plan.hooks.barriers = {{1, 0}};
  plan.hooks.load[{faults::kClient, graph::api("f0")}] = 2;
  plan.hooks.placement_override["svc"] = "west";

  const auto round = io::plan_from_json(io::plan_to_json(plan));
  ASSERT_EQ(round.rules.at(e).size(), 3u);
  EXPECT_EQ(round.rules.at(e)[1].trigger.nth, 3);
  EXPECT_EQ(round.rules.at(e)[2].action.status, 502);
  EXPECT_DOUBLE_EQ(round.rules.at(e)[2].trigger.probability, 0.25);
  EXPECT_EQ(*round.hooks.barriers, (std::vector<std::vector<int>>{{1, 0}}));
  EXPECT_EQ(round.hooks.load.at({faults::kClient, graph::api("f0")}), 2);
  EXPECT_EQ(round.hooks.placement_override.at("svc"), "west");
}

TEST(CandidateFormat, RoundTrips) {
  search::Candidate c;
  c.scenario_id = "checkout";
  c.order_seed = 0xdeadbeefcafeull;
  c.annotation = "target:checkout|(cart,payment)|breakage";
  c.plan.rules[{graph::api("cart"), graph::api("payment")}] = {
      {faults::FaultTrigger::always(), faults::FaultAction::breakage()}};
  c.placement_override["cart"] = "edge";
  const auto round = io::candidate_from_json(io::candidate_to_json(c));
  EXPECT_EQ(round.scenario_id, c.scenario_id);
  EXPECT_EQ(round.order_seed, c.order_seed);
  EXPECT_EQ(round.annotation, c.annotation);
  EXPECT_EQ(round.placement_override.at("cart"), "edge");
}

TEST(TraceFormat, SerializationIsDeterministic) {
  auto app = io::load_app_spec(demo_dir() + "/app.json");
  auto sc = io::load_scenario(demo_dir() + "/scenarios/checkout.json");
  auto a = mesh::run_scenario(app, sc, {}, app.placement, 31337);
  auto b = mesh::run_scenario(app, sc, {}, app.placement, 31337);
  EXPECT_EQ(io::trace_to_json(a).dump(), io::trace_to_json(b).dump());
  EXPECT_EQ(io::trace_checksum(a), io::trace_checksum(b));
}

TEST(CtdTestsFormat, RoundTripsThroughModelOrder) {
  ctd::CtdModel model;
  model.add_parameter("P1", {"a", "b"});
  model.add_parameter("P2", {"x", "y"});
  const auto tests = ctd::enumerate_legal(model);
  const auto j = io::ctd_tests_to_json(tests, model);
  EXPECT_EQ(io::ctd_tests_from_json(j, model), tests);
  EXPECT_THROW(io::ctd_tests_from_json(json::parse(R"([{"P1":"a"}])"), model),
               InputError);
}

TEST(PdgModelFormat, ModelSurvivesSaveAndLoad) {
  std::vector<pdg::PdgRecord> records;
  for (int i = 0; i < 40; ++i) {
    pdg::PdgRecord rec;
    rec.request = {{"x", pdg::Scalar{static_cast<double>(i)}},
                   {"kind", pdg::Scalar{std::string(i % 2 ? "odd" : "even")}}};
    rec.response = {{"y", pdg::Scalar{static_cast<double>(i % 2)}}};
    rec.trace = std::vector<graph::ApiId>{graph::api("svc")};
    records.push_back(std::move(rec));
  }
  pdg::PdgConfig config;
  config.sensitive_fields = {"x"};
  const auto model = pdg::build(records, config);
  const auto loaded =
      io::pdg_model_from_json(io::pdg_model_to_json(model));
  // identical predictions and identical compare behaviour
  const auto ra = pdg::compare(model, records, 0.1);
  const auto rb = pdg::compare(loaded, records, 0.1);
  EXPECT_EQ(ra.anomalies, rb.anomalies);
  EXPECT_EQ(ra.unvisited.size(), rb.unvisited.size());
  EXPECT_EQ(loaded.config.sensitive_fields.count("x"), 1u);
  EXPECT_EQ(loaded.production_values.at("x").size(), 40u);
}

TEST(PdgRecordsFormat, JsonlWithNestedDocumentsFlattens) {
  const auto path = temp_file(
      "records.jsonl",
      R"({"request": {"user": {"id": 7}, "tags": ["a", "b"]}, "response": {"ok": true}, "trace": ["f0", "f1"]}
{"request": {"user": {"id": 8}}, "response": {"ok": false}}
)");
  const auto records = io::load_pdg_records(path);
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(std::get<double>(records[0].request.at("user.id")), 7.0);
  EXPECT_EQ(std::get<std::string>(records[0].request.at("tags.0")), "a");
  EXPECT_TRUE(records[0].trace.has_value());
  EXPECT_FALSE(records[1].trace.has_value());
}

TEST(CallLogFormat, OneApiPerLine) {
  const auto path = temp_file("calls.log", "f0\nf1\n\nf0\r\n");
  const auto calls = io::load_call_log(path);
  ASSERT_EQ(calls.size(), 3u);
  EXPECT_EQ(calls[2], graph::api("f0"));
}

TEST(UnvisitedFormat, AtomsRoundTripThroughReport) {
  pdg::ComparisonReport report;
  pdg::UnvisitedPath path;
  path.ref = {"svc/y", 4};
  path.atoms = {{pdg::PathAtom::Kind::NumericGt, "x", 10.5, ""},
                {pdg::PathAtom::Kind::CategoricalEq, "kind", 0.0, "s:odd"}};
  report.unvisited.push_back(path);
  const auto loaded =
      io::unvisited_from_json(io::comparison_report_to_json(report));
  ASSERT_EQ(loaded.size(), 1u);
  EXPECT_EQ(loaded[0].ref.tree, "svc/y");
  EXPECT_EQ(loaded[0].atoms[0].kind, pdg::PathAtom::Kind::NumericGt);
  EXPECT_DOUBLE_EQ(loaded[0].atoms[0].threshold, 10.5);
  EXPECT_EQ(loaded[0].atoms[1].category, "s:odd");
}

TEST(PdgModelFormat, CorruptTreeIndicesRejected) {
  json tree{{"nodes", json::array({json{{"leaf", false},
                                        {"field", "x"},
                                        {"numeric", true},
                                        {"threshold", 1.0},
                                        {"category", ""},
                                        {"left", 0},  // self-cycle
                                        {"right", 0},
                                        {"prediction", nullptr},
                                        {"samples", 1}}})}};
  EXPECT_THROW(io::tree_from_json(tree), InputError);
}
