#pragma once

// JSON (de)serialization for every file format the engine reads or writes:
// application specs, scenarios, fault plans, traces, coverage reports, round
// logs, PDG models and record files, CTD test files. Parse failures carry
// file and line positions.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "faultline/callgraph.hpp"
#include "faultline/ctd.hpp"
#include "faultline/errors.hpp"
#include "faultline/faults.hpp"
#include "faultline/mesh.hpp"
#include "faultline/pdg.hpp"
#include "faultline/rng.hpp"
#include "faultline/search.hpp"

namespace faultline::io {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Files

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << content;
}

inline std::uint64_t file_checksum(const std::string& path) {
  return fnv1a(read_file(path));
}

inline int line_of_offset(const std::string& text, std::size_t offset) {
  int line = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

inline json parse_json(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(origin + ":" + std::to_string(line_of_offset(text, e.byte)) +
                     ": " + e.what());
  }
}

inline json load_json_file(const std::string& path) {
  return parse_json(read_file(path), path);
}

// ---------------------------------------------------------------------------
// Small helpers

inline graph::Edge edge_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2)
    throw InputError("edge must be a two-element array");
  return {graph::api(j[0].get<std::string>()),
          graph::api(j[1].get<std::string>())};
}

inline json edge_to_json(const graph::Edge& e) {
  return json::array({e.first.label, e.second.label});
}

inline json event_to_json(const graph::CoverageEvent& ev) {
  return {{"event", graph::to_string(ev.kind)}, {"edge", edge_to_json(ev.edge)}};
}

inline graph::CoverageEvent event_from_json(const json& j) {
  return {graph::event_kind_from_string(j.at("event").get<std::string>()),
          edge_from_json(j.at("edge"))};
}

// ---------------------------------------------------------------------------
// Application spec

inline mesh::AppSpec app_spec_from_json(const json& j) {
  mesh::AppSpec app;
  app.name = j.value("name", "app");
  for (const auto& site : j.at("sites"))
    app.placement.sites.push_back(site.get<std::string>());
  for (const auto& row : j.at("latency_ms")) {
    std::vector<mesh::Tick> r;
    for (const auto& cell : row) r.push_back(cell.get<mesh::Tick>());
    app.placement.latency_ms.push_back(std::move(r));
  }
  for (const auto& svc : j.at("services")) {
    mesh::ServiceSpec service;
    service.name = svc.at("name").get<std::string>();
    app.placement.service_site[service.name] =
        svc.at("site").get<std::string>();
    for (const auto& ep : svc.at("endpoints")) {
      mesh::EndpointSpec endpoint;
      endpoint.api = graph::api(ep.at("api").get<std::string>());
      endpoint.base_latency_ms = ep.value("base_latency_ms", 0);
      endpoint.timeout_ms = ep.value("timeout_ms", 1000);
      const std::string fallback = ep.value("fallback", "propagate_failure");
      if (fallback == "graceful_error")
        endpoint.fallback = mesh::FallbackPolicy::GracefulError;
      else if (fallback == "propagate_failure")
        endpoint.fallback = mesh::FallbackPolicy::PropagateFailure;
      else
        throw InputError("api '" + endpoint.api.label +
                         "': unknown fallback '" + fallback + "'");
      if (ep.contains("downstream"))
        for (const auto& ds : ep.at("downstream")) {
          mesh::DownstreamCall call;
          call.target = graph::api(ds.at("target").get<std::string>());
          if (ds.contains("when"))
            call.when = expr::parse(ds.at("when").get<std::string>());
          endpoint.downstream.push_back(std::move(call));
        }
      if (ep.contains("breaker")) {
        mesh::CircuitBreakerConfig cb;
        cb.failure_threshold = ep.at("breaker").at("failure_threshold").get<int>();
        cb.sleep_window_ms =
            ep.at("breaker").at("sleep_window_ms").get<mesh::Tick>();
        endpoint.breaker = cb;
      }
      if (ep.contains("console")) {
        endpoint.console.ok = ep.at("console").value("ok", "");
        endpoint.console.degraded = ep.at("console").value("degraded", "");
        endpoint.console.error = ep.at("console").value("error", "");
      }
      service.endpoints.push_back(std::move(endpoint));
    }
    app.services.push_back(std::move(service));
  }
  if (j.contains("extra_edges"))
    for (const auto& e : j.at("extra_edges"))
      app.extra_edges.push_back(edge_from_json(e));
  app.validate();
  return app;
}

inline mesh::AppSpec load_app_spec(const std::string& path) {
  try {
    return app_spec_from_json(load_json_file(path));
  } catch (const json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Scenarios

inline mesh::ExpectedClause clause_from_json(const json& j) {
  mesh::ExpectedClause c;
  c.all_steps_ok = j.value("all_steps_ok", true);
  c.forbid_degraded = j.value("forbid_degraded", false);
  if (j.contains("require_called"))
    for (const auto& api : j.at("require_called"))
      c.require_called.push_back(graph::api(api.get<std::string>()));
  if (j.contains("step_class"))
    for (const auto& [key, value] : j.at("step_class").items())
      c.step_class[std::stoi(key)] = value.get<std::string>();
  return c;
}

inline mesh::TestScenario scenario_from_json(const json& j) {
  mesh::TestScenario sc;
  sc.test_id = j.at("test_id").get<std::string>();
  for (const auto& step : j.at("steps")) {
    mesh::ScenarioStep s;
    s.api = graph::api(step.at("api").get<std::string>());
    if (step.contains("params"))
      for (const auto& [key, value] : step.at("params").items())
        s.params[key] = value.get<std::string>();
    sc.steps.push_back(std::move(s));
  }
  if (j.contains("barriers"))
    for (const auto& group : j.at("barriers"))
      sc.barriers.push_back(group.get<std::vector<int>>());
  if (j.contains("expected")) {
    const auto& exp = j.at("expected");
    if (exp.contains("happy")) sc.expected.happy = clause_from_json(exp.at("happy"));
    if (exp.contains("graceful"))
      sc.expected.graceful = clause_from_json(exp.at("graceful"));
    if (exp.contains("happy") && !exp.at("happy").contains("forbid_degraded"))
      sc.expected.happy.forbid_degraded = true;  // happy default
  }
  return sc;
}

inline mesh::TestScenario load_scenario(const std::string& path) {
  try {
    return scenario_from_json(load_json_file(path));
  } catch (const json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Fault plans

inline json trigger_to_json(const faults::FaultTrigger& t) {
  switch (t.kind) {
    case faults::FaultTrigger::Kind::Always:
      return {{"kind", "always"}};
    case faults::FaultTrigger::Kind::NthCall:
      return {{"kind", "nth_call"}, {"n", t.nth}};
    case faults::FaultTrigger::Kind::WithProbability:
      return {{"kind", "with_probability"}, {"p", t.probability}, {"seed", t.seed}};
  }
  return {};
}

inline faults::FaultTrigger trigger_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "always") return faults::FaultTrigger::always();
  if (kind == "nth_call") return faults::FaultTrigger::nth_call(j.at("n").get<long>());
  if (kind == "with_probability")
    return faults::FaultTrigger::with_probability(
        j.at("p").get<double>(), j.value("seed", std::uint64_t{0}));
  throw InputError("unknown trigger kind '" + kind + "'");
}

inline json action_to_json(const faults::FaultAction& a) {
  switch (a.kind) {
    case faults::FaultAction::Kind::Break:
      return {{"kind", "break"}};
    case faults::FaultAction::Kind::Delay:
      return {{"kind", "delay"}, {"ms", a.delay_ms}};
    case faults::FaultAction::Kind::HttpError:
      return {{"kind", "http_error"}, {"status", a.status}};
  }
  return {};
}

inline faults::FaultAction action_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "break") return faults::FaultAction::breakage();
  if (kind == "delay") return faults::FaultAction::delay(j.at("ms").get<int>());
  if (kind == "http_error")
    return faults::FaultAction::http_error(j.at("status").get<int>());
  throw InputError("unknown action kind '" + kind + "'");
}

inline json plan_to_json(const faults::FaultPlan& plan) {
  json rules = json::array();
  for (const auto& [edge, list] : plan.rules)
    for (const auto& rule : list)
      rules.push_back({{"edge", edge_to_json(edge)},
                       {"trigger", trigger_to_json(rule.trigger)},
                       {"action", action_to_json(rule.action)}});
  json hooks = json::object();
  if (plan.hooks.barriers) hooks["barriers"] = *plan.hooks.barriers;
  if (!plan.hooks.load.empty()) {
    json load = json::array();
    for (const auto& [edge, mult] : plan.hooks.load)
      load.push_back({{"edge", edge_to_json(edge)}, {"multiplier", mult}});
    hooks["load"] = load;
  }
  if (!plan.hooks.placement_override.empty())
    hooks["placement"] = plan.hooks.placement_override;
  json out{{"rules", rules}};
  if (!hooks.empty()) out["hooks"] = hooks;
  return out;
}

inline faults::FaultPlan plan_from_json(const json& j) {
  faults::FaultPlan plan;
  if (j.contains("rules"))
    for (const auto& r : j.at("rules"))
      plan.rules[edge_from_json(r.at("edge"))].push_back(
          {trigger_from_json(r.at("trigger")), action_from_json(r.at("action"))});
  if (j.contains("hooks")) {
    const auto& hooks = j.at("hooks");
    if (hooks.contains("barriers"))
      plan.hooks.barriers =
          hooks.at("barriers").get<std::vector<std::vector<int>>>();
    if (hooks.contains("load"))
      for (const auto& l : hooks.at("load"))
        plan.hooks.load[edge_from_json(l.at("edge"))] =
            l.at("multiplier").get<int>();
    if (hooks.contains("placement"))
      for (const auto& [svc, site] : hooks.at("placement").items())
        plan.hooks.placement_override[svc] = site.get<std::string>();
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Traces

inline json trace_to_json(const mesh::ExecutionTrace& trace) {
  json records = json::array();
  for (const auto& r : trace.records)
    records.push_back({{"caller", r.caller.label},
                       {"callee", r.callee.label},
                       {"start", r.start},
                       {"end", r.end},
                       {"outcome", mesh::to_string(r.outcome)},
                       {"status", r.status},
                       {"delayed", r.delayed},
                       {"breaker_rejected", r.breaker_rejected},
                       {"degraded", r.degraded},
                       {"load_echo", r.load_echo}});
  json steps = json::array();
  for (const auto& s : trace.steps)
    steps.push_back({{"index", s.step_index},
                     {"api", s.api.label},
                     {"outcome", mesh::to_string(s.outcome)},
                     {"degraded", s.degraded}});
  return {{"test_id", trace.test_id},
          {"classification", mesh::to_string(trace.classification)},
          {"records", records},
          {"console", trace.console},
          {"steps", steps},
          {"order", trace.executed_order}};
}

inline std::uint64_t trace_checksum(const mesh::ExecutionTrace& trace) {
  return fnv1a(trace_to_json(trace).dump());
}

// ---------------------------------------------------------------------------
// Coverage report

inline json coverage_report_to_json(const graph::CoverageReport& report) {
  json tests = json::array();
  for (const auto& tc : report.tests) {
    json covered = json::array();
    for (const auto& [edge, kind] : tc.covered)
      covered.push_back(event_to_json({kind, edge}));
    json uncovered = json::array();
    for (const auto& [edge, kind] : tc.uncovered)
      uncovered.push_back(event_to_json({kind, edge}));
    tests.push_back({{"test_id", tc.test_id},
                     {"covered", covered},
                     {"uncovered", uncovered},
                     {"fully_covered", tc.fully_covered()}});
  }
  return {{"level", report.level},
          {"fraction", report.fraction()},
          {"covered_pairs", report.covered_pairs},
          {"total_pairs", report.total_pairs},
          {"tests", tests}};
}

// ---------------------------------------------------------------------------
// Candidates (round log entries)

inline json candidate_to_json(const search::Candidate& c) {
  json out{{"scenario", c.scenario_id},
           {"order_seed", c.order_seed},
           {"annotation", c.annotation},
           {"plan", plan_to_json(c.plan)}};
  if (!c.placement_override.empty()) out["placement"] = c.placement_override;
  return out;
}

inline search::Candidate candidate_from_json(const json& j) {
  search::Candidate c;
  c.scenario_id = j.at("scenario").get<std::string>();
  c.order_seed = j.at("order_seed").get<std::uint64_t>();
  c.annotation = j.value("annotation", "");
  c.plan = plan_from_json(j.at("plan"));
  if (j.contains("placement"))
    for (const auto& [svc, site] : j.at("placement").items())
      c.placement_override[svc] = site.get<std::string>();
  return c;
}

// ---------------------------------------------------------------------------
// CTD test files: array of {param: value} objects

inline std::vector<ctd::TestVector> ctd_tests_from_json(
    const json& j, const ctd::CtdModel& model) {
  if (!j.is_array()) throw InputError("tests file must be a JSON array");
  std::vector<ctd::TestVector> out;
  for (const auto& entry : j) {
    ctd::TestVector t;
    for (const auto& p : model.parameters()) {
      if (!entry.contains(p.name))
        throw InputError("test vector missing parameter '" + p.name + "'");
      t.values.push_back(entry.at(p.name).get<std::string>());
    }
    out.push_back(std::move(t));
  }
  return out;
}

inline json ctd_tests_to_json(const std::vector<ctd::TestVector>& tests,
                              const ctd::CtdModel& model) {
  json out = json::array();
  for (const auto& t : tests) {
    json entry = json::object();
    for (std::size_t i = 0; i < t.values.size(); ++i)
      entry[model.parameters()[i].name] = t.values[i];
    out.push_back(std::move(entry));
  }
  return out;
}

// ---------------------------------------------------------------------------
// PDG: scalars, trees, models, record files

inline json scalar_to_json(const pdg::Scalar& s) {
  if (std::holds_alternative<std::monostate>(s)) return nullptr;
  if (std::holds_alternative<double>(s)) return std::get<double>(s);
  if (std::holds_alternative<bool>(s)) return std::get<bool>(s);
  return std::get<std::string>(s);
}

inline pdg::Scalar scalar_from_json(const json& j) {
  if (j.is_null()) return pdg::Scalar{};
  if (j.is_boolean()) return pdg::Scalar{j.get<bool>()};
  if (j.is_number()) return pdg::Scalar{j.get<double>()};
  if (j.is_string()) return pdg::Scalar{j.get<std::string>()};
  throw InputError("scalar expected, got " + std::string(j.type_name()));
}

inline json tree_to_json(const pdg::DecisionTree& tree) {
  json nodes = json::array();
  for (const auto& n : tree.nodes())
    nodes.push_back({{"leaf", n.leaf},
                     {"field", n.field},
                     {"numeric", n.numeric},
                     {"threshold", n.threshold},
                     {"category", n.category},
                     {"left", n.left},
                     {"right", n.right},
                     {"prediction", scalar_to_json(n.prediction)},
                     {"samples", n.samples}});
  return {{"nodes", nodes}};
}

inline pdg::DecisionTree tree_from_json(const json& j) {
  std::vector<pdg::DecisionTree::Node> nodes;
  for (const auto& n : j.at("nodes")) {
    pdg::DecisionTree::Node node;
    node.leaf = n.at("leaf").get<bool>();
    node.field = n.at("field").get<std::string>();
    node.numeric = n.at("numeric").get<bool>();
    node.threshold = n.at("threshold").get<double>();
    node.category = n.at("category").get<std::string>();
    node.left = n.at("left").get<int>();
    node.right = n.at("right").get<int>();
    node.prediction = scalar_from_json(n.at("prediction"));
    node.samples = n.at("samples").get<long>();
    nodes.push_back(std::move(node));
  }
  return pdg::DecisionTree::from_nodes(std::move(nodes));
}

inline json pdg_model_to_json(const pdg::PdgModel& model) {
  json buckets = json::array();
  for (const auto& b : model.buckets) {
    json path = json::array();
    for (const auto& api : b.path) path.push_back(api.label);
    json regression = json::object();
    for (const auto& [field, tree] : b.regression)
      regression[field] = tree_to_json(tree);
    buckets.push_back({{"id", b.id},
                       {"path", path},
                       {"members", b.members},
                       {"regression", regression}});
  }
  json numeric = json::object();
  for (const auto& [f, ns] : model.stats.numeric)
    numeric[f] = {{"min", ns.min},     {"max", ns.max}, {"mean", ns.mean},
                  {"q25", ns.q25},     {"q50", ns.q50}, {"q75", ns.q75},
                  {"count", ns.count}};
  json categorical = json::object();
  for (const auto& [f, values] : model.stats.categorical)
    categorical[f] = values;
  json associations = json::array();
  for (const auto& [a, b] : model.stats.associations)
    associations.push_back(json::array({a, b}));
  json production = json::object();
  for (const auto& [f, values] : model.production_values)
    production[f] = values;
  return {{"buckets", buckets},
          {"classifier", tree_to_json(model.classifier)},
          {"stats",
           {{"numeric", numeric},
            {"categorical", categorical},
            {"associations", associations}}},
          {"production_values", production},
          {"config",
           {{"regression_threshold", model.config.regression_threshold},
            {"sensitive_fields", model.config.sensitive_fields}}}};
}

inline pdg::PdgModel pdg_model_from_json(const json& j) {
  pdg::PdgModel model;
  for (const auto& b : j.at("buckets")) {
    pdg::BucketModel bucket;
    bucket.id = b.at("id").get<std::string>();
    for (const auto& api : b.at("path"))
      bucket.path.push_back(graph::api(api.get<std::string>()));
    bucket.members = b.at("members").get<long>();
    for (const auto& [field, tree] : b.at("regression").items())
      bucket.regression.emplace(field, tree_from_json(tree));
    model.buckets.push_back(std::move(bucket));
  }
  model.classifier = tree_from_json(j.at("classifier"));
  const auto& stats = j.at("stats");
  for (const auto& [f, ns] : stats.at("numeric").items()) {
    pdg::NumericStats n;
    n.min = ns.at("min").get<double>();
    n.max = ns.at("max").get<double>();
    n.mean = ns.at("mean").get<double>();
    n.q25 = ns.at("q25").get<double>();
    n.q50 = ns.at("q50").get<double>();
    n.q75 = ns.at("q75").get<double>();
    n.count = ns.at("count").get<long>();
    model.stats.numeric[f] = n;
  }
  for (const auto& [f, values] : stats.at("categorical").items())
    for (const auto& v : values)
      model.stats.categorical[f].insert(v.get<std::string>());
  for (const auto& pair : stats.at("associations"))
    model.stats.associations.push_back(
        {pair[0].get<std::string>(), pair[1].get<std::string>()});
  for (const auto& [f, values] : j.at("production_values").items())
    for (const auto& v : values)
      model.production_values[f].insert(v.get<double>());
  model.config.regression_threshold =
      j.at("config").at("regression_threshold").get<double>();
  for (const auto& f : j.at("config").at("sensitive_fields"))
    model.config.sensitive_fields.insert(f.get<std::string>());
  return model;
}

// Record files: one JSON document per line with fields `request`,
// `response`, optional `trace`.
inline std::vector<pdg::PdgRecord> load_pdg_records(
    const std::string& path, const pdg::FlattenOptions& opt = {}) {
  std::istringstream in(read_file(path));
  std::vector<pdg::PdgRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = parse_json(line, path + ":" + std::to_string(lineno));
    pdg::PdgRecord rec;
    rec.request = pdg::flatten(j.at("request"), opt).record;
    rec.response = pdg::flatten(j.at("response"), opt).record;
    if (j.contains("trace")) {
      std::vector<graph::ApiId> trace;
      for (const auto& api : j.at("trace"))
        trace.push_back(graph::api(api.get<std::string>()));
      rec.trace = std::move(trace);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

inline const char* atom_kind_name(pdg::PathAtom::Kind k) {
  switch (k) {
    case pdg::PathAtom::Kind::NumericLe: return "num_le";
    case pdg::PathAtom::Kind::NumericGt: return "num_gt";
    case pdg::PathAtom::Kind::CategoricalEq: return "cat_eq";
    case pdg::PathAtom::Kind::CategoricalNe: return "cat_ne";
  }
  return "?";
}

inline pdg::PathAtom::Kind atom_kind_from_name(const std::string& s) {
  if (s == "num_le") return pdg::PathAtom::Kind::NumericLe;
  if (s == "num_gt") return pdg::PathAtom::Kind::NumericGt;
  if (s == "cat_eq") return pdg::PathAtom::Kind::CategoricalEq;
  if (s == "cat_ne") return pdg::PathAtom::Kind::CategoricalNe;
  throw InputError("unknown atom kind '" + s + "'");
}

inline json comparison_report_to_json(const pdg::ComparisonReport& report) {
  json tests = json::array();
  for (const auto& t : report.tests) {
    json entry{{"index", t.index},
               {"bucket", t.bucket_id},
               {"anomalous", t.anomalous}};
    if (t.anomalous) {
      entry["reason"] = pdg::to_string(t.reason);
      entry["detail"] = t.detail;
    }
    tests.push_back(std::move(entry));
  }
  json unvisited = json::array();
  for (const auto& u : report.unvisited) {
    json atoms = json::array();
    for (const auto& a : u.atoms)
      atoms.push_back({{"kind", atom_kind_name(a.kind)},
                       {"field", a.field},
                       {"threshold", a.threshold},
                       {"category", a.category}});
    unvisited.push_back(
        {{"tree", u.ref.tree}, {"leaf", u.ref.leaf}, {"atoms", atoms}});
  }
  return {{"anomalies", report.anomalies},
          {"tests", tests},
          {"unvisited", unvisited}};
}

inline std::vector<pdg::UnvisitedPath> unvisited_from_json(const json& j) {
  std::vector<pdg::UnvisitedPath> out;
  for (const auto& u : j.at("unvisited")) {
    pdg::UnvisitedPath path;
    path.ref.tree = u.at("tree").get<std::string>();
    path.ref.leaf = u.at("leaf").get<int>();
    for (const auto& a : u.at("atoms")) {
      pdg::PathAtom atom;
      atom.kind = atom_kind_from_name(a.at("kind").get<std::string>());
      atom.field = a.at("field").get<std::string>();
      atom.threshold = a.value("threshold", 0.0);
      atom.category = a.value("category", "");
      path.atoms.push_back(std::move(atom));
    }
    out.push_back(std::move(path));
  }
  return out;
}

inline json generation_result_to_json(const pdg::GenerationResult& result) {
  json inputs = json::array();
  for (const auto& gi : result.inputs) {
    json request = json::object();
    for (const auto& [f, v] : gi.request) request[f] = scalar_to_json(v);
    inputs.push_back({{"tree", gi.ref.tree},
                      {"leaf", gi.ref.leaf},
                      {"request", request}});
  }
  json infeasible = json::array();
  for (const auto& ip : result.infeasible)
    infeasible.push_back({{"tree", ip.ref.tree},
                          {"leaf", ip.ref.leaf},
                          {"reason", ip.reason}});
  return {{"inputs", inputs}, {"infeasible", infeasible}};
}

// ---------------------------------------------------------------------------
// Drift call logs: one ApiId per line

inline std::vector<graph::ApiId> load_call_log(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<graph::ApiId> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
      line.pop_back();
    if (line.empty()) continue;
    out.push_back(graph::api(line));
  }
  return out;
}

}  // namespace faultline::io
