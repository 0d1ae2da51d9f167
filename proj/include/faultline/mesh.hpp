#pragma once

// Deterministic discrete-event simulator of the application under test:
// services with endpoints, downstream calls guarded by input conditions,
// timeouts, per-endpoint circuit breakers, sites with inter-site latency,
// fault interception at call boundaries, and happy/error path outcome
// classification.
//
// One run is strictly single-threaded; identical (spec, scenario, plan,
// placement, seed) inputs produce byte-identical traces.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "faultline/callgraph.hpp"
#include "faultline/circuit_breaker.hpp"
#include "faultline/errors.hpp"
#include "faultline/expr.hpp"
#include "faultline/faults.hpp"
#include "faultline/rng.hpp"

namespace faultline::mesh {

using graph::ApiId;
using graph::Edge;

// ---------------------------------------------------------------------------
// Application spec

struct DownstreamCall {
  ApiId target;
  std::optional<expr::BoolExpr> when;  // absent = unconditional
};

enum class FallbackPolicy { GracefulError, PropagateFailure };

// Console line templates per endpoint outcome; {api} and {status} expand.
// These lines feed output clustering.
struct ConsoleTemplates {
  std::string ok;
  std::string degraded;
  std::string error;
};

struct EndpointSpec {
  ApiId api;
  Tick base_latency_ms = 0;
  Tick timeout_ms = 1000;  // applies to this endpoint's outbound calls
  std::vector<DownstreamCall> downstream;
  FallbackPolicy fallback = FallbackPolicy::PropagateFailure;
  std::optional<CircuitBreakerConfig> breaker;
  ConsoleTemplates console;
};

struct ServiceSpec {
  std::string name;
  std::vector<EndpointSpec> endpoints;
};

struct Placement {
  std::vector<std::string> sites;
  std::vector<std::vector<Tick>> latency_ms;       // symmetric, zero diagonal
  std::map<std::string, std::string> service_site;  // service -> site

  int site_index(const std::string& site) const {
    for (std::size_t i = 0; i < sites.size(); ++i)
      if (sites[i] == site) return static_cast<int>(i);
    throw InputError("unknown site '" + site + "'");
  }

  Tick latency_between(const std::string& a, const std::string& b) const {
    return latency_ms[site_index(a)][site_index(b)];
  }

  void validate() const {
    if (latency_ms.size() != sites.size())
      throw InputError("latency matrix must be |sites| x |sites|");
    for (std::size_t i = 0; i < latency_ms.size(); ++i) {
      if (latency_ms[i].size() != sites.size())
        throw InputError("latency matrix must be square");
      if (latency_ms[i][i] != 0)
        throw InputError("latency matrix diagonal must be zero");
      for (std::size_t j = 0; j < latency_ms[i].size(); ++j) {
        if (latency_ms[i][j] < 0) throw InputError("latency must be >= 0");
        if (latency_ms[i][j] != latency_ms[j][i])
          throw InputError("latency matrix must be symmetric");
      }
    }
    for (const auto& [svc, site] : service_site) site_index(site);
  }
};

struct AppSpec {
  std::string name;
  std::vector<ServiceSpec> services;
  std::vector<Edge> extra_edges;  // declared data dependencies beyond calls
  Placement placement;

  const EndpointSpec* find_endpoint(const ApiId& api) const {
    for (const auto& svc : services)
      for (const auto& ep : svc.endpoints)
        if (ep.api == api) return &ep;
    return nullptr;
  }

  const EndpointSpec& endpoint(const ApiId& api) const {
    const auto* ep = find_endpoint(api);
    if (!ep) throw InputError("unknown api '" + api.label + "'");
    return *ep;
  }

  const std::string& service_of(const ApiId& api) const {
    for (const auto& svc : services)
      for (const auto& ep : svc.endpoints)
        if (ep.api == api) return svc.name;
    throw InputError("unknown api '" + api.label + "'");
  }

  // CALL: downstream-call pairs plus declared extra dependencies.
  graph::CallGraph call_graph() const {
    graph::CallGraph g;
    for (const auto& svc : services)
      for (const auto& ep : svc.endpoints) g.add_node(ep.api);
    for (const auto& svc : services)
      for (const auto& ep : svc.endpoints)
        for (const auto& ds : ep.downstream) g.add_edge(ep.api, ds.target);
    for (const auto& e : extra_edges) g.add_edge(e.first, e.second);
    return g;
  }

  void validate() const {
    std::set<ApiId> seen;
    for (const auto& svc : services) {
      if (svc.name.empty()) throw InputError("service name must be non-empty");
      for (const auto& ep : svc.endpoints) {
        if (ep.api.label.empty())
          throw InputError("endpoint api id must be non-empty");
        if (!seen.insert(ep.api).second)
          throw InputError("duplicate api '" + ep.api.label + "'");
        if (ep.base_latency_ms < 0)
          throw InputError("api '" + ep.api.label + "': latency must be >= 0");
        if (ep.timeout_ms <= 0)
          throw InputError("api '" + ep.api.label + "': timeout must be positive");
        if (ep.breaker) ep.breaker->validate();
      }
    }
    for (const auto& svc : services)
      for (const auto& ep : svc.endpoints)
        for (const auto& ds : ep.downstream)
          if (!seen.count(ds.target))
            throw InputError("api '" + ep.api.label +
                             "' calls unknown target '" + ds.target.label +
                             "'");
    for (const auto& e : extra_edges)
      if (!seen.count(e.first) || !seen.count(e.second))
        throw InputError("extra edge " + graph::to_string(e) +
                         " references unknown api");
    placement.validate();
    for (const auto& svc : services)
      if (!placement.service_site.count(svc.name))
        throw InputError("service '" + svc.name + "' has no site assignment");
  }
};

// ---------------------------------------------------------------------------
// Scenarios and traces

struct ScenarioStep {
  ApiId api;
  expr::Assignment params;
};

// A declarative clause over the final trace. All listed conditions must hold.
struct ExpectedClause {
  bool all_steps_ok = true;    // every entry step returned Ok
  bool forbid_degraded = false;  // no entry step degraded
  std::vector<ApiId> require_called;  // these apis answered Ok somewhere
  std::map<int, std::string> step_class;  // step index -> ok|degraded|failed
};

struct ExpectedResult {
  ExpectedClause happy{true, true, {}, {}};
  ExpectedClause graceful{true, false, {}, {}};
};

struct TestScenario {
  std::string test_id;
  std::vector<ScenarioStep> steps;
  // Ordered barrier groups of step indices; steps inside a group may execute
  // in any order, groups execute in declared order. Empty = declared order.
  std::vector<std::vector<int>> barriers;
  ExpectedResult expected;

  void validate(const AppSpec& app) const {
    if (test_id.empty()) throw InputError("scenario needs a test_id");
    if (steps.empty())
      throw InputError("scenario '" + test_id + "' has no steps");
    for (const auto& s : steps) app.endpoint(s.api);
    std::set<int> seen;
    for (const auto& group : barriers)
      for (int idx : group) {
        if (idx < 0 || idx >= static_cast<int>(steps.size()))
          throw InputError("scenario '" + test_id + "': barrier step index " +
                           std::to_string(idx) + " out of range");
        if (!seen.insert(idx).second)
          throw InputError("scenario '" + test_id + "': step " +
                           std::to_string(idx) + " in two barrier groups");
      }
  }
};

enum class Outcome { Ok, Dropped, TimedOut, Errored };

inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::Ok: return "ok";
    case Outcome::Dropped: return "dropped";
    case Outcome::TimedOut: return "timed_out";
    case Outcome::Errored: return "errored";
  }
  return "?";
}

struct CallRecord {
  ApiId caller;  // faults::kClient for entry calls
  ApiId callee;
  Tick start = 0;
  Tick end = 0;
  Outcome outcome = Outcome::Ok;
  int status = 200;
  bool delayed = false;           // an injected delay applied to this call
  bool breaker_rejected = false;  // open circuit, target never invoked
  bool degraded = false;          // callee answered via graceful fallback
  bool load_echo = false;         // synthetic load repeat, no fan-out

  bool operator==(const CallRecord&) const = default;
};

enum class RunClass { HappyPath, ErrorPath, TestFailure };

inline const char* to_string(RunClass c) {
  switch (c) {
    case RunClass::HappyPath: return "happyPath";
    case RunClass::ErrorPath: return "errorPath";
    case RunClass::TestFailure: return "testFailure";
  }
  return "?";
}

struct StepResult {
  int step_index = 0;
  ApiId api;
  Outcome outcome = Outcome::Ok;
  bool degraded = false;

  bool operator==(const StepResult&) const = default;
};

struct ExecutionTrace {
  std::string test_id;
  std::vector<CallRecord> records;  // ordered by start time
  std::vector<std::string> console;
  std::vector<StepResult> steps;      // one per executed entry call
  std::vector<int> executed_order;    // step indices in executed order
  RunClass classification = RunClass::TestFailure;

  bool operator==(const ExecutionTrace&) const = default;
};

struct SimOptions {
  long event_cap = 100000;
  int depth_cap = 64;
};

// ---------------------------------------------------------------------------
// Outcome classification

inline bool clause_holds(const ExpectedClause& c, const ExecutionTrace& t) {
  if (c.all_steps_ok)
    for (const auto& sr : t.steps)
      if (sr.outcome != Outcome::Ok) return false;
  if (c.forbid_degraded)
    for (const auto& sr : t.steps)
      if (sr.degraded) return false;
  for (const auto& api : c.require_called) {
    bool found = false;
    for (const auto& rec : t.records)
      if (rec.callee == api && rec.outcome == Outcome::Ok) {
        found = true;
        break;
      }
    if (!found) return false;
  }
  for (const auto& [idx, cls] : c.step_class) {
    for (const auto& sr : t.steps) {
      if (sr.step_index != idx) continue;
      const bool ok = sr.outcome == Outcome::Ok;
      if (cls == "ok" && !(ok && !sr.degraded)) return false;
      if (cls == "degraded" && !(ok && sr.degraded)) return false;
      if (cls == "failed" && ok) return false;
    }
  }
  return true;
}

// HappyPath if the happy clause holds, ErrorPath if the graceful-degradation
// clause holds, TestFailure otherwise.
inline RunClass classify_outcome(const ExecutionTrace& t,
                                 const ExpectedResult& expected) {
  if (clause_holds(expected.happy, t)) return RunClass::HappyPath;
  if (clause_holds(expected.graceful, t)) return RunClass::ErrorPath;
  return RunClass::TestFailure;
}

// ---------------------------------------------------------------------------
// Simulator

namespace detail {

class Simulation {
 public:
  Simulation(const AppSpec& app, const TestScenario& scenario,
             const faults::FaultPlan& plan, const Placement& placement,
             std::uint64_t order_seed, const SimOptions& opt)
      : app_(app),
        scenario_(scenario),
        plan_(plan),
        placement_(placement),
        order_rng_(SplitRng(order_seed).split("step-order")),
        opt_(opt) {
    for (const auto& [svc, site] : plan.hooks.placement_override) {
      placement_.site_index(site);  // throws on unknown site
      placement_.service_site[svc] = site;
    }
  }

  ExecutionTrace run() {
    ExecutionTrace trace;
    trace.test_id = scenario_.test_id;
    const auto order = linear_extension();
    trace.executed_order = order;
    Tick clock = 0;
    for (int idx : order) {
      const auto& step = scenario_.steps[idx];
      const Edge entry_edge{faults::kClient, step.api};
      const int reps = load_multiplier(entry_edge);
      for (int r = 0; r < reps; ++r) {
        const CallRecord rec =
            do_call(faults::kClient, step.api, clock, step.params,
                    /*echo=*/false, /*depth=*/0);
        clock = rec.end;
        trace.steps.push_back({idx, step.api, rec.outcome, rec.degraded});
      }
    }
    // a timed-out caller can outlive records its callee produced later
    std::stable_sort(records_.begin(), records_.end(),
                     [](const CallRecord& a, const CallRecord& b) {
                       return a.start < b.start;
                     });
    trace.records = std::move(records_);
    trace.console = std::move(console_);
    trace.classification = classify_outcome(trace, scenario_.expected);
    return trace;
  }

 private:
  struct EndpointResult {
    Tick duration = 0;
    bool degraded = false;
    bool failed = false;
    int status = 200;
  };

  // Seed-chosen linear extension of the scenario's barrier partial order.
  std::vector<int> linear_extension() {
    const auto& barriers = plan_.hooks.barriers ? *plan_.hooks.barriers
                                                : scenario_.barriers;
    std::vector<int> order;
    std::set<int> in_groups;
    std::uint64_t group_no = 0;
    for (const auto& group : barriers) {
      std::vector<int> g = group;
      SplitRng rng = order_rng_.split(group_no++);
      rng.shuffle(g);
      for (int idx : g) {
        order.push_back(idx);
        in_groups.insert(idx);
      }
    }
    // steps outside any group run after the groups, in declared order
    for (int i = 0; i < static_cast<int>(scenario_.steps.size()); ++i)
      if (!in_groups.count(i)) order.push_back(i);
    return order;
  }

  int load_multiplier(const Edge& e) const {
    auto it = plan_.hooks.load.find(e);
    return it == plan_.hooks.load.end() ? 1 : it->second;
  }

  Tick caller_timeout(const ApiId& caller) const {
    if (caller == faults::kClient) return -1;  // the client waits
    return app_.endpoint(caller).timeout_ms;
  }

  Tick site_latency(const ApiId& caller, const ApiId& callee) const {
    if (caller == faults::kClient) return 0;  // client is at the boundary
    return placement_.latency_between(
        placement_.service_site.at(app_.service_of(caller)),
        placement_.service_site.at(app_.service_of(callee)));
  }

  CallRecord do_call(const ApiId& caller, const ApiId& callee, Tick start,
                     const expr::Assignment& params, bool echo, int depth) {
    if (++events_ > opt_.event_cap)
      throw DivergenceError("simulation exceeded event cap of " +
                            std::to_string(opt_.event_cap));
    if (depth > opt_.depth_cap)
      throw DivergenceError("simulation exceeded call depth cap of " +
                            std::to_string(opt_.depth_cap));

    const std::size_t slot = records_.size();
    records_.push_back({});
    CallRecord rec;
    rec.caller = caller;
    rec.callee = callee;
    rec.start = start;
    rec.load_echo = echo;

    const EndpointSpec& target = app_.endpoint(callee);

    // Target-side breaker admission: an open circuit rejects without
    // invoking the endpoint and without target latency.
    BreakerState* breaker = nullptr;
    if (target.breaker) {
      breaker = &breakers_[callee];
      if (!breaker_admits(*breaker, start, *target.breaker)) {
        rec.end = start;
        rec.outcome = Outcome::Errored;
        rec.status = 503;
        rec.breaker_rejected = true;
        records_[slot] = rec;
        return rec;
      }
    }

    // Fault interception: after the caller issues the call, before control
    // passes to the callee.
    Tick injected_delay = 0;
    bool broken = false;
    int http_error = 0;
    if (const auto* rules = plan_.rules_for({caller, callee})) {
      for (std::size_t i = 0; i < rules->size(); ++i) {
        const auto& rule = (*rules)[i];
        const long hit = ++rule_hits_[{Edge{caller, callee}, i}];
        if (!trigger_fires(rule.trigger, hit)) continue;
        switch (rule.action.kind) {
          case faults::FaultAction::Kind::Break: broken = true; break;
          case faults::FaultAction::Kind::Delay:
            injected_delay += rule.action.delay_ms;
            break;
          case faults::FaultAction::Kind::HttpError:
            http_error = rule.action.status;
            break;
        }
      }
    }

    const Tick timeout = caller_timeout(caller);

    if (broken) {
      // The call is never realised; the caller hangs until its timeout.
      rec.outcome = Outcome::Dropped;
      rec.status = 0;
      rec.end = timeout >= 0 ? start + timeout : start;
      if (breaker)
        *breaker = step_circuit_breaker(*breaker, CallClass::Failure, rec.end,
                                        *target.breaker);
      records_[slot] = rec;
      return rec;
    }

    rec.delayed = injected_delay > 0;
    Tick total;
    Outcome outcome;
    bool degraded = false;
    int status;
    if (http_error != 0) {
      // Aborted at the interception point; the callee is never invoked.
      total = injected_delay;
      outcome = Outcome::Errored;
      status = http_error;
    } else {
      const Tick hop = site_latency(caller, callee);
      const EndpointResult res =
          exec_endpoint(target, params, start + hop + injected_delay, echo,
                        depth + 1);
      total = hop + injected_delay + res.duration + hop;
      outcome = res.failed ? Outcome::Errored : Outcome::Ok;
      degraded = res.degraded && !res.failed;
      status = res.status;
    }

    if (timeout >= 0 && total > timeout) {
      rec.outcome = Outcome::TimedOut;
      rec.status = 504;
      rec.end = start + timeout;
    } else {
      rec.outcome = outcome;
      rec.status = status;
      rec.degraded = degraded;
      rec.end = start + total;
    }
    if (breaker)
      *breaker = step_circuit_breaker(
          *breaker,
          rec.outcome == Outcome::Ok ? CallClass::Success : CallClass::Failure,
          rec.end, *target.breaker);
    records_[slot] = rec;
    return rec;
  }

  EndpointResult exec_endpoint(const EndpointSpec& ep,
                               const expr::Assignment& params, Tick begin,
                               bool echo, int depth) {
    EndpointResult res;
    Tick t = begin + ep.base_latency_ms;
    if (!echo) {  // load echoes exercise the endpoint without fan-out
      for (const auto& ds : ep.downstream) {
        if (ds.when && !ds.when->eval(params)) continue;
        const int reps = load_multiplier({ep.api, ds.target});
        bool failed_here = false;
        for (int r = 0; r < reps; ++r) {
          const CallRecord child =
              do_call(ep.api, ds.target, t, params, /*echo=*/r > 0, depth);
          t = child.end;
          if (r == 0) {
            if (child.outcome != Outcome::Ok) failed_here = true;
            // degraded content bubbles up: a response built from a degraded
            // dependency is itself degraded
            else if (child.degraded) res.degraded = true;
          }
        }
        if (failed_here) {
          if (ep.fallback == FallbackPolicy::GracefulError) {
            res.degraded = true;  // absorbed; remaining calls still run
          } else {
            res.failed = true;
            res.status = 500;
            res.duration = t - begin;
            emit_console(ep, "error", res.status);
            return res;
          }
        }
      }
    }
    res.duration = t - begin;
    res.status = 200;
    if (!echo)
      emit_console(ep, res.degraded ? "degraded" : "ok", res.status);
    return res;
  }

  bool trigger_fires(const faults::FaultTrigger& t, long hit) {
    switch (t.kind) {
      case faults::FaultTrigger::Kind::Always:
        return true;
      case faults::FaultTrigger::Kind::NthCall:
        return hit == t.nth;
      case faults::FaultTrigger::Kind::WithProbability: {
        SplitRng rng = SplitRng(t.seed).split(static_cast<std::uint64_t>(hit));
        return rng.next_unit() < t.probability;
      }
    }
    return false;
  }

  void emit_console(const EndpointSpec& ep, const std::string& kind,
                    int status) {
    const std::string* tmpl = nullptr;
    if (kind == "ok") tmpl = &ep.console.ok;
    else if (kind == "degraded") tmpl = &ep.console.degraded;
    else tmpl = &ep.console.error;
    if (tmpl->empty()) return;
    std::string line = *tmpl;
    const auto substitute = [&](const std::string& key, const std::string& val) {
      for (std::size_t pos = line.find(key); pos != std::string::npos;
           pos = line.find(key, pos + val.size()))
        line.replace(pos, key.size(), val);
    };
    substitute("{api}", ep.api.label);
    substitute("{status}", std::to_string(status));
    console_.push_back(std::move(line));
  }

  const AppSpec& app_;
  const TestScenario& scenario_;
  const faults::FaultPlan& plan_;
  Placement placement_;
  SplitRng order_rng_;
  SimOptions opt_;

  std::map<ApiId, BreakerState> breakers_;
  std::map<std::pair<Edge, std::size_t>, long> rule_hits_;
  std::vector<CallRecord> records_;
  std::vector<std::string> console_;
  long events_ = 0;
};

}  // namespace detail

inline ExecutionTrace run_scenario(const AppSpec& app,
                                   const TestScenario& scenario,
                                   const faults::FaultPlan& plan,
                                   const Placement& placement,
                                   std::uint64_t order_seed,
                                   const SimOptions& opt = {}) {
  scenario.validate(app);
  const auto g = app.call_graph();
  const auto validation = faults::validate_plan(plan, g);
  if (!validation.ok())
    throw InputError("invalid fault plan: " + validation.errors.front());
  if (plan.hooks.barriers) {  // hook barriers replace the scenario's own
    std::set<int> seen;
    for (const auto& group : *plan.hooks.barriers)
      for (int idx : group) {
        if (idx < 0 || idx >= static_cast<int>(scenario.steps.size()))
          throw InputError("plan barrier step index " + std::to_string(idx) +
                           " out of range for scenario '" + scenario.test_id +
                           "'");
        if (!seen.insert(idx).second)
          throw InputError("plan barriers repeat step " + std::to_string(idx));
      }
  }
  return detail::Simulation(app, scenario, plan, placement, order_seed, opt)
      .run();
}

// Coverage events contributed by one classified run. TestFailure runs signal
// bugs, not coverage, and yield nothing.
inline std::set<graph::CoverageEvent> extract_events(
    const ExecutionTrace& trace, const faults::FaultPlan& plan) {
  std::set<graph::CoverageEvent> events;
  if (trace.classification == RunClass::TestFailure) return events;
  for (const auto& rec : trace.records) {
    if (rec.caller == faults::kClient) continue;  // entry edges are not CALL
    const Edge edge{rec.caller, rec.callee};
    if (rec.outcome == Outcome::Dropped)
      events.insert({graph::EventKind::Breakage, edge});
    if (rec.delayed) {
      if (plan.rules_for(edge) == nullptr)
        throw InputError("trace has a delayed record on " +
                         graph::to_string(edge) +
                         " absent from the fault plan");
      events.insert({trace.classification == RunClass::HappyPath
                         ? graph::EventKind::DelayedHappyPath
                         : graph::EventKind::DelayedErrorPath,
                     edge});
    }
  }
  return events;
}

}  // namespace faultline::mesh
