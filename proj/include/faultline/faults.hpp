#pragma once

// Fault-plan vocabulary: what can be injected, where, and when, plus the
// orchestration hooks (step-order barriers, per-edge load multipliers,
// placement overrides) that ride along with a plan.

#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "faultline/callgraph.hpp"

namespace faultline::faults {

using graph::ApiId;
using graph::Edge;

// Reserved caller id for scenario entry calls. Entry edges may carry load
// multipliers but never fault rules (they are not part of CALL).
inline const ApiId kClient{"@client"};

struct FaultAction {
  enum class Kind { Break, Delay, HttpError };
  Kind kind = Kind::Break;
  int delay_ms = 0;  // Delay
  int status = 0;    // HttpError

  static FaultAction breakage() { return {Kind::Break, 0, 0}; }
  static FaultAction delay(int ms) { return {Kind::Delay, ms, 0}; }
  static FaultAction http_error(int status) {
    return {Kind::HttpError, 0, status};
  }
};

struct FaultTrigger {
  enum class Kind { Always, NthCall, WithProbability };
  Kind kind = Kind::Always;
  long nth = 0;
  double probability = 0.0;
  std::uint64_t seed = 0;  // probabilistic triggers carry their own stream

  static FaultTrigger always() { return {}; }
  static FaultTrigger nth_call(long n) {
    FaultTrigger t;
    t.kind = Kind::NthCall;
    t.nth = n;
    return t;
  }
  static FaultTrigger with_probability(double p, std::uint64_t seed) {
    FaultTrigger t;
    t.kind = Kind::WithProbability;
    t.probability = p;
    t.seed = seed;
    return t;
  }
};

struct FaultRule {
  FaultTrigger trigger;
  FaultAction action;
};

struct PlanHooks {
  // Ordered step-index groups; when present they replace the scenario's own
  // partial order.
  std::optional<std::vector<std::vector<int>>> barriers;
  std::map<Edge, int> load;  // call-rate multiplier per edge, >= 1
  std::map<std::string, std::string> placement_override;  // service -> site
};

struct FaultPlan {
  std::map<Edge, std::vector<FaultRule>> rules;
  PlanHooks hooks;

  bool empty() const {
    return rules.empty() && !hooks.barriers && hooks.load.empty() &&
           hooks.placement_override.empty();
  }

  const std::vector<FaultRule>* rules_for(const Edge& e) const {
    auto it = rules.find(e);
    return it == rules.end() ? nullptr : &it->second;
  }
};

struct PlanValidation {
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
};

inline bool is_entry_edge(const Edge& e) { return e.first == kClient; }

inline PlanValidation validate_plan(const FaultPlan& plan,
                                    const graph::CallGraph& g) {
  PlanValidation v;
  auto complain = [&](const Edge& e, std::size_t idx, const std::string& msg) {
    std::ostringstream os;
    os << "edge " << graph::to_string(e) << " rule " << idx << ": " << msg;
    v.errors.push_back(os.str());
  };
  for (const auto& [edge, rules] : plan.rules) {
    if (!g.has_edge(edge)) {
      v.errors.push_back("plan references edge " + graph::to_string(edge) +
                         " absent from the call graph");
      continue;
    }
    int breaks = 0;
    for (std::size_t i = 0; i < rules.size(); ++i) {
      const auto& r = rules[i];
      switch (r.action.kind) {
        case FaultAction::Kind::Break:
          ++breaks;
          break;
        case FaultAction::Kind::Delay:
          if (r.action.delay_ms <= 0)
            complain(edge, i, "delay must be positive, got " +
                                  std::to_string(r.action.delay_ms));
          break;
        case FaultAction::Kind::HttpError:
          if (r.action.status < 400 || r.action.status > 599)
            complain(edge, i, "http status must be in [400,599], got " +
                                  std::to_string(r.action.status));
          break;
      }
      switch (r.trigger.kind) {
        case FaultTrigger::Kind::Always:
          break;
        case FaultTrigger::Kind::NthCall:
          if (r.trigger.nth < 1) complain(edge, i, "nth-call index must be >= 1");
          break;
        case FaultTrigger::Kind::WithProbability:
          if (!(r.trigger.probability > 0.0) || r.trigger.probability > 1.0)
            complain(edge, i, "probability must be in (0,1]");
          break;
      }
    }
    if (breaks > 1)
      v.errors.push_back("edge " + graph::to_string(edge) +
                         " has more than one break rule");
  }
  for (const auto& [edge, mult] : plan.hooks.load) {
    const bool valid_edge =
        g.has_edge(edge) ||
        (is_entry_edge(edge) && g.has_node(edge.second));
    if (!valid_edge)
      v.errors.push_back("load hook references unknown edge " +
                         graph::to_string(edge));
    if (mult < 1)
      v.errors.push_back("load multiplier on " + graph::to_string(edge) +
                         " must be >= 1, got " + std::to_string(mult));
  }
  return v;
}

// Rule lists concatenate per edge; a later break rule supersedes earlier ones
// on the same edge; hooks from `b` override those of `a`.
inline FaultPlan merge_plans(const FaultPlan& a, const FaultPlan& b) {
  FaultPlan out = a;
  for (const auto& [edge, rules] : b.rules) {
    auto& dst = out.rules[edge];
    dst.insert(dst.end(), rules.begin(), rules.end());
  }
  for (auto& [edge, rules] : out.rules) {
    int last_break = -1;
    for (std::size_t i = 0; i < rules.size(); ++i)
      if (rules[i].action.kind == FaultAction::Kind::Break)
        last_break = static_cast<int>(i);
    if (last_break >= 0) {
      std::vector<FaultRule> kept;
      for (std::size_t i = 0; i < rules.size(); ++i)
        if (rules[i].action.kind != FaultAction::Kind::Break ||
            static_cast<int>(i) == last_break)
          kept.push_back(rules[i]);
      rules = std::move(kept);
    }
  }
  if (b.hooks.barriers) out.hooks.barriers = b.hooks.barriers;
  for (const auto& [edge, mult] : b.hooks.load) out.hooks.load[edge] = mult;
  for (const auto& [svc, site] : b.hooks.placement_override)
    out.hooks.placement_override[svc] = site;
  return out;
}

}  // namespace faultline::faults
