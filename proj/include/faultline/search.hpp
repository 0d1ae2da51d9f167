#pragma once

// Closed-loop test generation: turns coverage gaps into candidate
// (scenario, fault plan, order seed, placement) batches and decides when the
// loop should stop.
//
// Strategy: greedy gap targeting with epsilon-random exploration. Breakage
// gaps get a Break rule on their edge; delayed-path gaps get delays from an
// escalating ladder bracketing the caller timeout (below it for happy-path
// attempts, above it for error-path attempts). The strategy is deterministic
// in the search state's seed.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "faultline/callgraph.hpp"
#include "faultline/circuit_breaker.hpp"
#include "faultline/faults.hpp"
#include "faultline/rng.hpp"

namespace faultline::search {

struct SearchConfig {
  double target_fraction = 1.0;
  int patience = 5;     // stop after this many rounds without improvement
  int max_rounds = 100; // hard cap
  int batch_size = 16;
  double explore_ratio = 0.2;
};

struct Candidate {
  std::string scenario_id;
  faults::FaultPlan plan;
  std::uint64_t order_seed = 0;
  std::map<std::string, std::string> placement_override;  // service -> site
  std::string annotation;  // "target:test|edge|event" or "explore"
};

struct ExecutedCandidate {
  Candidate candidate;
  std::set<graph::CoverageEvent> events;
};

// What propose/update need to know about the application.
struct SearchContext {
  const graph::CallGraph* g = nullptr;
  std::vector<graph::TestFootprint> footprints;
  std::map<graph::ApiId, mesh::Tick> caller_timeout_ms;
};

struct SearchState {
  graph::CoverageLedger ledger;
  int round = 0;
  double fraction = 0.0;
  double best_fraction = 0.0;
  int no_improvement_streak = 0;
  int level = 1;
  std::uint64_t seed = 0;
  std::map<std::string, long> gap_attempts;   // walks the delay ladder
  std::vector<std::string> unreachable;       // statically untargetable gaps
};

namespace detail {

inline std::string gap_key(const std::string& test, const graph::Edge& e,
                           graph::EventKind kind) {
  return test + "|" + graph::to_string(e) + "|" + graph::to_string(kind);
}

inline mesh::Tick timeout_of(const SearchContext& ctx, const graph::ApiId& id) {
  auto it = ctx.caller_timeout_ms.find(id);
  return it == ctx.caller_timeout_ms.end() ? 1000 : it->second;
}

// Walked in order per retry; below-timeout rungs aim at happy paths, the
// rest at error paths.
inline mesh::Tick happy_delay(mesh::Tick timeout, long attempt) {
  static constexpr double rungs[] = {0.5, 0.9};
  const double f = rungs[attempt % 2];
  mesh::Tick ms = static_cast<mesh::Tick>(std::llround(f * timeout));
  if (ms >= timeout) ms = timeout - 1;
  return ms < 1 ? 1 : ms;
}

inline mesh::Tick error_delay(mesh::Tick timeout, long attempt) {
  static constexpr double rungs[] = {1.1, 2.0, 5.0};
  const double f = rungs[attempt % 3];
  mesh::Tick ms = static_cast<mesh::Tick>(std::llround(f * timeout));
  return ms <= timeout ? timeout + 1 : ms;
}

}  // namespace detail

// One candidate per uncovered (test, edge, event) pair, plus an
// epsilon-share of random exploration. Advances the per-gap retry counters
// in `state` so repeated attempts walk the delay ladder.
inline std::vector<Candidate> propose(SearchState& state,
                                      const SearchContext& ctx,
                                      const SearchConfig& cfg) {
  const auto report =
      graph::coverage_status(state.ledger, *ctx.g, ctx.footprints, state.level);

  struct Gap {
    std::string test;
    graph::Edge edge;
    graph::EventKind kind;
  };
  std::vector<Gap> gaps;
  for (const auto& tc : report.tests)
    for (const auto& [edge, kind] : tc.uncovered)
      gaps.push_back({tc.test_id, edge, kind});
  if (gaps.empty()) return {};

  // Static reachability: the gap's own footprint contains its edge by
  // construction; any failure here is reported, never silently dropped.
  std::vector<Candidate> batch;
  const int explore_slots =
      static_cast<int>(std::floor(cfg.explore_ratio * cfg.batch_size));
  const int target_slots = cfg.batch_size - explore_slots;

  SplitRng round_rng =
      SplitRng(state.seed).split("propose").split(static_cast<std::uint64_t>(state.round));

  for (const auto& gap : gaps) {
    if (static_cast<int>(batch.size()) >= target_slots) break;
    const graph::TestFootprint* host = nullptr;
    for (const auto& fp : ctx.footprints) {
      if (fp.test_id != gap.test) continue;
      const auto expanded = graph::expand_footprint(*ctx.g, fp.apis, state.level);
      if (expanded.count(gap.edge.first) && expanded.count(gap.edge.second))
        host = &fp;
      break;
    }
    if (!host) {
      for (const auto& fp : ctx.footprints) {
        const auto expanded = graph::expand_footprint(*ctx.g, fp.apis, state.level);
        if (expanded.count(gap.edge.first) && expanded.count(gap.edge.second)) {
          host = &fp;
          break;
        }
      }
    }
    const std::string key = detail::gap_key(gap.test, gap.edge, gap.kind);
    if (!host) {
      if (std::find(state.unreachable.begin(), state.unreachable.end(), key) ==
          state.unreachable.end())
        state.unreachable.push_back(key);
      continue;
    }

    Candidate c;
    c.scenario_id = host->test_id;
    c.annotation = "target:" + key;
    c.order_seed = round_rng.split(batch.size()).next_u64();
    const long attempt = state.gap_attempts[key]++;
    const mesh::Tick timeout = detail::timeout_of(ctx, gap.edge.first);
    switch (gap.kind) {
      case graph::EventKind::Breakage:
        c.plan.rules[gap.edge] = {
            {faults::FaultTrigger::always(), faults::FaultAction::breakage()}};
        break;
      case graph::EventKind::DelayedHappyPath:
        c.plan.rules[gap.edge] = {
            {faults::FaultTrigger::always(),
             faults::FaultAction::delay(
                 static_cast<int>(detail::happy_delay(timeout, attempt)))}};
        break;
      case graph::EventKind::DelayedErrorPath:
        c.plan.rules[gap.edge] = {
            {faults::FaultTrigger::always(),
             faults::FaultAction::delay(
                 static_cast<int>(detail::error_delay(timeout, attempt)))}};
        break;
    }
    batch.push_back(std::move(c));
  }

  // Exploration: random scenario, random edge of its expanded subgraph,
  // random rung.
  if (!ctx.footprints.empty()) {
    for (int slot = 0; slot < explore_slots; ++slot) {
      SplitRng rng = round_rng.split(1000 + slot);
      const auto& fp = ctx.footprints[rng.next_below(ctx.footprints.size())];
      const auto expanded = graph::expand_footprint(*ctx.g, fp.apis, state.level);
      const auto sub = graph::induced_subgraph(*ctx.g, expanded);
      if (sub.edges().empty()) continue;
      std::vector<graph::Edge> edges(sub.edges().begin(), sub.edges().end());
      const auto& edge = edges[rng.next_below(edges.size())];
      const mesh::Tick timeout = detail::timeout_of(ctx, edge.first);
      Candidate c;
      c.scenario_id = fp.test_id;
      c.annotation = "explore";
      c.order_seed = rng.next_u64();
      switch (rng.next_below(3)) {
        case 0:
          c.plan.rules[edge] = {{faults::FaultTrigger::always(),
                                 faults::FaultAction::breakage()}};
          break;
        case 1:
          c.plan.rules[edge] = {
              {faults::FaultTrigger::always(),
               faults::FaultAction::delay(static_cast<int>(
                   detail::happy_delay(timeout, rng.next_below(2))))}};
          break;
        default:
          c.plan.rules[edge] = {
              {faults::FaultTrigger::always(),
               faults::FaultAction::delay(static_cast<int>(
                   detail::error_delay(timeout, rng.next_below(3))))}};
          break;
      }
      batch.push_back(std::move(c));
    }
  }
  return batch;
}

// Merge executed results, recompute the coverage fraction, maintain the
// no-improvement streak. An empty batch only advances the round counter.
inline void update(SearchState& state, const SearchContext& ctx,
                   const std::vector<ExecutedCandidate>& executed) {
  state.round += 1;
  if (executed.empty()) return;
  for (const auto& ec : executed)
    state.ledger.merge(ec.candidate.scenario_id, ec.events);
  const auto report =
      graph::coverage_status(state.ledger, *ctx.g, ctx.footprints, state.level);
  state.fraction = report.fraction();
  if (state.fraction > state.best_fraction + 1e-15) {
    state.best_fraction = state.fraction;
    state.no_improvement_streak = 0;
  } else {
    state.no_improvement_streak += 1;
  }
}

inline bool should_stop(const SearchState& state, const SearchConfig& cfg) {
  return state.fraction >= cfg.target_fraction - 1e-12 ||
         state.no_improvement_streak >= cfg.patience ||
         state.round >= cfg.max_rounds;
}

// Replaceable proposal strategy; alternatives (annealing, learned policies)
// implement this interface and slot into the loop unchanged.
class ProposalStrategy {
 public:
  virtual ~ProposalStrategy() = default;
  virtual std::vector<Candidate> next_batch(SearchState& state,
                                            const SearchContext& ctx,
                                            const SearchConfig& cfg) = 0;
};

class GreedyEpsilonStrategy final : public ProposalStrategy {
 public:
  std::vector<Candidate> next_batch(SearchState& state, const SearchContext& ctx,
                                    const SearchConfig& cfg) override {
    return propose(state, ctx, cfg);
  }
};

}  // namespace faultline::search
