#pragma once

// API set, CALL graph, per-test footprints, the coverage-event ledger and the
// circuit-breaker coverage criterion (basic and level-i).
//
// Coverage asks that every edge of a test's (level-expanded) call subgraph
// sees three events: a breakage, a delayed run that still ends on the happy
// path, and a delayed run that ends on a graceful error path.

#include <algorithm>
#include <array>
#include <deque>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "faultline/errors.hpp"

namespace faultline::graph {

struct ApiId {
  std::string label;
  auto operator<=>(const ApiId&) const = default;
};

inline ApiId api(std::string label) { return ApiId{std::move(label)}; }

using Edge = std::pair<ApiId, ApiId>;

inline std::string to_string(const Edge& e) {
  return "(" + e.first.label + "," + e.second.label + ")";
}

enum class EventKind { Breakage, DelayedHappyPath, DelayedErrorPath };

inline constexpr std::array<EventKind, 3> kAllEventKinds = {
    EventKind::Breakage, EventKind::DelayedHappyPath,
    EventKind::DelayedErrorPath};

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::Breakage: return "breakage";
    case EventKind::DelayedHappyPath: return "delayedHappyPath";
    case EventKind::DelayedErrorPath: return "delayedErrorPath";
  }
  return "?";
}

inline EventKind event_kind_from_string(const std::string& s) {
  for (EventKind k : kAllEventKinds)
    if (s == to_string(k)) return k;
  throw InputError("unknown coverage event kind '" + s + "'");
}

struct CoverageEvent {
  EventKind kind;
  Edge edge;
  auto operator<=>(const CoverageEvent&) const = default;
};

// Directed graph over ApiIds. Self-loops are permitted; the edge set is
// duplicate-free by construction.
class CallGraph {
 public:
  CallGraph() = default;

  void add_node(const ApiId& id) {
    if (id.label.empty()) throw InputError("api id must be non-empty");
    nodes_.insert(id);
  }

  void add_edge(const ApiId& from, const ApiId& to) {
    require_node(from);
    require_node(to);
    if (edges_.insert({from, to}).second) succ_[from].insert(to);
  }

  const std::set<ApiId>& nodes() const { return nodes_; }
  const std::set<Edge>& edges() const { return edges_; }

  bool has_node(const ApiId& id) const { return nodes_.count(id) > 0; }
  bool has_edge(const Edge& e) const { return edges_.count(e) > 0; }

  const std::set<ApiId>& successors(const ApiId& id) const {
    static const std::set<ApiId> kEmpty;
    auto it = succ_.find(id);
    return it == succ_.end() ? kEmpty : it->second;
  }

  void require_node(const ApiId& id) const {
    if (!has_node(id)) throw InputError("unknown api '" + id.label + "'");
  }

 private:
  std::set<ApiId> nodes_;
  std::set<Edge> edges_;
  std::map<ApiId, std::set<ApiId>> succ_;
};

// The set of APIs a test was observed to call (its footprint).
struct TestFootprint {
  std::string test_id;
  std::set<ApiId> apis;
};

// Occurrence counts of coverage events, keyed by (test, edge, kind).
// Recorded edges are expected to come from plan-validated simulator traces,
// so they exist in the graph by construction.
class CoverageLedger {
 public:
  void record(const std::string& test_id, const CoverageEvent& ev,
              long count = 1) {
    if (count < 0) throw InputError("event count must be non-negative");
    records_[{test_id, ev.edge, ev.kind}] += count;
  }

  void merge(const std::string& test_id, const std::set<CoverageEvent>& evs) {
    for (const auto& ev : evs) record(test_id, ev);
  }

  long count(const std::string& test_id, const Edge& edge,
             EventKind kind) const {
    auto it = records_.find({test_id, edge, kind});
    return it == records_.end() ? 0 : it->second;
  }

  using Key = std::tuple<std::string, Edge, EventKind>;
  const std::map<Key, long>& records() const { return records_; }

  int level() const { return level_; }
  void set_level(int level) {
    if (level < 1) throw InputError("coverage level must be >= 1");
    level_ = level;
  }

 private:
  std::map<Key, long> records_;
  int level_ = 1;  // the coverage level this ledger is collected at
};

// Nodes restricted to `apis`, keeping edges with both endpoints inside.
inline CallGraph induced_subgraph(const CallGraph& g,
                                  const std::set<ApiId>& apis) {
  CallGraph sub;
  for (const auto& id : apis) {
    g.require_node(id);
    sub.add_node(id);
  }
  for (const auto& e : g.edges())
    if (apis.count(e.first) && apis.count(e.second))
      sub.add_edge(e.first, e.second);
  return sub;
}

// Level-i footprint expansion: adds every api reachable from a member along a
// forward path of fewer than `level` edges. level 1 returns the input set
// (only length-0 paths qualify).
inline std::set<ApiId> expand_footprint(const CallGraph& g,
                                        const std::set<ApiId>& apis,
                                        int level) {
  if (level < 1)
    throw InputError("coverage level must be >= 1, got " +
                     std::to_string(level));
  for (const auto& id : apis) g.require_node(id);

  std::set<ApiId> result = apis;
  std::set<ApiId> frontier = apis;
  for (int dist = 1; dist <= level - 1 && !frontier.empty(); ++dist) {
    std::set<ApiId> next;
    for (const auto& id : frontier)
      for (const auto& succ : g.successors(id))
        if (!result.count(succ)) next.insert(succ);
    result.insert(next.begin(), next.end());
    frontier = std::move(next);
  }
  return result;
}

inline TestFootprint footprint_union(const std::vector<TestFootprint>& runs) {
  if (runs.empty()) throw InputError("footprint_union: no runs given");
  TestFootprint out{runs.front().test_id, {}};
  for (const auto& run : runs) {
    if (run.test_id != out.test_id)
      throw InputError("footprint_union: mixed test ids '" + out.test_id +
                       "' and '" + run.test_id + "'");
    out.apis.insert(run.apis.begin(), run.apis.end());
  }
  return out;
}

struct TestCoverage {
  std::string test_id;
  std::set<std::pair<Edge, EventKind>> covered;
  std::set<std::pair<Edge, EventKind>> uncovered;

  bool vacuous() const { return covered.empty() && uncovered.empty(); }
  bool fully_covered() const { return uncovered.empty(); }
};

struct CoverageReport {
  std::vector<TestCoverage> tests;
  long covered_pairs = 0;
  long total_pairs = 0;
  int level = 1;

  // Vacuous (no edges anywhere) counts as fully covered.
  double fraction() const {
    return total_pairs == 0
               ? 1.0
               : static_cast<double>(covered_pairs) / total_pairs;
  }
};

// Per test: covered and uncovered (edge, event) pairs over the induced
// subgraph of the level-expanded footprint.
inline CoverageReport coverage_status(const CoverageLedger& ledger,
                                      const CallGraph& g,
                                      const std::vector<TestFootprint>& tests,
                                      int level) {
  CoverageReport report;
  report.level = level;
  for (const auto& fp : tests) {
    const auto expanded = expand_footprint(g, fp.apis, level);
    const auto sub = induced_subgraph(g, expanded);
    TestCoverage tc{fp.test_id, {}, {}};
    for (const auto& edge : sub.edges()) {
      for (EventKind kind : kAllEventKinds) {
        auto& bucket =
            ledger.count(fp.test_id, edge, kind) > 0 ? tc.covered
                                                     : tc.uncovered;
        bucket.insert({edge, kind});
      }
    }
    report.covered_pairs += static_cast<long>(tc.covered.size());
    report.total_pairs +=
        static_cast<long>(tc.covered.size() + tc.uncovered.size());
    report.tests.push_back(std::move(tc));
  }
  return report;
}

}  // namespace faultline::graph
