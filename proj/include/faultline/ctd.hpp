#pragma once

// Combinatorial Test Design: parameter models with sub-domain partitions and
// constraints, k-interaction covering arrays, interaction-coverage
// measurement, and output-cluster constraint mining.
//
// Satisfiability is decided by exhaustive extension behind a product-size
// cap; model sizes here are small by construction.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "faultline/errors.hpp"
#include "faultline/expr.hpp"
#include "faultline/rng.hpp"

namespace faultline::ctd {

using expr::Assignment;
using expr::BoolExpr;
using CtdConstraint = BoolExpr;

inline constexpr std::uint64_t kDefaultProductCap = 1'000'000;

struct CtdParameter {
  std::string name;
  std::vector<std::string> values;  // sub-domain partition labels, ordered
};

class CtdModel {
 public:
  void add_parameter(std::string name, std::vector<std::string> values) {
    if (values.empty())
      throw InputError("parameter '" + name + "' needs at least one value");
    if (index_.count(name))
      throw InputError("duplicate parameter '" + name + "'");
    std::set<std::string> seen;
    for (const auto& v : values)
      if (!seen.insert(v).second)
        throw InputError("parameter '" + name + "' repeats value '" + v +
                         "'");
    index_[name] = static_cast<int>(params_.size());
    params_.push_back({std::move(name), std::move(values)});
  }

  void add_constraint(CtdConstraint c) {
    c.visit_atoms([&](const std::string& p, const std::string& v) {
      value_index(p, v);  // throws on unknown parameter or value
    });
    constraints_.push_back(std::move(c));
  }

  const std::vector<CtdParameter>& parameters() const { return params_; }
  const std::vector<CtdConstraint>& constraints() const { return constraints_; }

  int param_index(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw InputError("unknown parameter '" + name + "'");
    return it->second;
  }

  int value_index(const std::string& param, const std::string& value) const {
    const auto& p = params_[param_index(param)];
    for (std::size_t i = 0; i < p.values.size(); ++i)
      if (p.values[i] == value) return static_cast<int>(i);
    throw InputError("parameter '" + param + "' has no value '" + value + "'");
  }

  std::uint64_t product_size() const {
    std::uint64_t n = 1;
    for (const auto& p : params_) {
      if (n > kDefaultProductCap * 1000) return n;  // avoid overflow
      n *= p.values.size();
    }
    return n;
  }

 private:
  std::vector<CtdParameter> params_;
  std::vector<CtdConstraint> constraints_;
  std::map<std::string, int> index_;
};

// A complete assignment, one value label per parameter in model order.
struct TestVector {
  std::vector<std::string> values;
  auto operator<=>(const TestVector&) const = default;
};

inline Assignment to_assignment(const CtdModel& m, const TestVector& t) {
  if (t.values.size() != m.parameters().size())
    throw InputError("test vector arity mismatch: expected " +
                     std::to_string(m.parameters().size()) + ", got " +
                     std::to_string(t.values.size()));
  Assignment a;
  for (std::size_t i = 0; i < t.values.size(); ++i)
    a[m.parameters()[i].name] = t.values[i];
  return a;
}

inline bool is_legal(const CtdModel& m, const TestVector& t) {
  const Assignment a = to_assignment(m, t);
  for (const auto& c : m.constraints())
    if (!c.eval(a)) return false;
  return true;
}

// Exactly the legal members of the Cartesian product, in lexicographic order
// (first parameter most significant, values in declared order).
inline std::vector<TestVector> enumerate_legal(
    const CtdModel& m, std::uint64_t cap = kDefaultProductCap) {
  const std::uint64_t product = m.product_size();
  if (product > cap)
    throw InputError("domain product " + std::to_string(product) +
                     " exceeds enumeration cap " + std::to_string(cap));
  const auto& params = m.parameters();
  std::vector<TestVector> out;
  std::vector<std::size_t> idx(params.size(), 0);
  for (;;) {
    TestVector t;
    t.values.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i)
      t.values.push_back(params[i].values[idx[i]]);
    if (is_legal(m, t)) out.push_back(std::move(t));
    // odometer increment, last parameter fastest
    std::size_t i = params.size();
    while (i > 0) {
      --i;
      if (++idx[i] < params[i].values.size()) break;
      idx[i] = 0;
      if (i == 0) return out;
    }
    if (params.empty()) return out;
  }
}

// A partial assignment of `strength` distinct parameters, as sorted
// (param index, value index) pairs.
using ValueTuple = std::vector<std::pair<int, int>>;

namespace detail {

inline void for_each_combination(int n, int k,
                                 const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> combo(k);
  for (int i = 0; i < k; ++i) combo[i] = i;
  if (k > n) return;
  for (;;) {
    fn(combo);
    int i = k - 1;
    while (i >= 0 && combo[i] == n - k + i) --i;
    if (i < 0) return;
    ++combo[i];
    for (int j = i + 1; j < k; ++j) combo[j] = combo[j - 1] + 1;
  }
}

inline std::vector<int> to_indices(const CtdModel& m, const TestVector& t) {
  std::vector<int> out(t.values.size());
  for (std::size_t i = 0; i < t.values.size(); ++i)
    out[i] = m.value_index(m.parameters()[i].name, t.values[i]);
  return out;
}

}  // namespace detail

inline void check_strength(const CtdModel& m, int strength) {
  const int n = static_cast<int>(m.parameters().size());
  if (strength < 1 || strength > n)
    throw InputError("strength " + std::to_string(strength) +
                     " out of range [1, " + std::to_string(n) + "]");
}

// All strength-sized partial assignments extendable to a legal full vector.
inline std::set<ValueTuple> realizable_tuples(
    const CtdModel& m, int strength, std::uint64_t cap = kDefaultProductCap) {
  check_strength(m, strength);
  const auto legal = enumerate_legal(m, cap);
  const int n = static_cast<int>(m.parameters().size());
  std::set<ValueTuple> out;
  for (const auto& t : legal) {
    const auto idx = detail::to_indices(m, t);
    detail::for_each_combination(n, strength, [&](const std::vector<int>& combo) {
      ValueTuple tuple;
      tuple.reserve(combo.size());
      for (int p : combo) tuple.push_back({p, idx[p]});
      out.insert(std::move(tuple));
    });
  }
  return out;
}

// Greedy one-test-at-a-time covering array: per step pick the legal vector
// covering the most still-uncovered tuples, ties broken lexicographically.
// The seed only matters above the pool cap, where candidates are subsampled.
inline std::vector<TestVector> generate_covering_array(
    const CtdModel& m, int strength, std::uint64_t seed,
    std::uint64_t cap = kDefaultProductCap, std::size_t pool_cap = 4096) {
  check_strength(m, strength);
  const auto legal = enumerate_legal(m, cap);
  if (legal.empty()) throw InputError("model is unsatisfiable: no legal vectors");

  // Tuple ids in deterministic (set) order.
  const auto tuple_set = realizable_tuples(m, strength, cap);
  std::map<ValueTuple, int> tuple_id;
  int next_id = 0;
  for (const auto& t : tuple_set) tuple_id[t] = next_id++;
  const int tuple_count = next_id;
  if (tuple_count == 0) return {};

  // Candidate pool: the whole legal set at desk scale, a seeded subsample
  // above the cap (indices kept sorted so tie-breaks stay lexicographic).
  std::vector<std::size_t> pool;
  if (legal.size() <= pool_cap) {
    pool.resize(legal.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  } else {
    SplitRng rng = SplitRng(seed).split("covering-array-pool");
    std::set<std::size_t> chosen;
    while (chosen.size() < pool_cap)
      chosen.insert(static_cast<std::size_t>(rng.next_below(legal.size())));
    pool.assign(chosen.begin(), chosen.end());
  }

  const int n = static_cast<int>(m.parameters().size());
  const std::size_t words = (static_cast<std::size_t>(tuple_count) + 63) / 64;
  auto mask_of = [&](const TestVector& t) {
    std::vector<std::uint64_t> mask(words, 0);
    const auto idx = detail::to_indices(m, t);
    detail::for_each_combination(n, strength, [&](const std::vector<int>& combo) {
      ValueTuple tuple;
      for (int p : combo) tuple.push_back({p, idx[p]});
      const int id = tuple_id.at(tuple);
      mask[id / 64] |= 1ull << (id % 64);
    });
    return mask;
  };

  std::vector<std::vector<std::uint64_t>> masks;
  masks.reserve(pool.size());
  for (std::size_t i : pool) masks.push_back(mask_of(legal[i]));

  std::vector<std::uint64_t> uncovered(words, 0);
  for (int id = 0; id < tuple_count; ++id)
    uncovered[id / 64] |= 1ull << (id % 64);
  long remaining = tuple_count;

  std::vector<TestVector> out;
  while (remaining > 0) {
    long best_gain = 0;
    std::size_t best = 0;
    for (std::size_t c = 0; c < pool.size(); ++c) {
      long gain = 0;
      for (std::size_t w = 0; w < words; ++w)
        gain += __builtin_popcountll(masks[c][w] & uncovered[w]);
      if (gain > best_gain) {  // ties keep the earlier (lexicographic) index
        best_gain = gain;
        best = c;
      }
    }
    if (best_gain == 0) {
      // Subsampled pool missed some tuples; fall back to full constraint-
      // aware completion over the legal set.
      bool found = false;
      for (std::size_t i = 0; i < legal.size() && !found; ++i) {
        auto mask = mask_of(legal[i]);
        long gain = 0;
        for (std::size_t w = 0; w < words; ++w)
          gain += __builtin_popcountll(mask[w] & uncovered[w]);
        if (gain > 0) {
          pool.push_back(i);
          masks.push_back(std::move(mask));
          best = pool.size() - 1;
          best_gain = gain;
          found = true;
        }
      }
      if (!found) break;  // unreachable: every realizable tuple is in some legal vector
    }
    out.push_back(legal[pool[best]]);
    for (std::size_t w = 0; w < words; ++w) uncovered[w] &= ~masks[best][w];
    remaining -= best_gain;
  }
  return out;
}

// |realizable tuples present in tests| / |realizable tuples|.
inline double interaction_coverage(const CtdModel& m, int strength,
                                   const std::vector<TestVector>& tests,
                                   std::uint64_t cap = kDefaultProductCap) {
  check_strength(m, strength);
  for (std::size_t k = 0; k < tests.size(); ++k) {
    if (!is_legal(m, tests[k])) {
      std::ostringstream os;
      os << "test #" << k << " (";
      for (std::size_t i = 0; i < tests[k].values.size(); ++i)
        os << (i ? "," : "") << tests[k].values[i];
      os << ") violates the model constraints";
      throw InputError(os.str());
    }
  }
  const auto tuples = realizable_tuples(m, strength, cap);
  if (tuples.empty()) return 1.0;  // vacuous
  const int n = static_cast<int>(m.parameters().size());
  std::set<ValueTuple> covered;
  for (const auto& t : tests) {
    const auto idx = detail::to_indices(m, t);
    detail::for_each_combination(n, strength, [&](const std::vector<int>& combo) {
      ValueTuple tuple;
      for (int p : combo) tuple.push_back({p, idx[p]});
      if (tuples.count(tuple)) covered.insert(std::move(tuple));
    });
  }
  return static_cast<double>(covered.size()) / static_cast<double>(tuples.size());
}

// ---------------------------------------------------------------------------
// Output clustering and constraint mining

enum class ClusterCategory { StackBug, TestPlanBug, IllegalCombination, Uncategorized };

struct Observation {
  TestVector vector;
  std::string output;
};

struct OutputCluster {
  int id = 0;
  std::vector<Observation> members;
  std::set<std::string> token_profile;  // tokens shared by every member
  ClusterCategory category = ClusterCategory::Uncategorized;
};

// Lowercased alphanumeric runs; pure numbers dropped (usually ids or
// timestamps).
inline std::set<std::string> tokenize(const std::string& text) {
  std::set<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (cur.empty()) return;
    if (cur.find_first_not_of("0123456789") != std::string::npos)
      out.insert(cur);
    cur.clear();
  };
  for (char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch)))
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    else
      flush();
  }
  flush();
  return out;
}

inline double jaccard(const std::set<std::string>& a,
                      const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& t : a) inter += b.count(t);
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// Greedy agglomeration in input order: an observation joins the best-matching
// existing cluster (Jaccard against the cluster's first member) above the
// threshold, else starts a new one.
inline std::vector<OutputCluster> cluster_outputs(
    const std::vector<Observation>& observations, double threshold = 0.6) {
  if (observations.empty())
    throw InputError("cluster_outputs: no observations");
  std::vector<OutputCluster> clusters;
  std::vector<std::set<std::string>> anchors;
  std::vector<std::vector<std::set<std::string>>> member_tokens;
  for (const auto& obs : observations) {
    const auto tokens = tokenize(obs.output);
    int best = -1;
    double best_sim = 0.0;
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      const double sim = jaccard(tokens, anchors[c]);
      if (sim >= threshold && sim > best_sim) {
        best = static_cast<int>(c);
        best_sim = sim;
      }
    }
    if (best < 0) {
      clusters.push_back({static_cast<int>(clusters.size()), {}, {}, {}});
      anchors.push_back(tokens);
      member_tokens.push_back({});
      best = static_cast<int>(clusters.size()) - 1;
    }
    clusters[best].members.push_back(obs);
    member_tokens[best].push_back(tokens);
  }
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    std::set<std::string> profile = member_tokens[c].front();
    for (const auto& toks : member_tokens[c]) {
      std::set<std::string> next;
      std::set_intersection(profile.begin(), profile.end(), toks.begin(),
                            toks.end(), std::inserter(next, next.begin()));
      profile = std::move(next);
    }
    clusters[c].token_profile = std::move(profile);
  }
  return clusters;
}

// For each IllegalCombination cluster: the maximal partial assignment shared
// by every member and extended by no member of any differently-categorized
// cluster, negated. Clusters without a discriminating assignment contribute
// nothing.
inline std::vector<CtdConstraint> derive_constraints(
    const std::vector<OutputCluster>& clusters, const CtdModel& model) {
  std::vector<const Observation*> contrast;
  for (const auto& c : clusters)
    if (c.category != ClusterCategory::IllegalCombination)
      for (const auto& obs : c.members) contrast.push_back(&obs);

  std::vector<CtdConstraint> out;
  std::set<std::string> emitted;
  for (const auto& c : clusters) {
    if (c.category != ClusterCategory::IllegalCombination || c.members.empty())
      continue;
    // Shared assignment: parameters on which all members agree.
    std::vector<std::pair<int, std::string>> shared;
    const auto& first = c.members.front().vector.values;
    for (std::size_t p = 0; p < model.parameters().size(); ++p) {
      bool agree = true;
      for (const auto& obs : c.members)
        if (obs.vector.values[p] != first[p]) {
          agree = false;
          break;
        }
      if (agree) shared.push_back({static_cast<int>(p), first[p]});
    }
    if (shared.empty()) continue;
    // Discriminating: no contrast member may extend the shared assignment.
    bool discriminating = true;
    for (const Observation* obs : contrast) {
      bool extends = true;
      for (const auto& [p, v] : shared)
        if (obs->vector.values[p] != v) {
          extends = false;
          break;
        }
      if (extends) {
        discriminating = false;
        break;
      }
    }
    if (!discriminating) continue;
    BoolExpr conj = BoolExpr::atom(model.parameters()[shared[0].first].name,
                                   shared[0].second);
    for (std::size_t i = 1; i < shared.size(); ++i)
      conj = BoolExpr::conjunction(
          std::move(conj),
          BoolExpr::atom(model.parameters()[shared[i].first].name,
                         shared[i].second));
    BoolExpr constraint = BoolExpr::negation(std::move(conj));
    if (emitted.insert(constraint.to_text()).second)
      out.push_back(std::move(constraint));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model file format
//
//   # comment
//   param FileState: fileMissing, filePresent
//   constraint FileState=fileMissing -> Open=openFails

inline CtdModel parse_model(const std::string& text,
                            const std::string& origin = "<string>") {
  CtdModel model;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::vector<std::pair<int, std::string>> pending_constraints;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::string body = line.substr(first);
    if (!body.empty() && body.back() == '\r') body.pop_back();
    try {
      if (body.rfind("param ", 0) == 0) {
        const auto colon = body.find(':');
        if (colon == std::string::npos)
          throw InputError("expected 'param NAME: v1, v2, ...'");
        std::string name = body.substr(6, colon - 6);
        name.erase(0, name.find_first_not_of(" \t"));
        name.erase(name.find_last_not_of(" \t") + 1);
        std::vector<std::string> values;
        std::string rest = body.substr(colon + 1);
        std::istringstream vs(rest);
        std::string v;
        while (std::getline(vs, v, ',')) {
          v.erase(0, v.find_first_not_of(" \t"));
          v.erase(v.find_last_not_of(" \t") + 1);
          if (!v.empty()) values.push_back(v);
        }
        model.add_parameter(name, values);
      } else if (body.rfind("constraint ", 0) == 0) {
        pending_constraints.push_back({lineno, body.substr(11)});
      } else {
        throw InputError("expected 'param' or 'constraint'");
      }
    } catch (const InputError& e) {
      throw InputError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  // Constraints may reference parameters declared later in the file.
  for (const auto& [no, text_expr] : pending_constraints) {
    try {
      model.add_constraint(expr::parse(text_expr));
    } catch (const InputError& e) {
      throw InputError(origin + ":" + std::to_string(no) + ": " + e.what());
    }
  }
  return model;
}

inline std::string write_model(const CtdModel& model) {
  std::ostringstream os;
  for (const auto& p : model.parameters()) {
    os << "param " << p.name << ": ";
    for (std::size_t i = 0; i < p.values.size(); ++i)
      os << (i ? ", " : "") << p.values[i];
    os << "\n";
  }
  for (const auto& c : model.constraints())
    os << "constraint " << c.to_text() << "\n";
  return os.str();
}

}  // namespace faultline::ctd
