#pragma once

// Per-endpoint API dependency models built from production request/response/
// trace data: trace buckets keyed by acyclic call paths, one regression tree
// per response field per bucket, one bucket-classification tree, and field
// statistics. Compare maps a test suite onto the model and lists unvisited
// tree paths; generate solves the path constraints by interval reduction and
// emits privacy-preserving inputs.

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "faultline/callgraph.hpp"
#include "faultline/decision_tree.hpp"
#include "faultline/errors.hpp"
#include "faultline/rng.hpp"

namespace faultline::pdg {

using graph::ApiId;

// ---------------------------------------------------------------------------
// Flattening

struct FlattenOptions {
  int array_cap = 16;  // list indices beyond this are dropped and counted
  int depth_cap = 16;
};

struct FlattenResult {
  FlatRecord record;
  long truncated = 0;  // values lost to the array or depth cap
};

namespace detail {

inline void flatten_into(const nlohmann::json& doc, const std::string& prefix,
                         int depth, const FlattenOptions& opt,
                         FlattenResult& out) {
  if (depth > opt.depth_cap) {
    ++out.truncated;
    return;
  }
  if (doc.is_object()) {
    for (const auto& [key, value] : doc.items())
      flatten_into(value, prefix.empty() ? key : prefix + "." + key, depth + 1,
                   opt, out);
  } else if (doc.is_array()) {
    for (std::size_t i = 0; i < doc.size(); ++i) {
      if (static_cast<int>(i) >= opt.array_cap) {
        out.truncated += static_cast<long>(doc.size() - i);
        break;
      }
      flatten_into(doc[i],
                   prefix.empty() ? std::to_string(i)
                                  : prefix + "." + std::to_string(i),
                   depth + 1, opt, out);
    }
  } else if (doc.is_boolean()) {
    out.record[prefix] = doc.get<bool>();
  } else if (doc.is_number()) {
    out.record[prefix] = doc.get<double>();
  } else if (doc.is_string()) {
    out.record[prefix] = doc.get<std::string>();
  } else {  // null
    out.record[prefix] = Scalar{};
  }
}

}  // namespace detail

// Leaf scalars keyed by dotted paths; a scalar at the root flattens to the
// empty key.
inline FlattenResult flatten(const nlohmann::json& doc,
                             const FlattenOptions& opt = {}) {
  FlattenResult out;
  detail::flatten_into(doc, "", 0, opt, out);
  return out;
}

// ---------------------------------------------------------------------------
// Model

struct PdgRecord {
  FlatRecord request;
  FlatRecord response;
  std::optional<std::vector<ApiId>> trace;
};

// Repeated ApiIds collapse to their first occurrence, preserving call order
// among distinct services. Idempotent.
inline std::vector<ApiId> decycle(const std::vector<ApiId>& trace) {
  std::vector<ApiId> out;
  std::set<ApiId> seen;
  for (const auto& id : trace)
    if (seen.insert(id).second) out.push_back(id);
  return out;
}

inline std::string bucket_id_of(const std::optional<std::vector<ApiId>>& trace) {
  if (!trace) return "*";  // trace-agnostic bucket
  std::string id;
  for (const auto& api : decycle(*trace)) {
    if (!id.empty()) id += ">";
    id += api.label;
  }
  return id;  // "" is the empty-path bucket
}

struct NumericStats {
  double min = 0, max = 0, mean = 0;
  double q25 = 0, q50 = 0, q75 = 0;
  long count = 0;
};

struct FieldStats {
  std::map<std::string, NumericStats> numeric;
  std::map<std::string, std::set<std::string>> categorical;  // category keys
  // field pairs observed equal in >= association_min_support of records
  std::vector<std::pair<std::string, std::string>> associations;
};

struct PdgConfig {
  TreeConfig tree;
  double regression_threshold = 0.10;  // relative error on numeric responses
  double association_min_support = 0.95;
  FlattenOptions flatten;
  std::set<std::string> sensitive_fields;  // privacy: never emit raw values
};

struct BucketModel {
  std::string id;
  std::vector<ApiId> path;
  long members = 0;
  std::map<std::string, DecisionTree> regression;  // per response field
};

struct PdgModel {
  std::vector<BucketModel> buckets;  // ordered by id
  DecisionTree classifier;           // request -> bucket id
  FieldStats stats;
  PdgConfig config;
  // raw production values per request field, kept for the privacy guard
  std::map<std::string, std::set<double>> production_values;

  const BucketModel* bucket(const std::string& id) const {
    for (const auto& b : buckets)
      if (b.id == id) return &b;
    return nullptr;
  }
};

namespace detail {

inline double quantile(std::vector<double> sorted, double q) {
  if (sorted.empty()) return 0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1 - frac) + sorted[hi] * frac;
}

inline FieldStats compute_stats(const std::vector<PdgRecord>& records,
                                double min_support) {
  FieldStats stats;
  std::map<std::string, std::vector<double>> numeric_values;
  for (const auto& rec : records) {
    for (const auto& [f, v] : rec.request) {
      if (is_number(v))
        numeric_values[f].push_back(std::get<double>(v));
      else if (!is_null(v))
        stats.categorical[f].insert(category_key(v));
    }
  }
  for (auto& [f, values] : numeric_values) {
    std::sort(values.begin(), values.end());
    NumericStats ns;
    ns.count = static_cast<long>(values.size());
    ns.min = values.front();
    ns.max = values.back();
    double sum = 0;
    for (double v : values) sum += v;
    ns.mean = sum / static_cast<double>(values.size());
    ns.q25 = quantile(values, 0.25);
    ns.q50 = quantile(values, 0.50);
    ns.q75 = quantile(values, 0.75);
    stats.numeric[f] = ns;
  }
  // association mining: request fields pairwise equal in >= min_support
  std::set<std::string> fields;
  for (const auto& rec : records)
    for (const auto& [f, v] : rec.request) fields.insert(f);
  std::vector<std::string> field_list(fields.begin(), fields.end());
  for (std::size_t a = 0; a < field_list.size(); ++a) {
    for (std::size_t b = a + 1; b < field_list.size(); ++b) {
      long equal = 0;
      for (const auto& rec : records) {
        auto ia = rec.request.find(field_list[a]);
        auto ib = rec.request.find(field_list[b]);
        if (ia != rec.request.end() && ib != rec.request.end() &&
            scalar_equal(ia->second, ib->second))
          ++equal;
      }
      if (static_cast<double>(equal) >=
          min_support * static_cast<double>(records.size()))
        stats.associations.push_back({field_list[a], field_list[b]});
    }
  }
  return stats;
}

}  // namespace detail

// n buckets yield n+1 models: one regression model (a tree per response
// field) per bucket plus one classification tree over bucket ids.
inline PdgModel build(const std::vector<PdgRecord>& records,
                      const PdgConfig& config = {}) {
  if (records.empty()) throw InputError("pdg build: no records");
  PdgModel model;
  model.config = config;

  std::map<std::string, std::vector<int>> by_bucket;
  for (std::size_t i = 0; i < records.size(); ++i)
    by_bucket[bucket_id_of(records[i].trace)].push_back(static_cast<int>(i));

  for (const auto& [id, members] : by_bucket) {
    BucketModel bm;
    bm.id = id;
    if (records[members[0]].trace)
      bm.path = decycle(*records[members[0]].trace);
    bm.members = static_cast<long>(members.size());

    std::set<std::string> response_fields;
    for (int i : members)
      for (const auto& [f, v] : records[i].response) response_fields.insert(f);
    for (const auto& field : response_fields) {
      std::vector<const FlatRecord*> xs;
      std::vector<Scalar> ys;
      for (int i : members) {
        auto it = records[i].response.find(field);
        if (it == records[i].response.end()) continue;
        xs.push_back(&records[i].request);
        ys.push_back(it->second);
      }
      if (!xs.empty())
        bm.regression.emplace(field, DecisionTree::build(xs, ys, config.tree));
    }
    model.buckets.push_back(std::move(bm));
  }

  {
    std::vector<const FlatRecord*> xs;
    std::vector<Scalar> ys;
    for (const auto& rec : records) {
      xs.push_back(&rec.request);
      ys.push_back(Scalar{bucket_id_of(rec.trace)});
    }
    model.classifier = DecisionTree::build(xs, ys, config.tree);
  }

  model.stats =
      detail::compute_stats(records, config.association_min_support);
  for (const auto& rec : records)
    for (const auto& [f, v] : rec.request)
      if (is_number(v)) model.production_values[f].insert(std::get<double>(v));
  return model;
}

// ---------------------------------------------------------------------------
// Compare

enum class AnomalyReason { UnknownTrace, ClassificationMismatch, RegressionMismatch };

inline const char* to_string(AnomalyReason r) {
  switch (r) {
    case AnomalyReason::UnknownTrace: return "unknownTrace";
    case AnomalyReason::ClassificationMismatch: return "classificationMismatch";
    case AnomalyReason::RegressionMismatch: return "regressionMismatch";
  }
  return "?";
}

// A tree path is identified by the owning tree and a leaf node index.
struct PathRef {
  std::string tree;  // "classifier" or "<bucket>/<response field>"
  int leaf = 0;
  auto operator<=>(const PathRef&) const = default;
};

struct TestComparison {
  int index = 0;
  bool anomalous = false;
  AnomalyReason reason = AnomalyReason::UnknownTrace;
  std::string detail;
  std::string bucket_id;
  std::vector<PathRef> visited;
};

struct UnvisitedPath {
  PathRef ref;
  std::vector<PathAtom> atoms;
};

struct ComparisonReport {
  std::vector<TestComparison> tests;
  std::vector<UnvisitedPath> unvisited;
  long anomalies = 0;
};

inline const DecisionTree* find_tree(const PdgModel& model,
                                     const PathRef& ref) {
  if (ref.tree == "classifier") return &model.classifier;
  const auto slash = ref.tree.find('/');
  if (slash == std::string::npos) return nullptr;
  const auto* bucket = model.bucket(ref.tree.substr(0, slash));
  if (!bucket) return nullptr;
  auto it = bucket->regression.find(ref.tree.substr(slash + 1));
  return it == bucket->regression.end() ? nullptr : &it->second;
}

inline ComparisonReport compare(const PdgModel& model,
                                const std::vector<PdgRecord>& tests,
                                double error_threshold) {
  ComparisonReport report;
  std::set<PathRef> visited;

  for (std::size_t t = 0; t < tests.size(); ++t) {
    TestComparison tc;
    tc.index = static_cast<int>(t);
    tc.bucket_id = bucket_id_of(tests[t].trace);

    const BucketModel* bucket = model.bucket(tc.bucket_id);
    if (!bucket) {
      tc.anomalous = true;
      tc.reason = AnomalyReason::UnknownTrace;
      tc.detail = "trace bucket '" + tc.bucket_id + "' unknown";
      report.tests.push_back(std::move(tc));
      ++report.anomalies;
      continue;
    }

    const int cls_leaf = model.classifier.predict_leaf(tests[t].request);
    const Scalar& predicted = model.classifier.nodes()[cls_leaf].prediction;
    if (category_key(predicted) != category_key(Scalar{tc.bucket_id})) {
      tc.anomalous = true;
      tc.reason = AnomalyReason::ClassificationMismatch;
      tc.detail = "classifier chose '" + category_key(predicted) + "'";
      report.tests.push_back(std::move(tc));
      ++report.anomalies;
      continue;
    }
    tc.visited.push_back({"classifier", cls_leaf});

    bool regression_ok = true;
    for (const auto& [field, tree] : bucket->regression) {
      const int leaf = tree.predict_leaf(tests[t].request);
      const Scalar& pred = tree.nodes()[leaf].prediction;
      auto it = tests[t].response.find(field);
      if (it == tests[t].response.end()) {
        regression_ok = false;
        tc.detail = "response field '" + field + "' missing";
        break;
      }
      if (is_number(pred) && is_number(it->second)) {
        const double expected = std::get<double>(pred);
        const double actual = std::get<double>(it->second);
        const double rel = std::abs(expected - actual) /
                           std::max(std::abs(actual), 1e-9);
        if (rel > error_threshold) {
          regression_ok = false;
          tc.detail = "field '" + field + "' off by " + std::to_string(rel);
          break;
        }
      } else if (!scalar_equal(pred, it->second)) {
        regression_ok = false;
        tc.detail = "field '" + field + "' mismatch";
        break;
      }
      tc.visited.push_back({bucket->id + "/" + field, leaf});
    }
    if (!regression_ok) {
      tc.anomalous = true;
      tc.reason = AnomalyReason::RegressionMismatch;
      tc.visited.clear();
      report.tests.push_back(std::move(tc));
      ++report.anomalies;
      continue;
    }
    for (const auto& ref : tc.visited) visited.insert(ref);
    report.tests.push_back(std::move(tc));
  }

  // every tree path never visited by a non-anomalous test
  auto collect = [&](const std::string& name, const DecisionTree& tree) {
    for (int leaf : tree.leaves()) {
      PathRef ref{name, leaf};
      if (!visited.count(ref))
        report.unvisited.push_back({ref, tree.path_atoms(leaf)});
    }
  };
  collect("classifier", model.classifier);
  for (const auto& bucket : model.buckets)
    for (const auto& [field, tree] : bucket.regression)
      collect(bucket.id + "/" + field, tree);
  return report;
}

// ---------------------------------------------------------------------------
// Generate

struct GeneratedInput {
  PathRef ref;
  FlatRecord request;
};

struct InfeasiblePath {
  PathRef ref;
  std::string reason;
};

struct GenerationResult {
  std::vector<GeneratedInput> inputs;
  std::vector<InfeasiblePath> infeasible;
};

namespace detail {

struct FieldDomain {
  bool numeric = false;
  double lo = -1e18, hi = 1e18;  // closed interval
  std::set<std::string> allowed;   // categorical candidates (category keys)
  std::set<std::string> excluded;  // categorical != atoms
  bool constrained = false;
};

inline Scalar from_category_key(const std::string& key) {
  if (key == "~null") return Scalar{};
  if (key == "b:true") return Scalar{true};
  if (key == "b:false") return Scalar{false};
  if (key.rfind("n:", 0) == 0) return Scalar{std::stod(key.substr(2))};
  if (key.rfind("s:", 0) == 0) return Scalar{key.substr(2)};
  return Scalar{key};
}

inline double next_up(double v) {
  return std::nextafter(v, std::numeric_limits<double>::infinity());
}

// Uniform draw from [lo, hi] that avoids the given forbidden values whenever
// the interval contains more than one representable double.
inline std::optional<double> pick_numeric(double lo, double hi, SplitRng& rng,
                                          const std::set<double>* avoid) {
  if (lo > hi) return std::nullopt;
  if (lo == hi) return lo;  // single representable value: privacy waived
  if (avoid) {
    for (int tries = 0; tries < 64; ++tries) {
      const double v = lo + (hi - lo) * rng.next_unit();
      if (v >= lo && v <= hi && !avoid->count(v)) return v;
    }
    // deterministic fallback: probe midpoints between forbidden values
    std::vector<double> walls{lo, hi};
    for (double w : *avoid)
      if (w >= lo && w <= hi) walls.push_back(w);
    std::sort(walls.begin(), walls.end());
    for (std::size_t i = 0; i + 1 < walls.size(); ++i) {
      const double mid = walls[i] / 2 + walls[i + 1] / 2;
      if (mid >= lo && mid <= hi && !avoid->count(mid)) return mid;
    }
    const double bumped = next_up(lo);
    if (bumped <= hi && !avoid->count(bumped)) return bumped;
    return std::nullopt;
  }
  return lo + (hi - lo) * rng.next_unit();
}

}  // namespace detail

// Solve each unvisited path's constraints (tree atoms, field-statistics
// bounds, association equalities) by interval reduction and sample a request
// inside the feasible region. Values on sensitive fields never equal raw
// production values when the region admits a choice.
inline GenerationResult generate(const PdgModel& model,
                                 const std::vector<UnvisitedPath>& paths,
                                 std::uint64_t seed) {
  GenerationResult result;
  SplitRng root(seed);

  for (std::size_t p = 0; p < paths.size(); ++p) {
    SplitRng rng = root.split(p);
    const auto& path = paths[p];

    // union-find over associated fields so equals stay equal
    std::map<std::string, std::string> parent;
    std::function<std::string(const std::string&)> find =
        [&](const std::string& f) -> std::string {
      auto it = parent.find(f);
      if (it == parent.end() || it->second == f) return f;
      return it->second = find(it->second);
    };
    for (const auto& [a, b] : model.stats.associations) parent[find(a)] = find(b);

    std::map<std::string, detail::FieldDomain> domains;
    auto domain_of = [&](const std::string& field) -> detail::FieldDomain& {
      const std::string rep = find(field);
      auto [it, fresh] = domains.try_emplace(rep);
      if (fresh) {
        // seed from field statistics of every member of the group
        bool numeric = model.stats.numeric.count(field) > 0;
        it->second.numeric = numeric;
        if (numeric) {
          const auto& ns = model.stats.numeric.at(field);
          it->second.lo = ns.min;
          it->second.hi = ns.max;
        } else if (model.stats.categorical.count(field)) {
          it->second.allowed = model.stats.categorical.at(field);
        }
      }
      return it->second;
    };

    bool infeasible = false;
    std::string reason;
    for (const auto& atom : path.atoms) {
      auto& dom = domain_of(atom.field);
      dom.constrained = true;
      switch (atom.kind) {
        case PathAtom::Kind::NumericLe:
          dom.numeric = true;
          dom.hi = std::min(dom.hi, atom.threshold);
          break;
        case PathAtom::Kind::NumericGt:
          dom.numeric = true;
          dom.lo = std::max(dom.lo, detail::next_up(atom.threshold));
          break;
        case PathAtom::Kind::CategoricalEq: {
          if (!dom.allowed.empty() && !dom.allowed.count(atom.category)) {
            infeasible = true;
            reason = "field '" + atom.field + "' cannot equal " + atom.category;
          }
          dom.allowed = {atom.category};
          break;
        }
        case PathAtom::Kind::CategoricalNe:
          dom.excluded.insert(atom.category);
          break;
      }
      if (infeasible) break;
    }

    FlatRecord request;
    if (!infeasible) {
      // every known request field gets a value from its (possibly reduced)
      // domain; association group members share one choice
      std::set<std::string> all_fields;
      for (const auto& [f, ns] : model.stats.numeric) all_fields.insert(f);
      for (const auto& [f, vs] : model.stats.categorical) all_fields.insert(f);
      for (const auto& atom : path.atoms) all_fields.insert(atom.field);

      std::map<std::string, Scalar> group_choice;
      for (const auto& field : all_fields) {
        const std::string rep = find(field);
        auto chosen = group_choice.find(rep);
        if (chosen != group_choice.end()) {
          request[field] = chosen->second;
          continue;
        }
        auto& dom = domain_of(field);
        Scalar value;
        if (dom.numeric) {
          if (dom.lo > dom.hi) {
            infeasible = true;
            reason = "field '" + field + "' interval empty [" +
                     std::to_string(dom.lo) + "," + std::to_string(dom.hi) + "]";
            break;
          }
          const std::set<double>* avoid = nullptr;
          auto prod = model.production_values.find(field);
          if (model.config.sensitive_fields.count(field) &&
              prod != model.production_values.end())
            avoid = &prod->second;
          auto picked = detail::pick_numeric(dom.lo, dom.hi, rng, avoid);
          if (!picked) {
            infeasible = true;
            reason = "field '" + field + "' has no admissible value";
            break;
          }
          value = Scalar{*picked};
        } else {
          std::vector<std::string> candidates(dom.allowed.begin(),
                                              dom.allowed.end());
          std::erase_if(candidates, [&](const std::string& c) {
            return dom.excluded.count(c) > 0;
          });
          if (candidates.empty()) {
            infeasible = true;
            reason = "field '" + field + "' has no admissible category";
            break;
          }
          value = detail::from_category_key(
              candidates[rng.next_below(candidates.size())]);
        }
        group_choice[rep] = value;
        request[field] = value;
      }
    }

    if (infeasible)
      result.infeasible.push_back({path.ref, reason});
    else
      result.inputs.push_back({path.ref, std::move(request)});
  }
  return result;
}

}  // namespace faultline::pdg
