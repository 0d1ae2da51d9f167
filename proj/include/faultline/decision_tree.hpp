#pragma once

// Small CART-style decision trees over flattened records: top-down greedy
// induction, variance-reduction splits for numeric targets, Gini for
// categorical targets. Numeric splits send (value <= threshold) left;
// categorical splits send (value == category) left. Records missing the
// split field go right.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "faultline/errors.hpp"

namespace faultline::pdg {

// null | number | text | boolean
using Scalar = std::variant<std::monostate, double, std::string, bool>;

using FlatRecord = std::map<std::string, Scalar>;

inline bool is_null(const Scalar& s) {
  return std::holds_alternative<std::monostate>(s);
}
inline bool is_number(const Scalar& s) {
  return std::holds_alternative<double>(s);
}

// Stable string key for categorical handling and exact-match comparison.
inline std::string category_key(const Scalar& s) {
  if (std::holds_alternative<std::monostate>(s)) return "~null";
  if (std::holds_alternative<double>(s)) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "n:%.17g", std::get<double>(s));
    return buf;
  }
  if (std::holds_alternative<bool>(s))
    return std::get<bool>(s) ? "b:true" : "b:false";
  return "s:" + std::get<std::string>(s);
}

inline bool scalar_equal(const Scalar& a, const Scalar& b) {
  return category_key(a) == category_key(b);
}

struct TreeConfig {
  int max_depth = 8;
  long min_samples_leaf = 5;
};

// One atom of a root-to-leaf path.
struct PathAtom {
  enum class Kind { NumericLe, NumericGt, CategoricalEq, CategoricalNe };
  Kind kind;
  std::string field;
  double threshold = 0.0;   // numeric kinds
  std::string category;     // categorical kinds (a category_key)
};

class DecisionTree {
 public:
  struct Node {
    bool leaf = true;
    // split (internal nodes)
    std::string field;
    bool numeric = false;
    double threshold = 0.0;
    std::string category;  // category_key form
    int left = -1;
    int right = -1;
    // payload (leaves)
    Scalar prediction;
    long samples = 0;
  };

  const std::vector<Node>& nodes() const { return nodes_; }
  int root() const { return 0; }
  bool empty() const { return nodes_.empty(); }

  // Deserialization entry point. Children must sit strictly after their
  // parent (true of every tree this builder grows), which rules out cycles
  // in corrupt model files.
  static DecisionTree from_nodes(std::vector<Node> nodes) {
    const int n = static_cast<int>(nodes.size());
    if (n == 0) throw InputError("decision tree has no nodes");
    for (int i = 0; i < n; ++i) {
      if (nodes[i].leaf) continue;
      if (nodes[i].left <= i || nodes[i].left >= n || nodes[i].right <= i ||
          nodes[i].right >= n)
        throw InputError("decision tree node " + std::to_string(i) +
                         " has invalid children");
    }
    DecisionTree t;
    t.nodes_ = std::move(nodes);
    return t;
  }

  int predict_leaf(const FlatRecord& record) const {
    if (nodes_.empty()) throw InputError("empty decision tree");
    int cur = 0;
    while (!nodes_[cur].leaf) {
      const auto& n = nodes_[cur];
      auto it = record.find(n.field);
      bool go_left = false;
      if (it != record.end() && !is_null(it->second)) {
        if (n.numeric)
          go_left = is_number(it->second) &&
                    std::get<double>(it->second) <= n.threshold;
        else
          go_left = category_key(it->second) == n.category;
      }
      cur = go_left ? n.left : n.right;
    }
    return cur;
  }

  const Scalar& predict(const FlatRecord& record) const {
    return nodes_[predict_leaf(record)].prediction;
  }

  std::vector<int> leaves() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (nodes_[i].leaf) out.push_back(static_cast<int>(i));
    return out;
  }

  // Conjunction of atoms along the root-to-leaf path.
  std::vector<PathAtom> path_atoms(int leaf) const {
    std::vector<PathAtom> atoms;
    // parents are unique; walk down from the root tracking the branch taken
    std::vector<int> path;
    if (!find_path(0, leaf, path))
      throw InputError("leaf " + std::to_string(leaf) + " not in tree");
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      const auto& n = nodes_[path[i]];
      const bool went_left = n.left == path[i + 1];
      PathAtom atom;
      atom.field = n.field;
      if (n.numeric) {
        atom.kind = went_left ? PathAtom::Kind::NumericLe
                              : PathAtom::Kind::NumericGt;
        atom.threshold = n.threshold;
      } else {
        atom.kind = went_left ? PathAtom::Kind::CategoricalEq
                              : PathAtom::Kind::CategoricalNe;
        atom.category = n.category;
      }
      atoms.push_back(std::move(atom));
    }
    return atoms;
  }

  // Induction entry point. `targets` parallels `records`; numeric targets get
  // variance splits and mean-valued leaves, categorical targets Gini splits
  // and majority leaves.
  static DecisionTree build(const std::vector<const FlatRecord*>& records,
                            const std::vector<Scalar>& targets,
                            const TreeConfig& cfg) {
    if (records.empty() || records.size() != targets.size())
      throw InputError("decision tree needs aligned records and targets");
    bool numeric_target = true;
    for (const auto& t : targets)
      if (!is_number(t)) {
        numeric_target = false;
        break;
      }
    DecisionTree tree;
    std::vector<int> idx(records.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    tree.grow(records, targets, numeric_target, idx, 0, cfg);
    return tree;
  }

 private:
  bool find_path(int cur, int leaf, std::vector<int>& path) const {
    path.push_back(cur);
    if (cur == leaf) return true;
    if (!nodes_[cur].leaf) {
      if (find_path(nodes_[cur].left, leaf, path)) return true;
      if (find_path(nodes_[cur].right, leaf, path)) return true;
    }
    path.pop_back();
    return false;
  }

  static double impurity_numeric(const std::vector<Scalar>& targets,
                                 const std::vector<int>& idx) {
    double mean = 0;
    for (int i : idx) mean += std::get<double>(targets[i]);
    mean /= static_cast<double>(idx.size());
    double ss = 0;
    for (int i : idx) {
      const double d = std::get<double>(targets[i]) - mean;
      ss += d * d;
    }
    return ss;  // total squared deviation, weighting comes for free
  }

  static double impurity_gini(const std::vector<Scalar>& targets,
                              const std::vector<int>& idx) {
    std::map<std::string, long> counts;
    for (int i : idx) counts[category_key(targets[i])] += 1;
    double gini = 1.0;
    const double n = static_cast<double>(idx.size());
    for (const auto& [k, c] : counts) {
      const double p = static_cast<double>(c) / n;
      gini -= p * p;
    }
    return gini * n;  // scaled so left+right compares against the parent
  }

  static double impurity(const std::vector<Scalar>& targets,
                         const std::vector<int>& idx, bool numeric_target) {
    return numeric_target ? impurity_numeric(targets, idx)
                          : impurity_gini(targets, idx);
  }

  static Scalar leaf_prediction(const std::vector<Scalar>& targets,
                                const std::vector<int>& idx,
                                bool numeric_target) {
    if (numeric_target) {
      double mean = 0;
      for (int i : idx) mean += std::get<double>(targets[i]);
      return Scalar{mean / static_cast<double>(idx.size())};
    }
    std::map<std::string, std::pair<long, int>> counts;  // key -> (count, first)
    for (int i : idx) {
      auto [it, fresh] = counts.try_emplace(category_key(targets[i]), 0, i);
      it->second.first += 1;
    }
    long best = -1;
    int rep = idx[0];
    for (const auto& [k, v] : counts)
      if (v.first > best) {
        best = v.first;
        rep = v.second;
      }
    return targets[rep];
  }

  int grow(const std::vector<const FlatRecord*>& records,
           const std::vector<Scalar>& targets, bool numeric_target,
           const std::vector<int>& idx, int depth, const TreeConfig& cfg) {
    const int node_id = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    nodes_[node_id].samples = static_cast<long>(idx.size());
    nodes_[node_id].prediction = leaf_prediction(targets, idx, numeric_target);

    const double parent_impurity = impurity(targets, idx, numeric_target);
    if (depth >= cfg.max_depth ||
        static_cast<long>(idx.size()) < 2 * cfg.min_samples_leaf ||
        parent_impurity <= 1e-12)
      return node_id;

    // candidate fields: everything observed in this node's records
    std::set<std::string> fields;
    for (int i : idx)
      for (const auto& [f, v] : *records[i])
        if (!is_null(v)) fields.insert(f);

    double best_gain = 1e-12;
    std::string best_field;
    bool best_numeric = false;
    double best_threshold = 0;
    std::string best_category;
    std::vector<int> best_left, best_right;

    for (const auto& field : fields) {
      bool numeric_field = true;
      for (int i : idx) {
        auto it = records[i]->find(field);
        if (it != records[i]->end() && !is_null(it->second) &&
            !is_number(it->second)) {
          numeric_field = false;
          break;
        }
      }
      if (numeric_field) {
        std::vector<double> values;
        for (int i : idx) {
          auto it = records[i]->find(field);
          if (it != records[i]->end() && is_number(it->second))
            values.push_back(std::get<double>(it->second));
        }
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        for (std::size_t v = 0; v + 1 < values.size(); ++v) {
          const double threshold = values[v] / 2 + values[v + 1] / 2;
          std::vector<int> left, right;
          for (int i : idx) {
            auto it = records[i]->find(field);
            const bool go_left = it != records[i]->end() &&
                                 is_number(it->second) &&
                                 std::get<double>(it->second) <= threshold;
            (go_left ? left : right).push_back(i);
          }
          consider_split(targets, numeric_target, parent_impurity, field,
                         true, threshold, "", left, right, cfg, best_gain,
                         best_field, best_numeric, best_threshold,
                         best_category, best_left, best_right);
        }
      } else {
        std::set<std::string> categories;
        for (int i : idx) {
          auto it = records[i]->find(field);
          if (it != records[i]->end() && !is_null(it->second))
            categories.insert(category_key(it->second));
        }
        for (const auto& cat : categories) {
          std::vector<int> left, right;
          for (int i : idx) {
            auto it = records[i]->find(field);
            const bool go_left = it != records[i]->end() &&
                                 category_key(it->second) == cat;
            (go_left ? left : right).push_back(i);
          }
          consider_split(targets, numeric_target, parent_impurity, field,
                         false, 0.0, cat, left, right, cfg, best_gain,
                         best_field, best_numeric, best_threshold,
                         best_category, best_left, best_right);
        }
      }
    }

    if (best_field.empty()) return node_id;  // no admissible split

    nodes_[node_id].leaf = false;
    nodes_[node_id].field = best_field;
    nodes_[node_id].numeric = best_numeric;
    nodes_[node_id].threshold = best_threshold;
    nodes_[node_id].category = best_category;
    const int left =
        grow(records, targets, numeric_target, best_left, depth + 1, cfg);
    const int right =
        grow(records, targets, numeric_target, best_right, depth + 1, cfg);
    nodes_[node_id].left = left;
    nodes_[node_id].right = right;
    return node_id;
  }

  static void consider_split(
      const std::vector<Scalar>& targets, bool numeric_target,
      double parent_impurity, const std::string& field, bool numeric,
      double threshold, const std::string& category,
      const std::vector<int>& left, const std::vector<int>& right,
      const TreeConfig& cfg, double& best_gain, std::string& best_field,
      bool& best_numeric, double& best_threshold, std::string& best_category,
      std::vector<int>& best_left, std::vector<int>& best_right) {
    if (static_cast<long>(left.size()) < cfg.min_samples_leaf ||
        static_cast<long>(right.size()) < cfg.min_samples_leaf)
      return;
    const double gain = parent_impurity -
                        impurity(targets, left, numeric_target) -
                        impurity(targets, right, numeric_target);
    if (gain > best_gain) {
      best_gain = gain;
      best_field = field;
      best_numeric = numeric;
      best_threshold = threshold;
      best_category = category;
      best_left = left;
      best_right = right;
    }
  }

  std::vector<Node> nodes_;
};

}  // namespace faultline::pdg
