#pragma once

// Sequential drift detection over API call streams.
//
// A baseline model is fit once (Dirichlet-smoothed counts); its point
// estimate is frozen as the prior. A monitor then folds in live observations,
// maintains the posterior point estimate, and recomputes the plug-in Bayes
// factor over everything seen so far:
//
//   log BF = l(data; posterior mean) - l(data; frozen prior mean)
//
// Two likelihoods are supported: a naive multinomial over API frequencies,
// and a Markov model whose transition-matrix rows are separate Dirichlets.
// The first symbol of a Markov stream carries no likelihood term. Crossing
// the threshold latches the Drift decision for the rest of the run.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "faultline/callgraph.hpp"
#include "faultline/errors.hpp"

namespace faultline::drift {

using graph::ApiId;

enum class ModelKind { Multinomial, Markov };

inline ModelKind model_kind_from_string(const std::string& s) {
  if (s == "multinomial") return ModelKind::Multinomial;
  if (s == "markov") return ModelKind::Markov;
  throw InputError("unknown drift model '" + s + "' (multinomial|markov)");
}

// Fixed API universe; k comes from the application spec so unseen APIs keep
// positive smoothed mass.
class SymbolTable {
 public:
  explicit SymbolTable(std::vector<ApiId> ids) : ids_(std::move(ids)) {
    if (ids_.empty()) throw InputError("symbol table must be non-empty");
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      if (!index_.emplace(ids_[i], static_cast<int>(i)).second)
        throw InputError("duplicate api '" + ids_[i].label + "'");
    }
  }

  int size() const { return static_cast<int>(ids_.size()); }
  const ApiId& at(int i) const { return ids_[i]; }

  int index_of(const ApiId& id) const {
    auto it = index_.find(id);
    if (it == index_.end())
      throw InputError("unknown api '" + id.label + "' in call stream");
    return it->second;
  }

  std::vector<int> encode(const std::vector<ApiId>& calls) const {
    std::vector<int> out;
    out.reserve(calls.size());
    for (const auto& id : calls) out.push_back(index_of(id));
    return out;
  }

 private:
  std::vector<ApiId> ids_;
  std::map<ApiId, int> index_;
};

struct CallSequence {
  std::vector<ApiId> calls;
};

// Per-API Dirichlet counts (smoothed tallies).
struct FrequencyModel {
  std::vector<double> counts;

  std::vector<double> point_estimate() const {  // posterior mean
    double total = 0;
    for (double c : counts) total += c;
    std::vector<double> theta(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) theta[i] = counts[i] / total;
    return theta;
  }
};

// k x k transition counts; each row is a separate Dirichlet.
struct MarkovModel {
  std::vector<std::vector<double>> counts;

  std::vector<std::vector<double>> point_estimate() const {
    std::vector<std::vector<double>> t(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
      double row_total = 0;
      for (double c : counts[i]) row_total += c;
      t[i].resize(counts[i].size());
      for (std::size_t j = 0; j < counts[i].size(); ++j)
        t[i][j] = counts[i][j] / row_total;
    }
    return t;
  }

  double row_concentration(int i) const {  // total Dirichlet mass of row i
    double total = 0;
    for (double c : counts[i]) total += c;
    return total;
  }
};

inline FrequencyModel fit_frequency(const std::vector<CallSequence>& sequences,
                                    const SymbolTable& table, double alpha) {
  if (alpha <= 0) throw InputError("smoothing alpha must be positive");
  FrequencyModel m;
  m.counts.assign(table.size(), alpha);
  long total = 0;
  for (const auto& seq : sequences)
    for (const auto& id : seq.calls) {
      m.counts[table.index_of(id)] += 1.0;
      ++total;
    }
  if (total == 0) throw InputError("baseline is empty");
  return m;
}

inline MarkovModel fit_markov(const std::vector<CallSequence>& sequences,
                              const SymbolTable& table, double alpha) {
  if (alpha <= 0) throw InputError("smoothing alpha must be positive");
  MarkovModel m;
  m.counts.assign(table.size(), std::vector<double>(table.size(), alpha));
  long total = 0;
  for (const auto& seq : sequences) {
    const auto idx = table.encode(seq.calls);
    for (std::size_t t = 1; t < idx.size(); ++t) {
      m.counts[idx[t - 1]][idx[t]] += 1.0;
      ++total;
    }
    total += !idx.empty();  // symbols observed, even without transitions
  }
  if (total == 0) throw InputError("baseline is empty");
  return m;
}

inline double log_of_probability(double p) {
  if (p <= 0.0)
    throw InputError("zero-probability symbol under an unsmoothed estimate");
  return std::log(p);
}

inline double log_likelihood(const std::vector<double>& theta,
                             const std::vector<int>& sequence) {
  double ll = 0;
  for (int s : sequence) {
    if (s < 0 || s >= static_cast<int>(theta.size()))
      throw InputError("symbol index out of range");
    ll += log_of_probability(theta[s]);
  }
  return ll;
}

inline double log_likelihood(const std::vector<std::vector<double>>& transition,
                             const std::vector<int>& sequence) {
  double ll = 0;
  for (std::size_t t = 1; t < sequence.size(); ++t)
    ll += log_of_probability(transition[sequence[t - 1]][sequence[t]]);
  return ll;
}

enum class Decision { NoDrift, Drift };

inline const char* to_string(Decision d) {
  return d == Decision::Drift ? "drift" : "no-drift";
}

// Single-consumer sequential monitor. Multiple monitors run independently.
class BfMonitor {
 public:
  BfMonitor(ModelKind kind, const SymbolTable& table, FrequencyModel prior,
            double threshold)
      : kind_(kind), table_(table), threshold_(threshold) {
    if (kind != ModelKind::Multinomial)
      throw InputError("frequency prior requires the multinomial kind");
    freq_prior_theta_ = prior.point_estimate();
    freq_posterior_ = std::move(prior);
    freq_tallies_.assign(table.size(), 0);
  }

  BfMonitor(ModelKind kind, const SymbolTable& table, MarkovModel prior,
            double threshold)
      : kind_(kind), table_(table), threshold_(threshold) {
    if (kind != ModelKind::Markov)
      throw InputError("markov prior requires the markov kind");
    markov_prior_t_ = prior.point_estimate();
    markov_posterior_ = std::move(prior);
    markov_tallies_.assign(table.size(), std::vector<long>(table.size(), 0));
  }

  static BfMonitor from_baseline(ModelKind kind, const SymbolTable& table,
                                 const std::vector<CallSequence>& baseline,
                                 double alpha, double threshold) {
    if (kind == ModelKind::Multinomial)
      return BfMonitor(kind, table, fit_frequency(baseline, table, alpha),
                       threshold);
    return BfMonitor(kind, table, fit_markov(baseline, table, alpha),
                     threshold);
  }

  // Fold in a batch and recompute the Bayes factor over all accumulated
  // observations. Batches of a Markov stream bridge: the transition from the
  // previous batch's last symbol to this batch's first is counted.
  void observe(const std::vector<ApiId>& batch) {
    if (batch.empty()) throw InputError("observe: empty batch");
    const auto idx = table_.encode(batch);
    if (kind_ == ModelKind::Multinomial) {
      for (int s : idx) {
        freq_posterior_.counts[s] += 1.0;
        freq_tallies_[s] += 1;
      }
      const auto post = freq_posterior_.point_estimate();
      log_bf_ = 0;
      for (int s = 0; s < table_.size(); ++s)
        if (freq_tallies_[s] > 0)
          log_bf_ += freq_tallies_[s] *
                     (std::log(post[s]) - std::log(freq_prior_theta_[s]));
    } else {
      for (int s : idx) {
        if (last_symbol_ >= 0) {
          markov_posterior_.counts[last_symbol_][s] += 1.0;
          markov_tallies_[last_symbol_][s] += 1;
        }
        last_symbol_ = s;
      }
      const auto post = markov_posterior_.point_estimate();
      log_bf_ = 0;
      for (int i = 0; i < table_.size(); ++i)
        for (int j = 0; j < table_.size(); ++j)
          if (markov_tallies_[i][j] > 0)
            log_bf_ += markov_tallies_[i][j] *
                       (std::log(post[i][j]) - std::log(markov_prior_t_[i][j]));
    }
    observations_ += static_cast<long>(batch.size());
    if (bayes_factor() >= threshold_) latched_ = true;
  }

  double log_bayes_factor() const { return log_bf_; }
  double bayes_factor() const { return std::exp(log_bf_); }
  long observations() const { return observations_; }
  double threshold() const { return threshold_; }

  Decision decide() const {
    return latched_ ? Decision::Drift : Decision::NoDrift;
  }

 private:
  ModelKind kind_;
  SymbolTable table_;
  double threshold_;

  std::vector<double> freq_prior_theta_;
  FrequencyModel freq_posterior_{};
  std::vector<long> freq_tallies_;

  std::vector<std::vector<double>> markov_prior_t_;
  MarkovModel markov_posterior_{};
  std::vector<std::vector<long>> markov_tallies_;
  int last_symbol_ = -1;

  double log_bf_ = 0.0;  // BF = 1 before any observation
  long observations_ = 0;
  bool latched_ = false;
};

}  // namespace faultline::drift
