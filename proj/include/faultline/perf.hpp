#pragma once

// Performance accounting over simulation traces: per-API response-time
// samples, throughput windows, anomaly verdicts with spurious-anomaly
// filtering, and advisory load suggestions.
//
// The anomaly classifier is a replaceable policy; the default flags samples
// above median + kappa * MAD of the per-API baseline and debounces: an
// observed anomaly is real only when it persists across at least two
// consecutive samples of that API.

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "faultline/errors.hpp"
#include "faultline/mesh.hpp"

namespace faultline::perf {

using graph::ApiId;
using mesh::Tick;

struct PerfSample {
  ApiId api;
  Tick response_time_ms = 0;
  Tick timestamp = 0;  // call start, simulated clock
};

struct ThroughputWindow {
  ApiId api;
  Tick start = 0;
  Tick end = 0;  // [start, end)
  long completed = 0;
};

struct AnomalyVerdict {
  PerfSample sample;
  bool observed = false;
  bool real = false;  // real implies observed
};

struct CollectOptions {
  Tick window_ms = 1000;
};

struct Collected {
  std::vector<PerfSample> samples;  // ordered by (api, timestamp)
  std::vector<ThroughputWindow> windows;
};

// One sample per call record; windows of the configured width tile the run
// per API (calls bucketed by completion time).
inline Collected collect(const std::vector<mesh::ExecutionTrace>& traces,
                         const CollectOptions& opt = {}) {
  Collected out;
  Tick horizon = 0;
  for (const auto& trace : traces)
    for (const auto& rec : trace.records) {
      out.samples.push_back({rec.callee, rec.end - rec.start, rec.start});
      horizon = std::max(horizon, rec.end);
    }
  std::stable_sort(out.samples.begin(), out.samples.end(),
                   [](const PerfSample& a, const PerfSample& b) {
                     if (a.api != b.api) return a.api < b.api;
                     return a.timestamp < b.timestamp;
                   });
  if (out.samples.empty()) return out;

  std::map<ApiId, std::map<Tick, long>> counts;
  for (const auto& trace : traces)
    for (const auto& rec : trace.records)
      counts[rec.callee][(rec.end / opt.window_ms) * opt.window_ms] += 1;
  for (const auto& [api, buckets] : counts)
    for (Tick w = 0; w <= horizon; w += opt.window_ms) {
      auto it = buckets.find(w);
      out.windows.push_back({api, w, w + opt.window_ms,
                             it == buckets.end() ? 0 : it->second});
    }
  return out;
}

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

}  // namespace detail

// Verdicts in (api, timestamp) order. kappa scales the MAD threshold; the
// MAD floor avoids zero-spread degeneracy.
inline std::vector<AnomalyVerdict> filter_anomalies(
    const std::vector<PerfSample>& samples,
    const std::vector<PerfSample>& baseline, double kappa = 5.0,
    double mad_floor_ms = 1.0) {
  std::map<ApiId, std::vector<double>> base_by_api;
  for (const auto& s : baseline)
    base_by_api[s.api].push_back(static_cast<double>(s.response_time_ms));

  std::map<ApiId, double> cutoff;
  for (const auto& [api, values] : base_by_api) {
    const double med = detail::median(values);
    std::vector<double> deviations;
    deviations.reserve(values.size());
    for (double v : values) deviations.push_back(std::abs(v - med));
    const double mad = std::max(detail::median(deviations), mad_floor_ms);
    cutoff[api] = med + kappa * mad;
  }

  std::vector<AnomalyVerdict> verdicts;
  verdicts.reserve(samples.size());
  for (const auto& s : samples) {
    auto it = cutoff.find(s.api);
    if (it == cutoff.end())
      throw InputError("no baseline samples for api '" + s.api.label + "'");
    verdicts.push_back(
        {s, static_cast<double>(s.response_time_ms) > it->second, false});
  }
  // debounce: real anomalies persist across >= 2 consecutive samples of the
  // same API (samples arrive sorted by api, then time)
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    if (!verdicts[i].observed) continue;
    const bool prev = i > 0 && verdicts[i - 1].sample.api == verdicts[i].sample.api &&
                      verdicts[i - 1].observed;
    const bool next = i + 1 < verdicts.size() &&
                      verdicts[i + 1].sample.api == verdicts[i].sample.api &&
                      verdicts[i + 1].observed;
    verdicts[i].real = prev || next;
  }
  return verdicts;
}

// Replaceable anomaly policy; a learned model is a drop-in behind this
// interface.
class AnomalyClassifier {
 public:
  virtual ~AnomalyClassifier() = default;
  virtual std::vector<AnomalyVerdict> classify(
      const std::vector<PerfSample>& samples,
      const std::vector<PerfSample>& baseline) const = 0;
};

class MadDebounceClassifier final : public AnomalyClassifier {
 public:
  explicit MadDebounceClassifier(double kappa = 5.0, double mad_floor_ms = 1.0)
      : kappa_(kappa), mad_floor_ms_(mad_floor_ms) {}

  std::vector<AnomalyVerdict> classify(
      const std::vector<PerfSample>& samples,
      const std::vector<PerfSample>& baseline) const override {
    return filter_anomalies(samples, baseline, kappa_, mad_floor_ms_);
  }

 private:
  double kappa_;
  double mad_floor_ms_;
};

struct AnomalyTotals {
  std::map<ApiId, long> per_api;  // M_i, real anomalies only
  long total = 0;
};

inline AnomalyTotals total_anomalies(const std::vector<AnomalyVerdict>& verdicts) {
  AnomalyTotals totals;
  for (const auto& v : verdicts)
    if (v.real) {
      totals.per_api[v.sample.api] += 1;
      totals.total += 1;
    }
  return totals;
}

struct LatencyQuantiles {
  double q50 = 0, q90 = 0, q99 = 0;
  long samples = 0;
};

inline std::map<ApiId, LatencyQuantiles> latency_quantiles(
    const std::vector<PerfSample>& samples) {
  std::map<ApiId, std::vector<double>> by_api;
  for (const auto& s : samples)
    by_api[s.api].push_back(static_cast<double>(s.response_time_ms));
  std::map<ApiId, LatencyQuantiles> out;
  for (auto& [api, values] : by_api) {
    std::sort(values.begin(), values.end());
    auto at = [&](double q) {
      const double pos = q * static_cast<double>(values.size() - 1);
      const std::size_t lo = static_cast<std::size_t>(pos);
      const std::size_t hi = std::min(lo + 1, values.size() - 1);
      const double frac = pos - static_cast<double>(lo);
      return values[lo] * (1 - frac) + values[hi] * frac;
    };
    out[api] = {at(0.50), at(0.90), at(0.99),
                static_cast<long>(values.size())};
  }
  return out;
}

struct LoadSuggestion {
  ApiId api;
  int current = 1;
  int suggested = 1;
  std::string reason;
};

// Advisory only; the orchestrator applies changes solely on explicit
// confirmation. Headroom probing doubles load where no real anomaly showed.
inline std::vector<LoadSuggestion> suggest_load(
    const std::map<ApiId, int>& profile,
    const std::vector<AnomalyVerdict>& verdicts) {
  const auto totals = total_anomalies(verdicts);
  std::vector<LoadSuggestion> out;
  for (const auto& [api, current] : profile) {
    auto it = totals.per_api.find(api);
    const long anomalies = it == totals.per_api.end() ? 0 : it->second;
    if (anomalies == 0)
      out.push_back({api, current, current * 2, "no real anomalies, probe headroom"});
    else
      out.push_back({api, current, current,
                     std::to_string(anomalies) + " real anomalies, hold"});
  }
  return out;
}

}  // namespace faultline::perf
