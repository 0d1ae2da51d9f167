#pragma once

// Circuit-breaker proxy state machine, one per protected endpoint.
//
// Closed counts consecutive failures and opens at the threshold. An open
// circuit rejects calls until the sleep window elapses, then admits a single
// probe (half-open); the probe's outcome either closes the circuit or
// reopens it with a fresh window.

#include <cstdint>

#include "faultline/errors.hpp"

namespace faultline::mesh {

using Tick = std::int64_t;  // simulated milliseconds

struct CircuitBreakerConfig {
  int failure_threshold = 1;
  Tick sleep_window_ms = 1;

  void validate() const {
    if (failure_threshold < 1)
      throw InputError("breaker failure threshold must be >= 1");
    if (sleep_window_ms <= 0)
      throw InputError("breaker sleep window must be positive");
  }
};

enum class BreakerMode { Closed, Open, HalfOpen };

inline const char* to_string(BreakerMode m) {
  switch (m) {
    case BreakerMode::Closed: return "closed";
    case BreakerMode::Open: return "open";
    case BreakerMode::HalfOpen: return "half-open";
  }
  return "?";
}

struct BreakerState {
  BreakerMode mode = BreakerMode::Closed;
  int consecutive_failures = 0;
  Tick opened_at = 0;  // meaningful while not Closed
};

enum class CallClass { Success, Failure };

// One observed call outcome at time `now`. An Open state whose sleep window
// has elapsed is promoted to HalfOpen first, so the outcome is the probe's.
// An outcome reaching a still-sleeping Open state belongs to a rejected call
// and leaves the state untouched.
inline BreakerState step_circuit_breaker(BreakerState s, CallClass outcome,
                                         Tick now,
                                         const CircuitBreakerConfig& cfg) {
  if (s.mode == BreakerMode::Open &&
      now >= s.opened_at + cfg.sleep_window_ms)
    s.mode = BreakerMode::HalfOpen;

  switch (s.mode) {
    case BreakerMode::Closed:
      if (outcome == CallClass::Failure) {
        if (++s.consecutive_failures >= cfg.failure_threshold) {
          s.mode = BreakerMode::Open;
          s.opened_at = now;
        }
      } else {
        s.consecutive_failures = 0;
      }
      break;
    case BreakerMode::Open:
      break;  // call was rejected without reaching the endpoint
    case BreakerMode::HalfOpen:
      if (outcome == CallClass::Success) {
        s.mode = BreakerMode::Closed;
        s.consecutive_failures = 0;
      } else {
        s.mode = BreakerMode::Open;  // sleep window starts again
        s.opened_at = now;
      }
      break;
  }
  return s;
}

// Admission check for a call attempted at `now`; mutates Open -> HalfOpen
// once the sleep window has elapsed (the admitted call is the probe).
inline bool breaker_admits(BreakerState& s, Tick now,
                           const CircuitBreakerConfig& cfg) {
  if (s.mode == BreakerMode::Open) {
    if (now < s.opened_at + cfg.sleep_window_ms) return false;
    s.mode = BreakerMode::HalfOpen;
  }
  return true;
}

}  // namespace faultline::mesh
