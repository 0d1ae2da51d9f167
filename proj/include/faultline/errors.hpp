#pragma once

#include <stdexcept>
#include <string>

namespace faultline {

// Bad user input: unknown ids, malformed files, out-of-range arguments.
// The CLI maps this to exit code 3.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// A simulation exceeded its event cap (runaway recursion in the call graph).
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace faultline
