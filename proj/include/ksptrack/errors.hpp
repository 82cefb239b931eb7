#pragma once

#include <stdexcept>
#include <string>

namespace ksptrack {

/// Bad user input: malformed files, out-of-range parameters, mismatched
/// dimensions. The CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An internal consistency check failed (stale labels, broken path
/// decomposition, ...). The CLI maps this to exit code 3.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace ksptrack
