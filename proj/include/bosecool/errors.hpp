// errors.hpp -- failure categories surfaced as process exit codes by the CLI
#pragma once

#include <stdexcept>

namespace bosecool {

// Numerics went bad: rank ambiguity, trace/positivity blowup, cutoff leakage.
struct numerical_failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A structural identity the model guarantees was violated.
struct invariant_violation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace bosecool
