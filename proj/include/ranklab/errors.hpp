#pragma once

#include <stdexcept>
#include <string>

namespace ranklab {

// Bad shapes, out-of-range indices, negative orders.
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// An input violates a documented precondition (non-diagonal where diagonal
// is required, PSD defect above tolerance, nonvanishing bad block, ...).
struct PreconditionError : std::domain_error {
  using std::domain_error::domain_error;
};

// Operator evaluated outside its admissible set, or singular where an
// inverse is required.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Eigensolver failure, singular factorization.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The rank dichotomy k in {l-1, l} failed; only a misconfigured rank
// tolerance can cause this.
struct InconsistencyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// NaN or overflow during time stepping.
struct DivergenceError : std::runtime_error {
  DivergenceError(const std::string& what, long frame)
      : std::runtime_error(what), frame_index(frame) {}
  long frame_index;
};

}  // namespace ranklab
