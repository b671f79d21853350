#pragma once

#include <stdexcept>
#include <string>

namespace dobs {

// Error taxonomy mirrored by the C API status codes and the CLI exit codes.
// Messages that concern a checked equation start with its label, e.g.
// "Eq(pr1) ..." so failure records can name the violated identity.

struct InvalidInputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A proved property failed numerically (Lyapunov decrement, norm bound, ...).
struct CertificateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Finite-precision breakdown: placement residual, overflow guard, stalled solve.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem-level failure (open, read, write). Parse errors are
// InvalidInputError instead.
struct IOError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Internal consistency check failed; indicates a bug, not bad input.
struct InternalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dobs
